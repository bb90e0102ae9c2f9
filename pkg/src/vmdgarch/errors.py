"""Exception hierarchy shared by every stage of the pipeline."""


class VmdGarchError(Exception):
    """Base class for all package errors."""


class DatasetError(VmdGarchError):
    """Malformed, missing or inconsistent dataset on disk.

    Parameters
    ----------
    message : str
        Human readable description.
    record : str, optional
        Identifier of the offending record, when one can be named.
    """

    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"{message} (record {record!r})"
        super().__init__(message)


class DatasetEmptyError(DatasetError):
    """No records were found where some were expected."""


class DegenerateSignalError(VmdGarchError):
    """Signal has zero power or zero variance where a nonzero one is needed."""


class ConfigError(VmdGarchError, ValueError):
    """Invalid configuration or out-of-range argument."""


class DivergenceError(VmdGarchError):
    """Time integration produced a non-finite state."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"integration diverged at step {step}")


class DegenerateDataError(VmdGarchError):
    """Feature matrix carries no usable variance for a reduction model."""


class SingularSystemError(VmdGarchError):
    """Linear or eigen system is singular even after regularization."""


class StageError(VmdGarchError):
    """Pipeline stage failure, annotated with stage name and record id."""

    def __init__(self, stage, cause, record=None):
        self.stage = stage
        self.record = record
        self.cause = cause
        where = f" on record {record!r}" if record is not None else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")

    def to_dict(self):
        return {
            "stage": self.stage,
            "record": self.record,
            "error": type(self.cause).__name__,
            "message": str(self.cause),
        }


class MissingArtifactError(VmdGarchError):
    """An upstream artifact needed by a subcommand does not exist yet."""

    def __init__(self, artifact, producer):
        self.artifact = artifact
        self.producer = producer
        super().__init__(
            f"missing artifact {artifact!s}; run the {producer!r} subcommand first"
        )
