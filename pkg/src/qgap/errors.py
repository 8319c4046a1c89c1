"""Exception types shared across the package."""


class QGapError(Exception):
    """Base class for errors raised by qgap."""


class InvalidModelError(QGapError, ValueError):
    """Model parameters outside the supported range."""


class ConfigurationError(QGapError, ValueError):
    """Invalid run configuration or noise placement."""


class MissingSampleError(QGapError, ValueError):
    """A time series lacks one or more (s, n) samples."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f"(s={s:+d}, n={n})" for s, n in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" ... ({len(self.missing)} total)"
        super().__init__(f"time series is missing samples: {shown}{more}")


class InternalConsistencyError(QGapError, AssertionError):
    """Two routes that must agree numerically did not."""


class PipelineStageError(QGapError, RuntimeError):
    """A runtime failure inside one named stage of the gap-estimation pipeline."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
