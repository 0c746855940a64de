"""Exception types shared across the toolkit."""


class SedForgeError(Exception):
    """Base class for every error raised deliberately by this package."""


class ShapeError(SedForgeError):
    """Array shapes or axis sizes do not line up."""


class ConfigError(SedForgeError):
    """A configuration value or combination of values is invalid."""


class EmptyInputError(SedForgeError):
    """Input is too short or empty for the requested operation."""


class AnnotationError(SedForgeError):
    """An annotation file or line cannot be parsed or validated."""


class RecipeError(SedForgeError):
    """A mixture recipe references cuts or placements that do not fit."""


class ManifestError(SedForgeError):
    """A dataset manifest is malformed or inconsistent."""


class CorruptFileError(SedForgeError):
    """A binary artifact is truncated, malformed, or fails validation."""


class UnsupportedVersionError(CorruptFileError):
    """A binary artifact declares a format version this build cannot read."""


class UndefinedMetricError(SedForgeError):
    """The requested metric has no defined value on this input."""


class DivergedError(SedForgeError):
    """Training produced non-finite losses or gradients."""


class EngineStateError(SedForgeError):
    """A network method was called out of order (e.g. backward with no forward)."""


class StageError(SedForgeError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
