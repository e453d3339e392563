"""Exception types shared across the control stack."""


class VikiError(Exception):
    """Base class for all library errors."""


class BehindCamera(VikiError):
    """A point with non-positive depth was passed to the pinhole projection."""


class NonPositiveDepth(VikiError):
    """A depth value that must be strictly positive was zero or negative."""


class DegenerateFeatures(VikiError):
    """The feature set yields a rank-deficient interaction matrix."""


class SingularCombined(VikiError):
    """The combined feature-to-robot-velocity matrix is rank deficient."""


class DimensionMismatch(VikiError):
    """Grids passed to a fusion operation do not share dimensions."""


class EmptyBox(VikiError):
    """A bounding box collapsed to zero or negative extent."""


class NoValidDepth(VikiError):
    """Every depth cell in the queried region is unknown (zero)."""


class NoTargetYet(VikiError):
    """The kinematic fallback was requested before any target was memorized."""


class FirstDetectionTimeout(VikiError):
    """No object detection occurred within the scenario warm-up window."""


class ConfigError(VikiError):
    """A scenario configuration is invalid or inconsistent."""


class EmptyLog(VikiError):
    """Metrics were requested for an empty run log."""
