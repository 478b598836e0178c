class LidarMixError(Exception):
    """Base class for every error raised by the LidarMix package.
    """


class FormatError(LidarMixError, ValueError):
    """Raised when a point, label, remap or checkpoint file is malformed.
    """


class ShapeError(LidarMixError, ValueError):
    """Raised when tensor or array shapes disagree.
    """


class ConfigurationError(LidarMixError, ValueError):
    """Raised for invalid configuration values, including a checkpoint whose
    stored configuration does not match the requested one.
    """


class TrainingError(LidarMixError, RuntimeError):
    """Raised when training cannot continue (e.g. non-finite loss).
    """
