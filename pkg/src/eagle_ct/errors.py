"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """A scalar parameter is outside its allowed range."""


class ConfigurationError(ValueError):
    """A combination of settings cannot be run."""


class ImageFormatError(ValueError):
    """An image file or its sidecar header is unreadable or inconsistent."""


class CorruptHeaderError(ImageFormatError):
    pass


class SizeMismatchError(ImageFormatError):
    pass
