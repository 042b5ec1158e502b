"""Exception hierarchy for the DTM predictor."""


class DeepterraError(Exception):
    """Base class for all deepterra errors."""


class ShapeMismatch(DeepterraError):
    """Tensor dimensions violate a model's contract."""


class DataError(DeepterraError):
    """A tile's bands or geometry do not match the configuration."""


class DivergenceError(DeepterraError):
    """Training produced a non-finite loss."""


class BandOrderMismatch(DataError):
    """A stack's band order differs from the checkpoint's."""


class FormatError(DeepterraError):
    """A raster stack or manifest file is malformed or corrupt."""
