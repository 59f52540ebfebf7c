"""Exception hierarchy shared across the package."""


class DPMerfError(Exception):
    """Base class for all package errors."""


class InvalidConfig(DPMerfError, ValueError):
    """A configuration value is out of range. ``field`` names the offender."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DimensionMismatch(DPMerfError, ValueError):
    pass


class ShapeMismatch(DPMerfError, ValueError):
    pass


class DegenerateData(DPMerfError, ValueError):
    pass


class EmptyDataset(DPMerfError, ValueError):
    pass


class LabelOutOfRange(DPMerfError, ValueError):
    pass


class NonBinaryCategorical(DPMerfError, ValueError):
    pass


class InvalidOrder(DPMerfError, ValueError):
    pass


class EmptyGrid(DPMerfError, ValueError):
    pass


class InvalidSigma(DPMerfError, ValueError):
    pass


class Unsatisfiable(DPMerfError):
    """No noise multiplier in the search range meets the privacy budget."""


class InvalidArch(DPMerfError, ValueError):
    pass


class DivergedLoss(DPMerfError, FloatingPointError):
    pass


class InvalidSchema(DPMerfError, ValueError):
    pass


class SchemaMismatch(DPMerfError, ValueError):
    pass


class ParseError(DPMerfError, ValueError):
    pass


class SingleClassTrain(DPMerfError, ValueError):
    pass


class ModelVersionError(DPMerfError):
    pass
