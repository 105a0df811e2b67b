"""Exception types shared across the package."""


class AdvDetectError(Exception):
    """Base class for every error raised by advdetect."""


class BadMagicError(AdvDetectError, ValueError):
    """A binary container announced an unexpected magic number."""


class TruncatedFileError(AdvDetectError, ValueError):
    """A binary container is shorter than its header promises."""


class CountMismatchError(AdvDetectError, ValueError):
    """Image and label containers disagree about the example count."""


class DimensionMismatchError(AdvDetectError, ValueError):
    """An input vector or matrix has the wrong dimensionality."""


class EmptyDatasetError(AdvDetectError, ValueError):
    """An operation requiring data was given none."""


class NotSymmetricError(AdvDetectError, ValueError):
    """The symmetric eigensolver was handed a non-symmetric matrix."""


class NoConvergenceError(AdvDetectError, RuntimeError):
    """The eigensolver failed to converge."""


class BadIndexError(AdvDetectError, IndexError):
    """A tail or image index is out of range."""


class NonFiniteActivationError(AdvDetectError, FloatingPointError):
    """A forward pass produced NaN or infinite activations."""


class ShapeMismatchError(AdvDetectError, ValueError):
    """Gradient or parameter arrays do not line up with the network."""


class BarrierInfeasibleError(AdvDetectError, ValueError):
    """The starting point lies outside the open barrier interval."""


class OutOfIntervalError(AdvDetectError, ValueError):
    """A barrier penalty was evaluated outside its open interval."""


class TooFewExamplesError(AdvDetectError, ValueError):
    """Clean-statistic estimation needs at least two examples."""


class EmptyPoolError(AdvDetectError, ValueError):
    """Detector evaluation was given an empty score pool."""


class RequiresReluError(AdvDetectError, TypeError):
    """This saliency rule is defined for ReLU networks only."""


class RequiresGeluError(AdvDetectError, TypeError):
    """This saliency rule is defined for GELU networks only."""


class BadImageIdError(AdvDetectError, IndexError):
    """A requested image id is not in the dataset."""


class ExperimentAssertionError(AdvDetectError, AssertionError):
    """An experiment-level property the run is required to satisfy failed."""
