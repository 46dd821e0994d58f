"""Exception types shared across the package."""


class ModelError(Exception):
    """Invalid or unusable mixture model."""


class DegenerateModelError(ModelError):
    """Squaring or normalization produced a non-positive or non-finite mass."""


class ZeroEvidenceError(RuntimeError):
    """A conditioning prefix landed in a zero-density valley."""


class BracketError(RuntimeError):
    """The inversion bracket does not enclose the requested quantile."""


class StarvedBudgetError(ValueError):
    """Budget allocation left one mixture part without samples."""


class InitFailureError(RuntimeError):
    """Random model initialization failed to meet its rejection criterion."""


class DegenerateWeightsError(RuntimeError):
    """All importance weights are zero; self-normalization is impossible."""
