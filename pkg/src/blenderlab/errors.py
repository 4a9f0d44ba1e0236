"""Exception types shared across the package."""


class BlenderlabError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(BlenderlabError):
    """A dimension constraint is violated (e.g. odd ambient dimension)."""


class FrameError(BlenderlabError):
    """A matrix passed as a plane frame is not orthonormal."""


class NotSameClass(BlenderlabError):
    """Two subspaces do not share a symplectic classification."""


class NumericalRankError(BlenderlabError):
    """A pairing or Gram matrix is numerically degenerate."""


class StepSizeError(BlenderlabError):
    """A requested displacement is too large for the bump geometry."""


class ParamError(BlenderlabError):
    """An argument is outside its documented range."""


class ContractError(BlenderlabError):
    """A required bound (e.g. a Lipschitz constant) is unavailable."""


class ShapeError(BlenderlabError):
    """The linear geometry cannot support the requested cover."""


class WindowError(BlenderlabError):
    """An iteration would read symbols outside the finite word window."""


class NoIsolatedFixedPoint(BlenderlabError):
    """The fixed-point equation is degenerate (a continuum of solutions)."""


class IndeterminateIndexError(BlenderlabError):
    """A singular value sits too close to 1 to assign stability indices."""


class RankError(BlenderlabError):
    """A pushed-forward frame lost rank."""


class SubspaceClassError(BlenderlabError):
    """The dominant subspace does not have the required symplectic class."""


class BudgetError(BlenderlabError):
    """A search exceeded its node budget.

    The partially completed result is attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
