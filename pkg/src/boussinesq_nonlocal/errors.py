"""Exception hierarchy shared by all solver modules."""


class BoussinesqError(Exception):
    """Base class for solver errors."""


class GridError(BoussinesqError, ValueError):
    pass


class DomainTagError(BoussinesqError, ValueError):
    """A field was passed in the wrong space (physical vs frequency)."""


class SymbolSingularityError(BoussinesqError):
    """``1 + L0(xi)`` vanishes at a frequency where Q and L are needed."""

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class PropagatorOverflowError(BoussinesqError):
    """``|Im(sqrt(Q) t)|`` exceeds the overflow guard (hyperbolic growth)."""

    def __init__(self, message, mode=None, t=None):
        super().__init__(message)
        self.mode = mode
        self.t = t


class SingularDeterminantError(BoussinesqError):
    """The nonlocal 2x2 determinant is too close to zero at some mode."""

    def __init__(self, message, xi=None, value=None):
        super().__init__(message)
        self.xi = xi
        self.value = value


class InadmissibleProblemError(BoussinesqError):
    """Input rejected before solving.

    ``hypothesis`` names the violated condition: ``"symbol_nonvanishing"``
    when ``L1`` or ``1 + L0`` has a zero on the grid, ``"kernel_margin"`` when
    ``|1 + int(alpha*beta)| > int(|alpha| + |beta|)`` fails. ``witness`` is the
    offending frequency or the (non-positive) margin.
    """

    def __init__(self, message, hypothesis, witness=None):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.witness = witness
