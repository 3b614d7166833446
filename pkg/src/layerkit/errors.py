"""Exception hierarchy shared by the layerkit modules."""


class LayerkitError(Exception):
    """Base class for all layerkit failures."""


class InputError(LayerkitError, ValueError):
    """Invalid parameters or malformed input data."""


class DomainError(InputError):
    """A parameter lies outside the domain of a formula."""


class MeshError(InputError):
    """A node vector violates the mesh invariants."""


class NumericalError(LayerkitError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class RootNotBracketed(NumericalError):
    """No sign change was found on the search interval."""


class Infeasible(NumericalError):
    """No positive step vector satisfies the constraints."""


class QuadratureFailure(NumericalError):
    """A quadrature did not converge (e.g. non-integrable monitor)."""


class PivotBreakdown(NumericalError):
    """A zero pivot appeared during tridiagonal elimination."""


class SignError(InputError):
    """A coefficient violates its sign condition."""
