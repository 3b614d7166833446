"""Finite-difference and P1 finite-element discretizations on arbitrary meshes.

Convection-diffusion problems are written ``-eps u'' - b u' + c u = f`` with
``b >= gamma > 0``, so the layer sits at ``x = 0``.  Reaction-diffusion
problems are ``-eps^2 u'' + c u = f`` with ``c >= gamma^2 > 0`` and layers at
both ends.  All schemes reduce to a tridiagonal system for the interior
nodal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._quad import cell_integrals, gauss_legendre
from .errors import InputError, PivotBreakdown, SignError
from .meshes import Mesh1D

CD = "ConvectionDiffusion"
RD = "ReactionDiffusion"
SCHEMES = ("Upwind", "Central", "FemP1")
_SCHEME_ALIASES = {"upwind": "Upwind", "central": "Central", "fem": "FemP1",
                   "femp1": "FemP1", "p1": "FemP1"}
_KIND_ALIASES = {"cd": CD, "convectiondiffusion": CD, "rd": RD, "reactiondiffusion": RD}


def canonical_scheme(name: str) -> str:
    try:
        return _SCHEME_ALIASES[name.replace("-", "").replace("_", "").lower()]
    except KeyError:
        raise InputError(f"unknown scheme {name!r}; expected one of {SCHEMES}") from None


def canonical_kind(name: str) -> str:
    try:
        return _KIND_ALIASES[name.replace("-", "").replace("_", "").lower()]
    except KeyError:
        raise InputError(f"unknown problem kind {name!r}") from None


def _const(v: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.full(np.shape(x), float(v))


@dataclass(frozen=True)
class SPProblem:
    """Two-point boundary value problem with a small parameter.

    Coefficient callables must accept numpy arrays.  ``gamma`` is the lower
    bound of ``b`` (convection) or of ``sqrt(c)`` (reaction).
    """

    kind: str
    eps: float
    f: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], np.ndarray] = field(default_factory=lambda: _const(0.0))
    b: Callable[[np.ndarray], np.ndarray] | None = None
    gamma: float = 1.0
    ua: float = 0.0
    ub: float = 0.0
    exact: Callable[[np.ndarray], np.ndarray] | None = None
    dexact: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if not 0.0 < self.eps <= 1.0:
            raise InputError(f"eps must lie in (0, 1], got {self.eps}")
        if self.gamma <= 0:
            raise InputError("gamma must be positive")
        if self.kind == CD and self.b is None:
            raise InputError("a convection-diffusion problem needs b")

    @property
    def diffusion(self) -> float:
        return self.eps if self.kind == CD else self.eps ** 2

    @property
    def layer_scale(self) -> float:
        return self.eps / self.gamma

    @property
    def layer_sides(self) -> tuple[str, ...]:
        return ("left",) if self.kind == CD else ("left", "right")

    def check_coefficients(self, samples: int = 1001) -> None:
        """Raise SignError if sampled coefficients violate the sign conditions."""
        x = np.linspace(0.0, 1.0, samples)
        c = np.asarray(self.c(x), dtype=float)
        if self.kind == CD:
            b = np.asarray(self.b(x), dtype=float)
            if np.any(b < self.gamma):
                raise SignError(f"b must satisfy b >= gamma = {self.gamma}; min b = {b.min():.3e}")
            if np.any(c < 0):
                raise SignError("c must be nonnegative")
        elif np.any(c < self.gamma ** 2):
            raise SignError(f"c must satisfy c >= gamma^2 = {self.gamma ** 2}")


def manufactured_problem(kind: str, eps: float, gamma: float = 1.0) -> SPProblem:
    """Problem with a known solution containing the layer ``exp(-gamma x/eps)``.

    Convection-diffusion (b = gamma, c = 1)::

        u = (exp(-gamma x/eps) - exp(-gamma/eps)) / (1 - exp(-gamma/eps)) + x (1 - x)
        f = u + 2 eps - gamma (1 - 2x)

    (the layer part is annihilated by ``-eps d2 - gamma d1``).

    Reaction-diffusion (c = gamma^2)::

        u = exp(-gamma x/eps) + exp(-gamma (1-x)/eps) + cos(pi x)
        f = (eps^2 pi^2 + gamma^2) cos(pi x)
    """
    kind = canonical_kind(kind)
    g = float(gamma)
    if kind == CD:
        tail = math.exp(-g / eps)
        denom = -math.expm1(-g / eps)

        def exact(x):
            x = np.asarray(x, dtype=float)
            return (np.exp(-g * x / eps) - tail) / denom + x * (1.0 - x)

        def dexact(x):
            x = np.asarray(x, dtype=float)
            return -(g / eps) * np.exp(-g * x / eps) / denom + 1.0 - 2.0 * x

        def f(x):
            x = np.asarray(x, dtype=float)
            return exact(x) + 2.0 * eps - g * (1.0 - 2.0 * x)

        return SPProblem(CD, eps, f, c=_const(1.0), b=_const(g), gamma=g,
                         ua=float(exact(0.0)), ub=float(exact(1.0)),
                         exact=exact, dexact=dexact, name="manufactured-cd")
    rate = g / eps

    def exact(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-rate * x) + np.exp(-rate * (1.0 - x)) + np.cos(np.pi * x)

    def dexact(x):
        x = np.asarray(x, dtype=float)
        return (-rate * np.exp(-rate * x) + rate * np.exp(-rate * (1.0 - x))
                - np.pi * np.sin(np.pi * x))

    def f(x):
        return (eps ** 2 * np.pi ** 2 + g ** 2) * np.cos(np.pi * np.asarray(x, dtype=float))

    return SPProblem(RD, eps, f, c=_const(g * g), gamma=g,
                     ua=float(exact(0.0)), ub=float(exact(1.0)),
                     exact=exact, dexact=dexact, name="manufactured-rd")


@dataclass
class Tridiagonal:
    """Interior system ``sub[i-1] u[i-1] + diag[i] u[i] + sup[i] u[i+1] = rhs[i]``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.rhs) != n or len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise InputError("inconsistent tridiagonal dimensions")

    def is_m_matrix_pattern(self) -> bool:
        return bool(np.all(self.sub <= 0) and np.all(self.sup <= 0) and np.all(self.diag > 0))

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.sub * u[:-1]
        out[:-1] += self.sup * u[1:]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def thomas_solve(sys: Tridiagonal) -> np.ndarray:
    """Gaussian elimination without pivoting for a tridiagonal system."""
    n = len(sys.diag)
    c = np.empty(n)
    d = np.empty(n)
    beta = sys.diag[0]
    if beta == 0.0:
        raise PivotBreakdown("zero pivot in row 0")
    d[0] = sys.rhs[0] / beta
    for i in range(1, n):
        c[i - 1] = sys.sup[i - 1] / beta
        beta = sys.diag[i] - sys.sub[i - 1] * c[i - 1]
        if beta == 0.0:
            raise PivotBreakdown(f"zero pivot in row {i}")
        d[i] = (sys.rhs[i] - sys.sub[i - 1] * d[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d


def _boundary_shift(lower, diag, upper, rhs, ua, ub) -> Tridiagonal:
    rhs = rhs.copy()
    rhs[0] -= lower[0] * ua
    rhs[-1] -= upper[-1] * ub
    return Tridiagonal(lower[1:].copy(), diag, upper[:-1].copy(), rhs)


def _second_difference(mesh: Mesh1D, coef: float):
    h = mesh.steps
    hbar = 0.5 * (h[:-1] + h[1:])
    lower = -coef / (hbar * h[:-1])
    upper = -coef / (hbar * h[1:])
    return h, hbar, lower, upper, -(lower + upper)


def assemble_upwind(problem: SPProblem, mesh: Mesh1D, conservative: bool = False) -> Tridiagonal:
    """Upwind finite differences for ``-eps u'' - b u' + c u = f``.

    The convection term uses the forward difference towards the outflow
    boundary.  With ``conservative=True`` the flux ``eps u' + b u`` is
    balanced over the dual cell ``[x_{i-1/2}, x_{i+1/2}]``: the convective
    difference is divided by the dual length and ``b`` is taken at the
    right interface.
    """
    if problem.kind != CD:
        raise InputError("the upwind scheme discretizes convection-diffusion problems")
    problem.check_coefficients()
    x = mesh.nodes
    h, hbar, lower, upper, diag = _second_difference(mesh, problem.eps)
    xi = x[1:-1]
    if conservative:
        bw = np.asarray(problem.b(0.5 * (x[1:-1] + x[2:])), dtype=float) / hbar
    else:
        bw = np.asarray(problem.b(xi), dtype=float) / h[1:]
    upper = upper - bw
    diag = diag + bw + np.asarray(problem.c(xi), dtype=float)
    rhs = np.asarray(problem.f(xi), dtype=float)
    return _boundary_shift(lower, diag, upper, rhs, problem.ua, problem.ub)


def assemble_central(problem: SPProblem, mesh: Mesh1D) -> Tridiagonal:
    """Central differences for ``-eps^2 u'' + c u = f``."""
    if problem.kind != RD:
        raise InputError("the central scheme discretizes reaction-diffusion problems")
    problem.check_coefficients()
    xi = mesh.nodes[1:-1]
    _, _, lower, upper, diag = _second_difference(mesh, problem.eps ** 2)
    diag = diag + np.asarray(problem.c(xi), dtype=float)
    rhs = np.asarray(problem.f(xi), dtype=float)
    return _boundary_shift(lower, diag, upper, rhs, problem.ua, problem.ub)


def assemble_fem_p1(problem: SPProblem, mesh: Mesh1D, npts: int = 3) -> Tridiagonal:
    """Galerkin P1 elements, cellwise Gauss quadrature with `npts` points.

    Bilinear form ``d (u', v') - (b u', v) + (c u, v)`` with ``d`` the
    diffusion coefficient (``eps`` or ``eps^2``); ``b = 0`` for
    reaction-diffusion.
    """
    problem.check_coefficients()
    x = mesh.nodes
    h = mesh.steps
    t, w = gauss_legendre(npts)
    xq = x[:-1, None] + h[:, None] * t[None, :]
    wq = h[:, None] * w[None, :]
    phiL, phiR = 1.0 - t[None, :], t[None, :]
    c = np.asarray(problem.c(xq), dtype=float)
    f = np.asarray(problem.f(xq), dtype=float)
    b = np.asarray(problem.b(xq), dtype=float) if problem.kind == CD else np.zeros_like(xq)
    d = problem.diffusion
    # element entries K[a, b'] = a(phi_b', phi_a), derivatives -1/h and 1/h
    mass_LL = np.sum(wq * c * phiL * phiL, axis=1)
    mass_LR = np.sum(wq * c * phiL * phiR, axis=1)
    mass_RR = np.sum(wq * c * phiR * phiR, axis=1)
    conv_L = np.sum(wq * b * phiL, axis=1) / h
    conv_R = np.sum(wq * b * phiR, axis=1) / h
    stiff = d / h
    K_LL = stiff + conv_L + mass_LL
    K_LR = -stiff - conv_L + mass_LR
    K_RL = -stiff + conv_R + mass_LR
    K_RR = stiff - conv_R + mass_RR
    F_L = np.sum(wq * f * phiL, axis=1)
    F_R = np.sum(wq * f * phiR, axis=1)
    n = mesh.N
    diag = np.zeros(n + 1)
    diag[:-1] += K_LL
    diag[1:] += K_RR
    lower = K_RL            # row k+1, column k
    upper = K_LR            # row k, column k+1
    rhs = np.zeros(n + 1)
    rhs[:-1] += F_L
    rhs[1:] += F_R
    return _boundary_shift(lower[:-1], diag[1:-1], upper[1:], rhs[1:-1],
                           problem.ua, problem.ub)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    mesh: Mesh1D
    values: np.ndarray
    scheme: str
    problem: SPProblem | None = None
    conservative: bool = False

    def backward_difference(self) -> np.ndarray:
        """``D^- u_i = (u_i - u_{i-1}) / h_i`` for i = 1..N."""
        return np.diff(self.values) / self.mesh.steps


def solve(problem: SPProblem, mesh: Mesh1D, scheme: str = "Upwind",
          conservative: bool = False) -> DiscreteSolution:
    scheme = canonical_scheme(scheme)
    if scheme == "Upwind":
        sys = assemble_upwind(problem, mesh, conservative)
    elif scheme == "Central":
        sys = assemble_central(problem, mesh)
    else:
        sys = assemble_fem_p1(problem, mesh)
    u = np.empty(mesh.N + 1)
    u[0], u[-1] = problem.ua, problem.ub
    u[1:-1] = thomas_solve(sys)
    u.setflags(write=False)
    return DiscreteSolution(mesh, u, scheme, problem, conservative and scheme == "Upwind")


def _exact_of(solution: DiscreteSolution, exact, dexact=None):
    p = solution.problem
    exact = exact if exact is not None else (p.exact if p else None)
    dexact = dexact if dexact is not None else (p.dexact if p else None)
    if exact is None:
        raise InputError("no exact solution available")
    return exact, dexact


def error_max(solution: DiscreteSolution, exact=None) -> float:
    """Discrete maximum norm of the nodal error."""
    exact, _ = _exact_of(solution, exact)
    return float(np.max(np.abs(exact(solution.mesh.nodes) - solution.values)))


def error_energy_parts(solution: DiscreteSolution, exact=None, dexact=None) -> tuple[float, float]:
    """``(|u - u^N|_1, ||u - u^N||_0)`` for the piecewise-linear interpolant u^N."""
    exact, dexact = _exact_of(solution, exact, dexact)
    if dexact is None:
        raise InputError("the energy norm needs the exact derivative")
    x, u = solution.mesh.nodes, solution.values
    slope = np.diff(u) / solution.mesh.steps
    p = solution.problem
    scale = p.layer_scale if p else None
    sides = p.layer_sides if p else ("left",)

    def sq_err(xq, cell):
        uh = u[cell] + slope[cell] * (xq - x[cell])
        return (exact(xq) - uh) ** 2

    def sq_derr(xq, cell):
        return (dexact(xq) - slope[cell]) ** 2

    l2 = math.sqrt(max(cell_integrals(x, sq_err, scale, sides).sum(), 0.0))
    h1 = math.sqrt(max(cell_integrals(x, sq_derr, scale, sides).sum(), 0.0))
    return h1, l2


def error_energy(solution: DiscreteSolution, exact=None, dexact=None) -> float:
    """``(d |u - u^N|_1^2 + ||u - u^N||_0^2)^(1/2)``, d the diffusion coefficient."""
    h1, l2 = error_energy_parts(solution, exact, dexact)
    d = solution.problem.diffusion if solution.problem else 1.0
    return math.sqrt(d * h1 ** 2 + l2 ** 2)
