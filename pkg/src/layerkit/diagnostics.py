"""Mesh quality measures: quasi-equidistance, Liu-Xu admissibility,
transition-region node counts and scaled interpolation errors of the
layer function ``E(x) = exp(-gamma x/eps)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from ._quad import cell_integrals
from .errors import DomainError
from .meshes import Mesh1D

NORMS = ("ScaledH1Semi", "ScaledL2", "MaxNorm")


def quasi_equidistance_constant(mesh: Mesh1D) -> float:
    """Smallest K with ``h_i <= K h_j`` whenever ``|i - j| <= 1``."""
    h = mesh.steps
    ratio = h[1:] / h[:-1]
    return float(max(1.0, np.max(np.maximum(ratio, 1.0 / ratio))))


def liuxu_admissibility(mesh: Mesh1D, eps: float) -> float:
    """``N^2 sum_i (h_i/eps)^3 exp(-2 x_{i-1}/eps)``, summed in log space."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    h = mesh.steps
    logs = 3.0 * np.log(h / eps) - 2.0 * mesh.nodes[:-1] / eps
    return float(mesh.N ** 2 * math.exp(logsumexp(logs)))


def con2_bound(mesh: Mesh1D, eps: float, S: float, n_ref: float | None = None) -> np.ndarray:
    """Per-cell majorant ``min(S eps/N exp(x_{i-1}/(2 eps)), 1/N)``."""
    n = float(n_ref if n_ref is not None else mesh.N)
    expo = np.minimum(mesh.nodes[:-1] / (2.0 * eps), 700.0)
    return np.minimum(S * eps / n * np.exp(expo), 1.0 / n)


def liuxu_con2_check(mesh: Mesh1D, eps: float, S: float,
                     n_ref: float | None = None) -> tuple[bool, float]:
    """Check ``h_i <= min(S eps N^-1 e^{x_{i-1}/(2 eps)}, N^-1)`` on every cell.

    The N in the bound is `n_ref` (default: the mesh's own N); a mesh with
    N' <= C n_ref cells may satisfy the condition for a fixed C.  Returns
    ``(holds, margin)`` where margin is the worst ratio of step to bound.
    """
    if not S > 0:
        raise DomainError("S must be positive")
    ratio = mesh.steps / con2_bound(mesh, eps, S, n_ref)
    margin = float(ratio.max())
    # steps built from the bound itself may exceed it by round-off
    return margin <= 1.0 + 1e-12, margin


@dataclass(frozen=True)
class LayerFn:
    """``E(x) = exp(-gamma x / eps)``; ``gamma = 0`` gives the constant 1."""

    gamma: float
    eps: float
    mu: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or not self.eps > 0:
            raise DomainError("LayerFn needs gamma >= 0 and eps > 0")

    def __call__(self, x):
        return np.exp(-self.gamma * np.asarray(x, dtype=float) / self.eps)

    def derivative(self, x):
        return -(self.gamma / self.eps) * self(x)


def _interp_terms(mesh: Mesh1D, layer: LayerFn, refine: int):
    x = mesh.nodes
    Ex = layer(x)
    slope = np.diff(Ex) / mesh.steps
    scale = layer.eps / layer.gamma if layer.gamma > 0 else None

    def sq(xq, cell):
        return (layer(xq) - Ex[cell] - slope[cell] * (xq - x[cell])) ** 2

    def dsq(xq, cell):
        return (layer.derivative(xq) - slope[cell]) ** 2

    l2 = math.sqrt(max(cell_integrals(x, sq, scale, ("left",), refine=refine).sum(), 0.0))
    h1 = math.sqrt(max(cell_integrals(x, dsq, scale, ("left",), refine=refine).sum(), 0.0))
    return h1, l2


def _max_interp(mesh: Mesh1D, layer: LayerFn) -> float:
    # on each cell E - E^I peaks where E' equals the chord slope
    if layer.gamma == 0:
        return 0.0
    x = mesh.nodes
    Ex = layer(x)
    slope = np.diff(Ex) / mesh.steps
    k = layer.gamma / layer.eps
    with np.errstate(divide="ignore"):
        xs = -np.log(np.maximum(-slope / k, 1e-300)) / k
    xs = np.clip(xs, x[:-1], x[1:])
    gap = Ex[:-1] + slope * (xs - x[:-1]) - layer(xs)
    return float(np.max(np.abs(gap)))


def interpolation_error_layer(mesh: Mesh1D, layer: LayerFn, norm: str = "ScaledH1Semi") -> float:
    """Scaled norm of ``E - E^I`` for the piecewise-linear interpolant.

    ``ScaledH1Semi`` is ``eps^(1/2) |E - E^I|_1``, ``ScaledL2`` is
    ``eps^(-1/2) ||E - E^I||_0``, ``MaxNorm`` the exact maximum.  Warns when
    bisecting every quadrature piece moves the result by more than 1e-6
    relatively.
    """
    if norm not in NORMS:
        raise DomainError(f"norm must be one of {NORMS}, got {norm!r}")
    if norm == "MaxNorm":
        return _max_interp(mesh, layer)
    if layer.gamma == 0:
        return 0.0
    h1, l2 = _interp_terms(mesh, layer, 0)
    h1r, l2r = _interp_terms(mesh, layer, 1)
    a, b = (h1, h1r) if norm == "ScaledH1Semi" else (l2, l2r)
    if abs(a - b) > 1e-6 * max(abs(b), 1e-300):
        warnings.warn(f"quadrature not converged for {norm}: {a!r} vs {b!r}",
                      RuntimeWarning, stacklevel=2)
    if norm == "ScaledH1Semi":
        return math.sqrt(layer.eps) * b
    return b / math.sqrt(layer.eps)


def transition_region_counts(mesh: Mesh1D, eps: float, gamma: float, H: float) -> tuple[int, int, int]:
    """Nodes in ``[0, x*]``, ``(x*, x')`` and ``[x', 1]``.

    ``x* = K eps ln(K/H)`` and ``x' = K eps ln(K/eps)`` with ``K = 2/gamma``;
    when ``x' < x*`` the transition region is empty.
    """
    K = 2.0 / gamma
    x_star = max(0.0, K * eps * math.log(K / H))
    x_prime = max(x_star, K * eps * math.log(K / eps))
    x = mesh.nodes
    n_inner = int(np.count_nonzero(x <= x_star))
    n_outer = int(np.count_nonzero(x >= x_prime))
    if x_prime <= x_star:
        n_outer = int(x.size - n_inner)
    return n_inner, int(x.size - n_inner - n_outer), n_outer


def step_profile_deviation(mesh: Mesh1D, inverse, upto: float, n_ref: int | None = None) -> float:
    """Worst ``|h_i / h_ref(x) - 1|`` over cells inside ``[0, upto]``.

    ``h_ref`` is the local step of a reference mesh with generating
    function ``phi`` and ``n_ref`` cells; with ``t = phi^{-1}`` given as
    `inverse`, the ratio on a cell is ``n_ref (t(x_i) - t(x_{i-1}))``.
    """
    x = mesh.nodes
    n = int(np.count_nonzero(x[1:] <= upto * (1.0 + 1e-12)))
    if n == 0:
        raise DomainError("no cell lies inside the comparison interval")
    t = np.asarray(inverse(x[:n + 1]), dtype=float)
    ratio = (n_ref or mesh.N) * np.diff(t)
    return float(np.max(np.abs(ratio - 1.0)))


@dataclass(frozen=True)
class MeshReport:
    node_count: int
    quasi_constant: float
    min_step: float
    max_step: float
    admissibility_value: float
    con2_margin: float
    con2_holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def mesh_report(mesh: Mesh1D, eps: float, S: float = 4.0) -> MeshReport:
    holds, margin = liuxu_con2_check(mesh, eps, S)
    h = mesh.steps
    return MeshReport(
        node_count=int(mesh.nodes.size),
        quasi_constant=quasi_equidistance_constant(mesh),
        min_step=float(h.min()),
        max_step=float(h.max()),
        admissibility_value=liuxu_admissibility(mesh, eps),
        con2_margin=margin,
        con2_holds=holds,
    )
