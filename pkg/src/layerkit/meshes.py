"""Layer-adapted mesh generators on [0, 1].

All generators assume a boundary layer at ``x = 0`` of the form
``exp(-gamma * x / eps)``.  Layers at ``x = 1`` or at both ends are obtained
with :func:`mirror_mesh`.  Generators that cannot honour their parameters
(transition point clamped to 1/2, no tangency point, ...) return the uniform
mesh and record the reason in ``Mesh1D.flags["fallback"]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np
from scipy import integrate

from ._roots import find_root
from .errors import DomainError, Infeasible, MeshError, QuadratureFailure

FAMILIES = (
    "Uniform", "Shishkin", "SType", "BakhvalovOriginal", "BakhvalovType",
    "Gartland", "GartlandType", "DuranLombardi", "Lambert", "Sidorov",
    "EmelyanovComposite", "Equidistributed",
)
SPLIT_FAMILIES = ("Shishkin", "SType", "BakhvalovType", "EmelyanovComposite")
RECURSIVE_FAMILIES = ("Gartland", "GartlandType", "DuranLombardi")
SIDES = ("Left", "Right", "Both")

_ALIASES = {f.lower(): f for f in FAMILIES}
_ALIASES.update({
    "bakhvalov": "BakhvalovOriginal",
    "bakhvalovshishkin": "SType",
    "bs": "SType",
    "dl": "DuranLombardi",
    "emelyanov": "EmelyanovComposite",
    "equidistribution": "Equidistributed",
})


def canonical_family(name: str) -> str:
    """Map a user-facing family name (any case, ``-``/``_`` ignored) to its tag."""
    key = name.replace("-", "").replace("_", "").lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise DomainError(f"unknown mesh family {name!r}") from None


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Strictly increasing node vector with ``x_0 = 0`` and ``x_N = 1``.

    ``flags`` carries construction diagnostics (fallback reason, tau,
    measured constants); it never affects the geometry.
    """

    nodes: np.ndarray
    family: str = "Custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    flags: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise MeshError("a mesh needs at least two subintervals")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise MeshError(f"endpoints must be exactly 0 and 1, got {x[0]!r}, {x[-1]!r}")
        if not np.all(np.isfinite(x)) or not np.all(np.diff(x) > 0.0):
            raise MeshError("nodes must be finite and strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self):
        return self.nodes.size

    def __repr__(self):
        return f"Mesh1D(family={self.family!r}, N={self.N})"


def _pinned(x, family, params, **flags) -> Mesh1D:
    x = np.asarray(x, dtype=float).copy()
    x[0], x[-1] = 0.0, 1.0
    return Mesh1D(x, family, dict(params), flags)


def uniform_mesh(N: int, family: str = "Uniform", params=None, **flags) -> Mesh1D:
    return _pinned(np.linspace(0.0, 1.0, N + 1), family, params or {"N": N}, **flags)


@dataclass(frozen=True)
class MeshSpec:
    """Tagged description of one mesh family and its parameters.

    Only the fields relevant to `family` are read.  `psi` is either a
    callable ``t -> psi(t)`` already scaled for this ``N``/``theta`` or one
    of the names accepted by :func:`psi_function`.
    """

    family: str
    eps: float = 1.0
    gamma: float = 1.0
    mu: float = 2.0
    N: int = 16
    q: float = 0.5
    H: float = 0.1
    kappa: float = 1.0
    theta: float = 1.0
    psi: Callable[[float], float] | str | None = None
    layer_side: str = "Left"
    K_tilde: float = 1.0
    A: float | None = None
    B: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        side = self.layer_side.capitalize()
        if side not in SIDES:
            raise DomainError(f"layer_side must be one of {SIDES}, got {self.layer_side!r}")
        object.__setattr__(self, "layer_side", side)

    def validate(self) -> None:
        if not 0.0 < self.eps <= 1.0:
            raise DomainError(f"eps must lie in (0, 1], got {self.eps}")
        if self.gamma <= 0 or self.mu <= 0:
            raise DomainError("gamma and mu must be positive")
        if self.family not in RECURSIVE_FAMILIES:
            if int(self.N) != self.N or self.N < 2:
                raise DomainError(f"N must be an integer >= 2, got {self.N}")
            if (self.family in SPLIT_FAMILIES or self.layer_side == "Both") and (
                    self.N % 2 or self.N < 4):
                raise DomainError(f"{self.family} needs an even N >= 4, got {self.N}")
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")
        if self.family in RECURSIVE_FAMILIES and not 0.0 < self.H < 1.0:
            raise DomainError(f"H must lie in (0, 1), got {self.H}")
        if self.family == "DuranLombardi" and not 0.0 < self.kappa * self.H < 1.0:
            raise DomainError("DuranLombardi needs 0 < kappa*H < 1")
        if self.theta <= 0:
            raise DomainError("theta must be positive")

    @property
    def label(self) -> str:
        if self.family == "SType" and (self.psi is None or isinstance(self.psi, str)):
            name = _psi_key(self.psi or "bakhvalov-shishkin")
            return {"shishkin": "SType-Shishkin", "bakhvalovshishkin": "BakhvalovShishkin",
                    "polynomial": "SType-Polynomial"}[name]
        return self.family

    def params(self) -> dict:
        keys = {
            "Uniform": ("N",),
            "Shishkin": ("eps", "gamma", "mu", "N"),
            "SType": ("eps", "gamma", "mu", "N", "theta"),
            "BakhvalovOriginal": ("eps", "gamma", "mu", "N", "q"),
            "BakhvalovType": ("eps", "gamma", "mu", "N"),
            "Gartland": ("eps", "gamma", "H"),
            "GartlandType": ("eps", "gamma", "H"),
            "DuranLombardi": ("eps", "H", "kappa"),
            "Lambert": ("eps", "gamma", "mu", "N"),
            "Sidorov": ("N", "A", "B"),
            "EmelyanovComposite": ("eps", "gamma", "mu", "N"),
            "Equidistributed": ("eps", "gamma", "mu", "N", "K_tilde"),
        }[self.family]
        out = {k: getattr(self, k) for k in keys}
        if self.family == "SType":
            out["psi"] = self.psi if isinstance(self.psi, str) else (
                "bakhvalov-shishkin" if self.psi is None else "custom")
        if self.layer_side != "Left":
            out["layer_side"] = self.layer_side
        return out


# ---------------------------------------------------------------- transition points

def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")


def transition_sigma_shishkin(eps: float, gamma: float, mu: float, N: float) -> float:
    """Shishkin transition point ``min(1/2, mu*eps/gamma*ln N)``."""
    _check_positive(eps=eps, gamma=gamma, mu=mu)
    if not N >= 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return min(0.5, mu * eps / gamma * math.log(N))


def transition_sigma_bakhvalov(eps: float, gamma: float, mu: float) -> float:
    """Bakhvalov-type transition point ``min(1/2, mu*eps/gamma*ln(1/eps))``."""
    _check_positive(eps=eps, gamma=gamma, mu=mu)
    if eps >= 1.0:
        raise DomainError(f"eps must be < 1 for ln(1/eps) > 0, got {eps}")
    return min(0.5, mu * eps / gamma * math.log(1.0 / eps))


def transition_delta_veldhuizen(eps: float, k: int, N: float) -> float:
    """Veldhuizen's ``2 eps (2 + (k+1) ln N)``, clamped to 1/2."""
    _check_positive(eps=eps)
    if int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k}")
    if not N >= 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return min(0.5, 2.0 * eps * (2.0 + (k + 1) * math.log(N)))


# ---------------------------------------------------------------- S-type meshes

def _two_piece(fine: np.ndarray, sigma: float, N: int) -> np.ndarray:
    coarse = sigma + (1.0 - sigma) * np.arange(1, N // 2 + 1) / (N // 2)
    return np.concatenate([fine, coarse])


def mesh_shishkin(spec: MeshSpec) -> Mesh1D:
    """Piecewise-uniform mesh, N/2 cells on each side of the transition point."""
    spec.validate()
    N = spec.N
    sigma = transition_sigma_shishkin(spec.eps, spec.gamma, spec.mu, N)
    fine = sigma * np.arange(N // 2 + 1) / (N // 2)
    fine[-1] = sigma
    return _pinned(_two_piece(fine, sigma, N), "Shishkin", spec.params(), sigma=sigma)


def _psi_key(name: str) -> str:
    return name.replace("-", "").replace("_", "").lower()


def psi_function(name: str, N: int, theta: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Named mesh-characterizing functions, scaled so that psi(1/2) = 1/(theta*N).

    ``shishkin``            psi(t) = (theta N)^(-2t)
    ``bakhvalov-shishkin``  psi(t) = 1 - 2t (1 - 1/(theta N))
    ``polynomial``          psi(t) = 1 - (1 - 1/(theta N)) (2t)^2
    """
    m = theta * N
    key = _psi_key(name)
    if key == "shishkin":
        return lambda t: np.exp(-2.0 * np.asarray(t) * math.log(m))
    if key == "bakhvalovshishkin":
        return lambda t: 1.0 - 2.0 * np.asarray(t) * (1.0 - 1.0 / m)
    if key == "polynomial":
        return lambda t: 1.0 - (1.0 - 1.0 / m) * (2.0 * np.asarray(t)) ** 2
    raise DomainError(f"unknown psi {name!r}")


def psi_max_derivative(psi: Callable, samples: int = 10_000) -> float:
    """Max of ``|psi'|`` on [0, 1/2] from central differences on a dense grid."""
    if samples < 1000:
        raise DomainError("use at least 1000 samples")
    t = np.linspace(0.0, 0.5, samples + 1)
    d = 1e-7
    tp, tm = np.minimum(t + d, 0.5), np.maximum(t - d, 0.0)
    vals = (np.asarray(psi(tp), dtype=float) - np.asarray(psi(tm), dtype=float)) / (tp - tm)
    return float(np.max(np.abs(vals)))


def mesh_stype(spec: MeshSpec) -> Mesh1D:
    """S-type mesh ``x_i = -(mu eps/gamma) ln psi(i/N)`` on the fine half.

    Falls back to the uniform mesh (flag ``sigma>=1/2``) when the
    transition point ``(mu eps/gamma) ln(theta N)`` does not lie below 1/2.
    """
    spec.validate()
    N = spec.N
    a = spec.mu * spec.eps / spec.gamma
    sigma = a * math.log(spec.theta * N)
    params = spec.params()
    if sigma >= 0.5:
        return uniform_mesh(N, "SType", params, fallback="sigma>=1/2", sigma=sigma)
    psi = spec.psi if callable(spec.psi) else psi_function(
        spec.psi or "bakhvalov-shishkin", N, spec.theta)
    t = np.arange(N // 2 + 1) / N
    values = np.asarray(psi(t), dtype=float)
    end = 1.0 / (spec.theta * N)
    if abs(values[0] - 1.0) > 1e-12 or abs(values[-1] - end) > 1e-9 * end:
        raise DomainError("psi must satisfy psi(0) = 1 and psi(1/2) = 1/(theta N)")
    if np.any(np.diff(values) >= 0):
        raise DomainError("psi must be strictly decreasing")
    fine = -a * np.log(values)
    fine[0], fine[-1] = 0.0, sigma
    return _pinned(_two_piece(fine, sigma, N), "SType", params, sigma=sigma)


# ---------------------------------------------------------------- Bakhvalov meshes

def _bakhvalov_gap(a: float, q: float) -> float:
    """Solve for ``d = q - tau`` in the C1 matching condition.

    With ``phi(t) = -a ln((q - t)/q)`` the condition
    ``phi'(tau)(1 - tau) = 1 - phi(tau)`` becomes
    ``a (1 - q + d)/d - 1 - a ln(d/q) = 0``, decreasing in d.
    Working in d keeps full relative precision when tau is close to q.
    """
    def g(d):
        return a * (1.0 - q + d) / d - 1.0 - a * math.log(d / q)

    lo = a * (1.0 - q)
    while g(lo) <= 0.0:
        lo *= 0.5
    return find_root(g, lo, q, rtol=1e-15)


def mesh_bakhvalov_original(spec: MeshSpec) -> tuple[Mesh1D, float | None]:
    """Bakhvalov's C1 mesh: logarithmic up to tau, tangent line to (1, 1) after.

    Returns ``(mesh, tau)``; ``tau`` is None (uniform mesh, flag
    ``NoTangency``) when ``mu eps/gamma >= q``.
    """
    spec.validate()
    N, q = spec.N, spec.q
    a = spec.mu * spec.eps / spec.gamma
    params = spec.params()
    if a >= q:
        return uniform_mesh(N, "BakhvalovOriginal", params, fallback="NoTangency"), None
    d = _bakhvalov_gap(a, q)
    tau = q - d
    phi_tau = -a * math.log(d / q)
    slope = (1.0 - phi_tau) / (1.0 - q + d)
    t = np.arange(N + 1) / N
    x = np.empty_like(t)
    inner = t <= tau
    x[inner] = -a * np.log((q - t[inner]) / q)
    x[~inner] = phi_tau + slope * ((t[~inner] - q) + d)
    mesh = _pinned(x, "BakhvalovOriginal", params, tau=tau, tau_gap=d,
                   phi_tau=phi_tau, slope=slope)
    return mesh, tau


def bakhvalov_original_inverse(mesh: Mesh1D, x: np.ndarray) -> np.ndarray:
    """Inverse mesh-generating function ``t = phi^{-1}(x)`` of a Bakhvalov mesh."""
    p, f = mesh.params, mesh.flags
    if "tau" not in f:
        return np.asarray(x, dtype=float)
    a = p["mu"] * p["eps"] / p["gamma"]
    q = p["q"]
    x = np.asarray(x, dtype=float)
    return np.where(x <= f["phi_tau"], q * (-np.expm1(-x / a)),
                    f["tau"] + (x - f["phi_tau"]) / f["slope"])


def mesh_bakhvalov_type(spec: MeshSpec) -> Mesh1D:
    """Bakhvalov-type mesh ``x_i = -(mu eps/gamma) ln(1 - 2(1-eps) i/N)``, i <= N/2."""
    spec.validate()
    N = spec.N
    if spec.eps >= 1.0:
        raise DomainError("BakhvalovType needs eps < 1")
    sigma = transition_sigma_bakhvalov(spec.eps, spec.gamma, spec.mu)
    params = spec.params()
    if sigma >= 0.5:
        return uniform_mesh(N, "BakhvalovType", params, fallback="sigma*=1/2", sigma=sigma)
    a = spec.mu * spec.eps / spec.gamma
    i = np.arange(N // 2 + 1)
    fine = -a * np.log1p(-2.0 * (1.0 - spec.eps) * i / N)
    fine[-1] = sigma
    return _pinned(_two_piece(fine, sigma, N), "BakhvalovType", params, sigma=sigma)


def bakhvalov_type_inverse(mesh: Mesh1D, x: np.ndarray) -> np.ndarray:
    """Inverse ``t(x)`` of the fine-part generating function of a Bakhvalov-type mesh."""
    p = mesh.params
    a = p["mu"] * p["eps"] / p["gamma"]
    return -np.expm1(-np.asarray(x, dtype=float) / a) / (2.0 * (1.0 - p["eps"]))


# ---------------------------------------------------------------- recursive meshes

def _close_recursion(x: list[float], h_next: float, variant: str) -> list[float]:
    """Finish a recursive mesh whose next step ``h_next`` would pass 1.

    The remainder becomes the last cell unless it is shorter than half the
    would-be step; then it is merged with the previous cell and the merged
    span is re-split 2:3, so adjacent steps still differ by at most a factor
    e and no step exceeds the recursion's cap H.
    """
    r = 1.0 - x[-1]
    if r >= 0.5 * h_next or len(x) < 3:
        return x + [1.0]
    if variant in ("Gartland", "GartlandType"):
        span = 1.0 - x[-2]
        return x[:-1] + [x[-2] + 0.4 * span, 1.0]
    return x[:-1] + [1.0]


def mesh_gartland(eps: float, gamma: float, H: float, variant: str = "Gartland") -> Mesh1D:
    """Gartland's graded mesh.

    ``x_1 = eps H`` and ``h_i = min(H, eps H exp(gamma x_i/(2 eps)), e h_{i-1})``;
    ``variant="GartlandType"`` drops the ``e h_{i-1}`` term.
    """
    if variant not in ("Gartland", "GartlandType"):
        raise DomainError(f"unknown Gartland variant {variant!r}")
    _check_positive(eps=eps, gamma=gamma, H=H)
    if H >= 1.0 or eps * H >= 1.0:
        raise DomainError("Gartland meshes need 0 < H < 1 and eps*H < 1")
    x = [0.0, eps * H]
    h_prev = eps * H
    cap = math.e if variant == "Gartland" else math.inf
    while True:
        expo = gamma * x[-1] / (2.0 * eps)
        graded = eps * H * math.exp(expo) if expo < 700 else math.inf
        h = min(H, graded, cap * h_prev)
        if x[-1] + h >= 1.0:
            x = _close_recursion(x, h, variant)
            break
        x.append(x[-1] + h)
        h_prev = h
    return _pinned(x, variant, {"eps": eps, "gamma": gamma, "H": H})


def mesh_duran_lombardi(eps: float, H: float, kappa: float = 1.0) -> Mesh1D:
    """Duran-Lombardi mesh: uniform ``i kappa H eps`` zone, then ``x_{i+1} = x_i (1 + kappa H)``.

    Terminates at the first ``x_{M-1}`` with ``x_{M-1}(1 + kappa H) >= 1`` and
    sets ``x_M = 1``; a last cell shorter than half of ``kappa H x_{M-1}`` is
    merged into its neighbour.
    """
    _check_positive(eps=eps, H=H, kappa=kappa)
    kh = kappa * H
    if kh >= 1.0 or eps >= 1.0:
        raise DomainError("DuranLombardi needs kappa*H < 1 and eps < 1")
    n_uniform = int(math.floor(1.0 / kh)) + 1
    x = [i * kh * eps for i in range(n_uniform + 1)]
    if x[-1] >= 1.0:
        x = [v for v in x if v < 1.0]
        return _pinned(x + [1.0], "DuranLombardi", {"eps": eps, "H": H, "kappa": kappa})
    while x[-1] + kh * x[-1] < 1.0:
        x.append(x[-1] * (1.0 + kh))
    if 1.0 - x[-1] < 0.5 * kh * x[-1] and len(x) > 2:
        x.pop()
    return _pinned(x + [1.0], "DuranLombardi", {"eps": eps, "H": H, "kappa": kappa})


# ---------------------------------------------------------------- Lambert mesh

def mesh_lambert(spec: MeshSpec) -> Mesh1D:
    """Mesh from the implicit function ``xi - exp(-gamma xi/(mu eps)) + 1 - 2t = 0``.

    Nodes are ``xi(i/N)`` rescaled by ``xi(1)`` so the last node is 1.
    """
    spec.validate()
    N = spec.N
    a = spec.mu * spec.eps / spec.gamma
    xi = np.zeros(N + 1)
    for i in range(1, N + 1):
        rhs = 1.0 - 2.0 * i / N
        xi[i] = find_root(lambda s: s - math.exp(-s / a) + rhs, 0.0, 2.0)
    x = xi / xi[-1]
    return _pinned(x, "Lambert", spec.params(), xi_end=float(xi[-1]))


# ---------------------------------------------------------------- Sidorov meshes

def sidorov_functional(h: np.ndarray) -> float:
    h = np.asarray(h, dtype=float)
    return float(np.sum((h[1:] / h[:-1] - 1.0) ** 2))


def _sidorov_derivatives(h: np.ndarray):
    r = h[1:] / h[:-1] - 1.0
    n = h.size
    grad = np.zeros(n)
    grad[1:] += 2.0 * r / h[:-1]
    grad[:-1] -= 2.0 * r * h[1:] / h[:-1] ** 2
    # r_i depends on (h_i, h_{i+1}); assemble 2 (J^T J + sum r_i Hess r_i)
    hess = np.zeros((n, n))
    for i in range(n - 1):
        dr = np.array([-h[i + 1] / h[i] ** 2, 1.0 / h[i]])
        d2 = np.array([[2.0 * h[i + 1] / h[i] ** 3, -1.0 / h[i] ** 2],
                       [-1.0 / h[i] ** 2, 0.0]])
        hess[i:i + 2, i:i + 2] += 2.0 * (np.outer(dr, dr) + r[i] * d2)
    return grad, hess


def mesh_sidorov(N: int, A: float, B: float, length: float = 1.0,
                 tol: float = 1e-13, max_iter: int = 200) -> Mesh1D:
    """Minimize ``sum (h_{i+1}/h_i - 1)^2`` with ``h_1 = A``, ``h_N = B``, ``sum h = length``.

    Null-space Newton on the interior steps from a geometric progression
    rescaled onto the constraint; backtracking keeps all steps positive.
    `length` other than 1 returns the unscaled steps in ``flags["steps"]``
    (used by the composite mesh); the Mesh1D itself is always on [0, 1].
    """
    if int(N) != N or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N}")
    _check_positive(A=A, B=B)
    N = int(N)
    if N == 2:
        if abs(A + B - length) > 1e-12 * length:
            raise Infeasible("N = 2 needs A + B = length")
        h = np.array([A, B])
    else:
        interior = length - A - B
        if interior <= 0.0:
            raise Infeasible(f"A + B = {A + B} leaves no room for {N - 2} interior steps")
        h = A * (B / A) ** (np.arange(N) / (N - 1))
        h[1:-1] *= interior / h[1:-1].sum()
        h[0], h[-1] = A, B
        h = _sidorov_newton(h, tol, max_iter)
    steps = h.copy()
    x = np.concatenate([[0.0], np.cumsum(h)]) / length
    diff = np.max(np.abs(np.diff(h))) / length if N > 2 else 0.0
    return _pinned(x, "Sidorov", {"N": N, "A": A, "B": B},
                   functional=sidorov_functional(h), diff_constant=diff * N ** 2,
                   steps=steps)


def _sidorov_newton(h: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    n = h.size - 2
    ones = np.ones(n)
    P = np.eye(n) - np.outer(ones, ones) / n
    f = sidorov_functional(h)
    for _ in range(max_iter):
        grad, hess = _sidorov_derivatives(h)
        g, Hm = grad[1:-1], hess[1:-1, 1:-1]
        pg = P @ g
        if np.max(np.abs(pg * h[1:-1])) < tol:
            break
        # KKT system for the equality-constrained step, Levenberg shift if indefinite
        shift = 0.0
        while True:
            K = np.zeros((n + 1, n + 1))
            K[:n, :n] = Hm + shift * np.eye(n)
            K[:n, n] = K[n, :n] = 1.0
            try:
                p = np.linalg.solve(K, np.concatenate([-g, [0.0]]))[:n]
            except np.linalg.LinAlgError:
                p = None
            if p is not None and g @ p < 0:
                break
            shift = max(2.0 * shift, 1e-8 * (1.0 + np.abs(np.diag(Hm)).max()))
        p -= p.mean()
        step = 1.0
        neg = p < 0
        if np.any(neg):
            step = min(1.0, 0.9 * np.min(-h[1:-1][neg] / p[neg]))
        while step > 1e-16:
            trial = h.copy()
            trial[1:-1] += step * p
            ft = sidorov_functional(trial)
            if ft <= f + 1e-4 * step * (g @ p):
                break
            step *= 0.5
        else:
            break
        h, f = trial, ft
    return h


def mesh_emelyanov_composite(eps: float, gamma: float, N: int, mu: float = 2.0) -> Mesh1D:
    """Sidorov mesh on the layer ``[0, sigma*]`` joined to a smoothly graded coarse part.

    Fine part: N/2 Sidorov-optimal steps starting at ``2 mu eps/(gamma N)``
    and ending at the last step of the geometric progression that fills
    ``[0, sigma*]``.  Coarse part: N/2 Sidorov-optimal steps from
    ``(1 - sigma*)/N`` to ``3 (1 - sigma*)/N``, so coarse steps are O(1/N)
    with O(1/N^2) differences.  Uniform (flag) when no such split exists,
    in particular when ``sigma* = 1/2``.
    """
    if N % 2 or N < 4:
        raise DomainError(f"EmelyanovComposite needs an even N >= 4, got {N}")
    params = {"eps": eps, "gamma": gamma, "mu": mu, "N": N}
    if eps >= 1.0:
        return uniform_mesh(N, "EmelyanovComposite", params, fallback="sigma*=1/2")
    sigma = transition_sigma_bakhvalov(eps, gamma, mu)
    if sigma >= 0.5:
        return uniform_mesh(N, "EmelyanovComposite", params, fallback="sigma*=1/2",
                            sigma=sigma)
    n = N // 2
    first = 2.0 * mu * eps / (gamma * N)
    if first * n >= sigma:
        return uniform_mesh(N, "EmelyanovComposite", params, fallback="infeasible split",
                            sigma=sigma)
    # ratio r of the geometric progression first * r^k, k < n, summing to sigma
    log_r = find_root(lambda z: first * math.expm1(n * z) / math.expm1(z) - sigma,
                      1e-12, math.log(sigma / first) / (n - 1))
    junction = first * math.exp((n - 1) * log_r)
    fine = mesh_sidorov(n, first, junction, length=sigma).flags["steps"]
    coarse = mesh_sidorov(n, (1.0 - sigma) / N, 3.0 * (1.0 - sigma) / N,
                          length=1.0 - sigma).flags["steps"]
    x = np.concatenate([[0.0], np.cumsum(fine), sigma + np.cumsum(coarse)])
    x[n] = sigma
    return _pinned(x, "EmelyanovComposite", params, sigma=sigma,
                   coarse_max_step_N=float(coarse.max() * N),
                   coarse_diff_N2=float(np.max(np.abs(np.diff(coarse))) * N ** 2),
                   fine_diff_N2=float(np.max(np.abs(np.diff(fine))) * N ** 2))


# ---------------------------------------------------------------- equidistribution

@dataclass(frozen=True)
class MonitorFn:
    """Positive monitor function with optional kinks passed to the quadrature."""

    evaluate: Callable[[float], float]
    breakpoints: tuple = ()

    def __call__(self, s):
        return self.evaluate(s)


def bakhvalov_monitor(eps: float, gamma: float, mu: float, K_tilde: float = 1.0) -> MonitorFn:
    """``M(s) = max(1, K gamma/eps exp(-gamma s/(mu eps)))``."""
    _check_positive(eps=eps, gamma=gamma, mu=mu, K_tilde=K_tilde)
    peak = K_tilde * gamma / eps

    def M(s):
        return max(1.0, peak * math.exp(-gamma * s / (mu * eps)))

    kink = mu * eps / gamma * math.log(peak) if peak > 1.0 else None
    return MonitorFn(M, (kink,) if kink is not None and 0.0 < kink < 1.0 else ())


def _quad(f, a, b, points):
    pts = [p for p in points if a < p < b]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, points=pts or None, limit=500,
                                      epsabs=1e-15, epsrel=1e-13)
    except (integrate.IntegrationWarning, ArithmeticError, ValueError) as exc:
        raise QuadratureFailure(str(exc)) from exc
    if not math.isfinite(val):
        raise QuadratureFailure("non-finite monitor integral")
    return val


def equidistribute_analytic(monitor, N: int, tol: float = 1e-10) -> Mesh1D:
    """Nodes with equal monitor mass ``int_{x_{i-1}}^{x_i} M = (1/N) int_0^1 M``.

    Each node is found by bracketed root finding on the cumulative integral
    starting from the previous node.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    if not isinstance(monitor, MonitorFn):
        monitor = MonitorFn(monitor)
    points = tuple(monitor.breakpoints)
    probe = np.linspace(0.0, 1.0, 257)
    if min(monitor(s) for s in probe) <= 0.0:
        raise DomainError("monitor must be positive")
    total = _quad(monitor, 0.0, 1.0, points)
    target = total / N
    x = [0.0]
    for _ in range(N - 1):
        a = x[-1]
        x.append(find_root(lambda y: _quad(monitor, a, y, points) - target,
                           a, 1.0, rtol=min(tol, 1e-12)))
    x.append(1.0)
    return _pinned(x, "Equidistributed", {"N": N}, monitor_total=total)


# ---------------------------------------------------------------- orientation

def mirror_mesh(mesh: Mesh1D, side: str) -> Mesh1D:
    """Reorient a layer-at-0 mesh.

    ``Left`` returns the mesh itself; ``Right`` maps ``x -> 1 - x`` (mirroring
    a mirrored mesh returns its source exactly); ``Both`` compresses the mesh
    onto [0, 1/2] and reflects it onto [1/2, 1], doubling the cell count.
    """
    side = side.capitalize()
    if side == "Left":
        return mesh
    if side == "Right":
        source = mesh.flags.get("mirror_of")
        if source is not None:
            return source
        x = 1.0 - mesh.nodes[::-1]
        return _pinned(x, mesh.family, {**mesh.params, "layer_side": "Right"},
                       mirror_of=mesh)
    if side == "Both":
        half = 0.5 * mesh.nodes
        x = np.concatenate([half, 1.0 - half[-2::-1]])
        x[mesh.N] = 0.5
        return _pinned(x, mesh.family, {**mesh.params, "layer_side": "Both"})
    raise DomainError(f"side must be one of {SIDES}, got {side!r}")


# ---------------------------------------------------------------- dispatcher

def _generate(spec: MeshSpec) -> Mesh1D:
    fam = spec.family
    if fam == "Uniform":
        spec.validate()
        return uniform_mesh(spec.N)
    if fam == "Shishkin":
        return mesh_shishkin(spec)
    if fam == "SType":
        mesh = mesh_stype(spec)
        return replace(mesh, family=spec.label) if mesh.family != spec.label else mesh
    if fam == "BakhvalovOriginal":
        return mesh_bakhvalov_original(spec)[0]
    if fam == "BakhvalovType":
        return mesh_bakhvalov_type(spec)
    if fam in ("Gartland", "GartlandType"):
        spec.validate()
        return mesh_gartland(spec.eps, spec.gamma, spec.H, fam)
    if fam == "DuranLombardi":
        spec.validate()
        return mesh_duran_lombardi(spec.eps, spec.H, spec.kappa)
    if fam == "Lambert":
        return mesh_lambert(spec)
    if fam == "Sidorov":
        spec.validate()
        A = spec.A if spec.A is not None else 1.0 / spec.N
        B = spec.B if spec.B is not None else 1.0 / spec.N
        return mesh_sidorov(spec.N, A, B)
    if fam == "EmelyanovComposite":
        spec.validate()
        return mesh_emelyanov_composite(spec.eps, spec.gamma, spec.N, spec.mu)
    if fam == "Equidistributed":
        spec.validate()
        mesh = equidistribute_analytic(
            bakhvalov_monitor(spec.eps, spec.gamma, spec.mu, spec.K_tilde), spec.N)
        return replace(mesh, params=spec.params())
    raise DomainError(f"unsupported family {fam!r}")


def build_mesh(spec: MeshSpec) -> Mesh1D:
    """Generate the mesh described by `spec`, honouring ``layer_side``.

    For ``Both`` the family is generated on a half domain (``eps -> 2 eps``,
    ``N -> N/2``) and reflected, so the total cell count stays ``N``.
    """
    spec.validate()
    if spec.layer_side == "Both":
        if spec.family in RECURSIVE_FAMILIES:
            half = _generate(replace(spec, eps=min(1.0, 2.0 * spec.eps), layer_side="Left"))
        else:
            half = _generate(replace(spec, eps=min(1.0, 2.0 * spec.eps), N=spec.N // 2,
                                     layer_side="Left"))
        both = mirror_mesh(half, "Both")
        return replace(both, params=spec.params())
    mesh = _generate(spec)
    return mirror_mesh(mesh, spec.layer_side)
