"""A posteriori error control for the conservative upwind scheme.

The estimator is ``max_i h_i sqrt(1 + (D^- u_i)^2)``.  Adaptivity
equidistributes the piecewise-constant arc-length monitor
``M_i = sqrt(1 + (D^- u_i)^2)`` on cell i until the quality
``Q = N max_i h_i M_i / sum_j h_j M_j`` drops below a threshold C0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .meshes import Mesh1D, uniform_mesh
from .solver import CD, DiscreteSolution, SPProblem, error_max, solve

EQUIDISTRIBUTED = "Equidistributed"
MAX_ITER = "MaxIter"


def arc_length_monitor(solution: DiscreteSolution) -> np.ndarray:
    """Cellwise ``M_i = sqrt(1 + (D^- u_i)^2)``, i = 1..N."""
    return np.hypot(1.0, solution.backward_difference())


def kopteva_estimator(solution: DiscreteSolution) -> float:
    """``max_i h_i sqrt(1 + (D^- u_i)^2)``."""
    return float(np.max(solution.mesh.steps * arc_length_monitor(solution)))


def equidistribution_quality(mesh: Mesh1D, monitor: np.ndarray) -> float:
    """``Q = N max_i h_i M_i / sum_j h_j M_j`` (always >= 1)."""
    mass = mesh.steps * np.asarray(monitor, dtype=float)
    return float(mesh.N * mass.max() / mass.sum())


def equidistribute_monitor(mesh: Mesh1D, monitor: np.ndarray) -> Mesh1D:
    """Mesh with the same N on which the piecewise-constant `monitor` has equal cell mass.

    The cumulative monitor mass is piecewise linear in x, so inverting it
    at the levels ``k/N`` of the total is exact.
    """
    monitor = np.asarray(monitor, dtype=float)
    if monitor.shape != (mesh.N,) or np.any(monitor <= 0):
        raise InputError("monitor needs one positive value per cell")
    x = mesh.nodes
    cum = np.concatenate([[0.0], np.cumsum(mesh.steps * monitor)])
    levels = cum[-1] * np.arange(mesh.N + 1) / mesh.N
    new = np.interp(levels, cum, x)
    new[0], new[-1] = 0.0, 1.0
    return Mesh1D(new, "Equidistributed", {"N": mesh.N})


def equidistribute_step(solution: DiscreteSolution, C0: float | None = None) -> tuple[Mesh1D, float]:
    """One equidistribution step driven by the arc-length monitor of `solution`.

    Returns ``(mesh, Q)`` with Q the quality of the *input* mesh.  When `C0`
    is given and ``Q <= C0`` the input mesh is returned unchanged.
    """
    if C0 is not None and not C0 > 1:
        raise DomainError(f"C0 must exceed 1, got {C0}")
    monitor = arc_length_monitor(solution)
    Q = equidistribution_quality(solution.mesh, monitor)
    if C0 is not None and Q <= C0:
        return solution.mesh, Q
    return equidistribute_monitor(solution.mesh, monitor), Q


@dataclass(frozen=True, eq=False)
class AdaptIterate:
    mesh: Mesh1D
    solution: DiscreteSolution
    monitor: np.ndarray
    quality: float
    estimator: float
    error: float | None


@dataclass(eq=False)
class AdaptTrace:
    iterations: list[AdaptIterate] = field(default_factory=list)
    final: int = -1
    stop_reason: str = MAX_ITER
    C0: float = 2.0

    @property
    def final_iterate(self) -> AdaptIterate:
        return self.iterations[self.final]

    def rows(self) -> list[dict]:
        return [{"iter": k, "Q": it.quality, "eta": it.estimator,
                 "err": it.error} for k, it in enumerate(self.iterations)]

    def to_dict(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "final": self.final,
            "C0": self.C0,
            "iterations": [dict(row, nodes=it.mesh.nodes.tolist())
                           for row, it in zip(self.rows(), self.iterations)],
        }


def ks_adapt(problem: SPProblem, N: int, C0: float = 2.0, max_iter: int = 20,
             mesh: Mesh1D | None = None) -> AdaptTrace:
    """Solve, measure, equidistribute, repeat; stop once ``Q <= C0``.

    Starts from the uniform mesh unless `mesh` is given.  Every iterate
    (including the accepted one) is recorded; running out of iterations is
    reported through ``stop_reason`` rather than raised.
    """
    if problem.kind != CD:
        raise InputError("ks_adapt drives the upwind scheme for convection-diffusion")
    if N % 2 or N < 2:
        raise DomainError(f"N must be even, got {N}")
    if not C0 > 1:
        raise DomainError(f"C0 must exceed 1, got {C0}")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    mesh = mesh if mesh is not None else uniform_mesh(N)
    trace = AdaptTrace(C0=C0)
    for _ in range(max_iter):
        sol = solve(problem, mesh, "Upwind", conservative=True)
        monitor = arc_length_monitor(sol)
        Q = equidistribution_quality(mesh, monitor)
        err = error_max(sol) if problem.exact is not None else None
        trace.iterations.append(AdaptIterate(mesh, sol, monitor, Q,
                                             kopteva_estimator(sol), err))
        if Q <= C0:
            trace.stop_reason = EQUIDISTRIBUTED
            break
        mesh = equidistribute_monitor(mesh, monitor)
    trace.final = len(trace.iterations) - 1
    return trace


def iteration_bound(eps: float, N: int, c: float) -> int:
    """``ceil(c |ln eps| / ln N)``."""
    return math.ceil(c * abs(math.log(eps)) / math.log(N))
