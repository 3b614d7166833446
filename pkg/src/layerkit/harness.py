"""Convergence sweeps over (family, scheme, eps, N), rate estimation and the
Duran-Lombardi robustness study.

Grid cells are independent; they may run on a thread pool (size capped by
the ``LAYERKIT_THREADS`` environment variable) and are always sorted by
(family, scheme, eps, N) before they are reported.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, InputError, LayerkitError
from .meshes import RECURSIVE_FAMILIES, MeshSpec, build_mesh, mesh_duran_lombardi
from .solver import (CD, RD, SPProblem, canonical_kind, canonical_scheme, error_energy,
                     error_max, manufactured_problem, solve)

RATE_MODELS = ("PlainPower", "LogFactor")
NORMS = ("max", "energy")
CSV_HEADER = ("family", "scheme", "eps", "N", "error", "constant", "rate")
DEFAULT_EPS = (1e-2, 1e-4, 1e-6, 1e-8)
DEFAULT_N = (64, 128, 256, 512, 1024)


def default_rate_model(family: str) -> str:
    return "LogFactor" if family == "Shishkin" else "PlainPower"


def model_factor(N: float, model: str) -> float:
    """Error model ``N^-1`` (PlainPower) or ``N^-1 ln N`` (LogFactor)."""
    if model == "PlainPower":
        return 1.0 / N
    if model == "LogFactor":
        return math.log(N) / N
    raise DomainError(f"rate model must be one of {RATE_MODELS}, got {model!r}")


def rate_estimate(errors: Sequence[float], model: str = "PlainPower",
                  Ns: Sequence[float] | None = None) -> list[float]:
    """Observed orders between consecutive entries of `errors`.

    Without `Ns` the entries are taken at doubling N and the rates are
    ``log2(e_N / e_2N)``.  With `Ns` the rate is
    ``ln(e_1/e_2) / ln(N_2/N_1)``.  The LogFactor model first divides each
    error by ``ln N`` (so it needs `Ns`).  A zero or non-finite error gives
    ``nan`` for the affected pairs.
    """
    if model not in RATE_MODELS:
        raise DomainError(f"rate model must be one of {RATE_MODELS}, got {model!r}")
    e = np.asarray(errors, dtype=float)
    if Ns is None:
        if model == "LogFactor":
            raise InputError("the LogFactor model needs the N values")
        Ns = 2.0 ** np.arange(e.size)
    n = np.asarray(Ns, dtype=float)
    if n.shape != e.shape:
        raise InputError("errors and Ns differ in length")
    if model == "LogFactor":
        e = e / np.log(n)
    rates = []
    for k in range(e.size - 1):
        a, b = e[k], e[k + 1]
        if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
            rates.append(math.nan)
        else:
            rates.append(math.log(a / b) / math.log(n[k + 1] / n[k]))
    return rates


@dataclass(frozen=True)
class StudyConfig:
    """Grid of a convergence study.

    `meshes` holds MeshSpec keyword templates without ``eps``/``N``; for the
    recursive families ``H = H_N / N``.  `rate_model` None picks the
    per-family default.
    """

    problem: str = "cd"
    gamma: float = 1.0
    eps_values: tuple = DEFAULT_EPS
    N_values: tuple = DEFAULT_N
    meshes: tuple = ({"family": "Shishkin"},)
    schemes: tuple = ("Upwind",)
    norms: tuple = ("max",)
    rate_model: str | None = None
    conservative: bool = False
    H_N: float = 16.0
    csv_path: str | None = None
    json_path: str | None = None
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "problem", canonical_kind(self.problem))
        for name in ("eps_values", "N_values", "meshes", "schemes", "norms"):
            value = tuple(getattr(self, name))
            if not value:
                raise InputError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        if len(set(self.eps_values)) != len(self.eps_values):
            raise InputError("eps values must be distinct")
        object.__setattr__(self, "schemes", tuple(canonical_scheme(s) for s in self.schemes))
        for norm in self.norms:
            if norm not in NORMS:
                raise InputError(f"norm must be one of {NORMS}, got {norm!r}")
        if self.rate_model is not None and self.rate_model not in RATE_MODELS:
            raise InputError(f"rate model must be one of {RATE_MODELS}")
        for s in self.schemes:
            if (s == "Upwind" and self.problem != CD) or (s == "Central" and self.problem != RD):
                raise InputError(f"scheme {s} does not apply to {self.problem}")
        for tpl in self.meshes:
            if "family" not in tpl or {"eps", "N"} & set(tpl):
                raise InputError("mesh templates need 'family' and must not fix eps or N")

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        keys = {"problem": "problem", "gamma": "gamma", "eps": "eps_values",
                "eps_values": "eps_values", "N": "N_values", "N_values": "N_values",
                "meshes": "meshes", "schemes": "schemes", "norms": "norms",
                "rate_model": "rate_model", "conservative": "conservative",
                "H_N": "H_N", "csv": "csv_path", "json": "json_path", "threads": "threads"}
        unknown = set(data) - set(keys)
        if unknown:
            raise InputError(f"unknown study config keys: {sorted(unknown)}")
        kw = {keys[k]: v for k, v in data.items()}
        for k in ("eps_values", "N_values", "meshes", "schemes", "norms"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)

    def spec(self, template: dict, eps: float, N: int) -> MeshSpec:
        kw = dict(template)
        if self.problem == RD:
            kw.setdefault("layer_side", "Both")
        kw.setdefault("gamma", self.gamma)
        spec = MeshSpec(eps=eps, N=N, **kw)
        if spec.family in RECURSIVE_FAMILIES:
            spec = replace(spec, H=self.H_N / N)
        return spec


@dataclass(frozen=True)
class StudyRow:
    family: str
    scheme: str
    norm: str
    eps: float
    N: int
    cells: int | None
    error: float
    constant: float
    rate: float
    model: str
    failure: str | None = None

    @property
    def scheme_tag(self) -> str:
        return self.scheme if self.norm == "max" else f"{self.scheme}:{self.norm}"

    def key(self):
        return (self.family, self.scheme_tag, self.eps, self.N)


@dataclass
class ConvergenceReport:
    rows: list[StudyRow]
    uniform_constant: dict = field(default_factory=dict)

    def select(self, family=None, scheme=None, norm=None, eps=None) -> list[StudyRow]:
        return [r for r in self.rows
                if (family is None or r.family == family)
                and (scheme is None or r.scheme == scheme)
                and (norm is None or r.norm == norm)
                and (eps is None or r.eps == eps)]

    def to_csv(self) -> str:
        lines = [",".join(CSV_HEADER)]
        for r in self.rows:
            lines.append(",".join([r.family, r.scheme_tag, _g(r.eps), str(r.N),
                                   _g(r.error), _g(r.constant), _g(r.rate)]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "uniform_constant": [{"family": f, "scheme": s, "N": n, "constant": c}
                                 for (f, s, n), c in sorted(self.uniform_constant.items())],
        }


def _g(v) -> str:
    return format(float(v), ".17g")


def _threads(requested: int | None, tasks: int) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("LAYERKIT_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InputError(f"LAYERKIT_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, tasks))


def run_parallel(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    workers = _threads(threads, len(items))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _problem(kind: str, eps: float, gamma: float) -> SPProblem:
    return manufactured_problem(kind, eps, gamma)


def _run_cell(config: StudyConfig, template: dict, scheme: str, eps: float, N: int):
    """Errors for every configured norm on one grid cell, or a failure string."""
    spec = config.spec(template, eps, N)
    label = spec.label
    try:
        mesh = build_mesh(spec)
        sol = solve(_problem(config.problem, eps, config.gamma), mesh, scheme,
                    conservative=config.conservative)
        errs = {}
        for norm in config.norms:
            errs[norm] = error_max(sol) if norm == "max" else error_energy(sol)
        return label, mesh.N, errs, None
    except (LayerkitError, ArithmeticError, ValueError) as exc:
        return label, None, {}, f"{type(exc).__name__}: {exc}"


def convergence_study(config: StudyConfig) -> ConvergenceReport:
    """Run the configured sweep and estimate rates along N.

    A failing cell yields a row with ``error = nan`` and the exception text
    in ``failure``; the sweep continues.
    """
    N_values = sorted(set(int(n) for n in config.N_values))
    tasks = [(tpl, scheme, eps, N) for tpl in config.meshes for scheme in config.schemes
             for eps in config.eps_values for N in N_values]
    results = run_parallel(lambda t: _run_cell(config, *t), tasks, config.threads)
    rows: list[StudyRow] = []
    by_series: dict = {}
    for (tpl, scheme, eps, N), (label, cells, errs, failure) in zip(tasks, results):
        for norm in config.norms:
            by_series.setdefault((label, scheme, norm, eps), []).append(
                (N, cells, errs.get(norm, math.nan), failure))
    for (label, scheme, norm, eps), series in by_series.items():
        model = config.rate_model or default_rate_model(label)
        counts = [c if c is not None else n for n, c, _, _ in series]
        errors = [e for _, _, e, _ in series]
        rates = [math.nan] + rate_estimate(errors, model, counts) if len(series) > 1 else [math.nan]
        for (N, cells, err, failure), count, rate in zip(series, counts, rates):
            const = err / model_factor(count, model) if math.isfinite(err) else math.nan
            rows.append(StudyRow(label, scheme, norm, float(eps), N, cells, err, const,
                                 rate, model, failure))
    rows.sort(key=StudyRow.key)
    uniform: dict = {}
    for r in rows:
        k = (r.family, r.scheme_tag, r.N)
        if math.isfinite(r.constant):
            uniform[k] = max(uniform.get(k, -math.inf), r.constant)
    report = ConvergenceReport(rows, uniform)
    _emit(report, config)
    return report


def _emit(report: ConvergenceReport, config: StudyConfig) -> None:
    import json

    if config.csv_path:
        with open(config.csv_path, "w", newline="\n") as fh:
            fh.write(report.to_csv())
    if config.json_path:
        with open(config.json_path, "w", newline="\n") as fh:
            json.dump(report.to_dict(), fh, indent=1, allow_nan=True)
            fh.write("\n")


# ---------------------------------------------------------------- robustness

EPS_STAR_FACTORS = (0.25, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class RobustnessRow:
    eps: float
    factor: float
    eps_star: float
    cells: int
    error: float


@dataclass
class RobustnessTable:
    rows: list[RobustnessRow]

    def errors(self, eps: float) -> dict[float, float]:
        return {r.factor: r.error for r in self.rows if r.eps == eps}

    def best_factor(self, eps: float) -> float:
        errs = self.errors(eps)
        return min(errs, key=errs.get)

    def summary(self) -> list[dict]:
        out = []
        for eps in sorted({r.eps for r in self.rows}, reverse=True):
            best = self.best_factor(eps)
            out.append({"eps": eps, "best_factor": best, "min_at_or_below_eps": best <= 1.0,
                        "min_error": self.errors(eps)[best]})
        return out

    def to_csv(self) -> str:
        lines = ["eps,eps_star_factor,eps_star,N,error"]
        for r in self.rows:
            lines.append(",".join([_g(r.eps), _g(r.factor), _g(r.eps_star), str(r.cells),
                                   _g(r.error)]))
        return "\n".join(lines) + "\n"


def dl_robustness_study(eps_values: Iterable[float], H: float, kappa: float = 1.0,
                        problem: Callable[[float], SPProblem] | None = None,
                        factors: Sequence[float] = EPS_STAR_FACTORS,
                        threads: int | None = None) -> RobustnessTable:
    """Solve with upwind on Duran-Lombardi meshes built for ``eps* = factor * eps``.

    `problem` maps the true eps to a convection-diffusion problem with an
    exact solution (default: the manufactured problem with gamma = 1).
    """
    make = problem or (lambda e: manufactured_problem("cd", e))
    tasks = [(float(e), float(f)) for e in eps_values for f in factors]

    def cell(task):
        eps, factor = task
        star = min(factor * eps, 0.999)
        mesh = mesh_duran_lombardi(star, H, kappa)
        return RobustnessRow(eps, factor, star, mesh.N, error_max(solve(make(eps), mesh)))

    rows = run_parallel(cell, tasks, threads)
    rows.sort(key=lambda r: (-r.eps, r.factor))
    return RobustnessTable(rows)
