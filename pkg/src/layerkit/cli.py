"""Command line interface: ``layerkit {mesh,solve,study,adapt,check}``.

Every subcommand accepts ``--config FILE`` with a JSON object whose keys are
the long option names (dashes or underscores); explicit flags win.  Exit
codes: 0 success, 1 input error (including bad flags), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .adapt import ks_adapt
from .diagnostics import liuxu_con2_check, mesh_report
from .errors import InputError, NumericalError
from .harness import StudyConfig, convergence_study
from .io import (dumps, mesh_to_csv, mesh_to_json, read_mesh,
                 solution_to_csv, solution_to_dict, write_text)
from .meshes import MeshSpec, build_mesh
from .solver import CD, canonical_kind, manufactured_problem, solve

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

MESH_DEFAULTS = {"family": None, "eps": 1.0, "gamma": 1.0, "mu": 2.0, "N": 16, "q": 0.5,
                 "H": 0.1, "kappa": 1.0, "theta": 1.0, "psi": None, "layer_side": "Left",
                 "K_tilde": 1.0, "A": None, "B": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_mesh_flags(p: argparse.ArgumentParser, with_family: bool = True) -> None:
    if with_family:
        p.add_argument("--family", help="mesh family, e.g. shishkin, bakhvalov-type, bs, dl")
    p.add_argument("--eps", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--H", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--psi", help="shishkin, bakhvalov-shishkin or polynomial")
    p.add_argument("--layer-side", dest="layer_side", choices=["Left", "Right", "Both"])
    p.add_argument("--K-tilde", dest="K_tilde", type=float)
    p.add_argument("--A", type=float)
    p.add_argument("--B", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="layerkit", description="Layer-adapted meshes for singularly "
                     "perturbed two-point problems.")
    parser.add_argument("--version", action="version", version=f"layerkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a mesh")
    _add_mesh_flags(p)
    p.add_argument("--out", help="'-', 'json', 'csv' or a file path (.json/.csv)")
    p.add_argument("--config")

    p = sub.add_parser("solve", help="solve a manufactured problem on a mesh")
    p.add_argument("--problem", choices=["cd", "rd"])
    p.add_argument("--mesh", help="mesh file or family spec 'family[:key=value,...]'")
    p.add_argument("--scheme", choices=["upwind", "central", "fem"])
    p.add_argument("--conservative", action="store_true", default=None)
    _add_mesh_flags(p)
    p.add_argument("--out", help="'-', 'json', 'csv' or a file path")
    p.add_argument("--config")

    p = sub.add_parser("study", help="run a convergence study")
    p.add_argument("--config", help="study configuration JSON")
    p.add_argument("--csv", help="CSV output path ('-' for stdout)")
    p.add_argument("--json", help="JSON output path")
    p.add_argument("--threads", type=int)

    p = sub.add_parser("adapt", help="run the equidistribution loop")
    p.add_argument("--eps", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--C0", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--out", help="JSON trace destination ('-' for stdout)")
    p.add_argument("--csv", help="per-iteration CSV path")
    p.add_argument("--config")

    p = sub.add_parser("check", help="report mesh diagnostics")
    p.add_argument("--mesh")
    p.add_argument("--eps", type=float)
    p.add_argument("--S", type=float)
    p.add_argument("--n-ref", dest="n_ref", type=float)
    p.add_argument("--out", help="'-', 'json', 'csv' or a file path")
    p.add_argument("--config")
    return parser


def _load_config(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid config JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    if args.command == "study":
        args.study = data
        return
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest == "K_tilde" or dest.lower() == "k_tilde":
            dest = "K_tilde"
        if not hasattr(args, dest):
            raise InputError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _mesh_spec(args, **overrides) -> MeshSpec:
    kw = {k: getattr(args, k, None) for k in MESH_DEFAULTS}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if not kw.get("family"):
        raise InputError("a mesh family is required (--family)")
    for k, v in MESH_DEFAULTS.items():
        if kw.get(k) is None:
            kw[k] = v
    return MeshSpec(**kw)


def _parse_family_spec(text: str) -> dict:
    family, _, rest = text.partition(":")
    out: dict = {"family": family}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep or key not in MESH_DEFAULTS:
            raise InputError(f"bad mesh spec item {item!r}")
        if key in ("psi", "layer_side"):
            out[key] = value
        elif key == "N":
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def _emit(text_by_format: dict, out: str | None, default: str) -> None:
    """Write the rendering chosen by `out` ('-', a format name or a path)."""
    fmt, path = default, None
    if out and out != "-":
        if out.lower() in text_by_format:
            fmt = out.lower()
        else:
            path = out
            fmt = "csv" if out.lower().endswith(".csv") else "json"
    text = text_by_format[fmt]()
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)


def _cmd_mesh(args) -> int:
    mesh = build_mesh(_mesh_spec(args))
    _emit({"json": lambda: mesh_to_json(mesh), "csv": lambda: mesh_to_csv(mesh)},
          args.out, "json")
    return EXIT_OK


def _cmd_solve(args) -> int:
    kind = canonical_kind(args.problem or "cd")
    eps = args.eps if args.eps is not None else 1.0
    gamma = args.gamma if args.gamma is not None else 1.0
    problem = manufactured_problem(kind, eps, gamma)
    if args.mesh and Path(args.mesh).exists():
        mesh = read_mesh(args.mesh)
    else:
        extra = _parse_family_spec(args.mesh) if args.mesh else {}
        if kind != CD and not extra.get("layer_side") and not args.layer_side:
            extra["layer_side"] = "Both"
        mesh = build_mesh(_mesh_spec(args, eps=eps, gamma=gamma, **extra))
    scheme = args.scheme or ("upwind" if kind == CD else "central")
    sol = solve(problem, mesh, scheme, conservative=bool(args.conservative))
    _emit({"json": lambda: dumps(solution_to_dict(sol), indent=1) + "\n",
           "csv": lambda: solution_to_csv(sol)}, args.out, "csv")
    return EXIT_OK


def _cmd_study(args) -> int:
    data = dict(getattr(args, "study", None) or {})
    for key in ("csv", "json", "threads"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    to_stdout = data.get("csv") in (None, "-")
    if data.get("csv") == "-":
        data.pop("csv")
    config = StudyConfig.from_dict(data)
    report = convergence_study(config)
    if to_stdout:
        sys.stdout.write(report.to_csv())
    failures = [r for r in report.rows if r.failure]
    for r in failures:
        print(f"cell failed: {r.family} {r.scheme} eps={r.eps} N={r.N}: {r.failure}",
              file=sys.stderr)
    return EXIT_OK


def _cmd_adapt(args) -> int:
    eps = args.eps if args.eps is not None else 1e-4
    gamma = args.gamma if args.gamma is not None else 1.0
    trace = ks_adapt(manufactured_problem("cd", eps, gamma),
                     args.N if args.N is not None else 128,
                     args.C0 if args.C0 is not None else 2.0,
                     args.max_iter if args.max_iter is not None else 20)
    payload = dict(trace.to_dict(), eps=eps, gamma=gamma)
    if args.out and args.out != "-":
        write_text(args.out, dumps(payload, indent=1) + "\n")
    else:
        sys.stdout.write(dumps(payload, indent=1) + "\n")
    if args.csv:
        lines = ["iter,Q,eta,err"]
        for row in trace.rows():
            err = "" if row["err"] is None else format(row["err"], ".17g")
            lines.append(f"{row['iter']},{row['Q']:.17g},{row['eta']:.17g},{err}")
        write_text(args.csv, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_check(args) -> int:
    if not args.mesh:
        raise InputError("check needs --mesh")
    if args.eps is None:
        raise InputError("check needs --eps")
    mesh = read_mesh(args.mesh)
    S = args.S if args.S is not None else 4.0
    report = mesh_report(mesh, args.eps, S)
    if args.n_ref is not None:
        holds, margin = liuxu_con2_check(mesh, args.eps, S, args.n_ref)
        report = replace(report, con2_holds=holds, con2_margin=margin)
    data = report.to_dict()

    def csv():
        vals = [format(v, ".17g") if isinstance(v, float) else str(v).lower()
                if isinstance(v, bool) else str(v) for v in data.values()]
        return ",".join(data) + "\n" + ",".join(vals) + "\n"

    _emit({"json": lambda: dumps(data, indent=1) + "\n", "csv": csv}, args.out, "json")
    return EXIT_OK


COMMANDS = {"mesh": _cmd_mesh, "solve": _cmd_solve, "study": _cmd_study,
            "adapt": _cmd_adapt, "check": _cmd_check}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        _load_config(args)
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"layerkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"layerkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, TypeError, ValueError) as exc:
        print(f"layerkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
