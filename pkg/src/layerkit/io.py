"""Flat-file formats: mesh JSON/CSV, solution CSV and a 17-digit JSON writer."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InputError
from .meshes import Mesh1D
from .solver import DiscreteSolution


def _num(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def dumps(obj: Any, indent: int | None = None, _level: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + ",".join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool)
               for v in seq):
            # numeric vectors stay on one line
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in seq]
        return "[" + ",".join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _plain(value):
    if isinstance(value, (str, bool, int, float)) or value is None:
        return value
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return str(value)


def mesh_to_dict(mesh: Mesh1D) -> dict:
    return {"family": mesh.family,
            "params": {k: _plain(v) for k, v in mesh.params.items()},
            "nodes": mesh.nodes.tolist()}


def mesh_to_json(mesh: Mesh1D) -> str:
    return dumps(mesh_to_dict(mesh), indent=1) + "\n"


def mesh_from_dict(data: dict) -> Mesh1D:
    if not isinstance(data, dict) or "nodes" not in data:
        raise InputError("mesh JSON needs a 'nodes' array")
    try:
        nodes = np.asarray(data["nodes"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad node list: {exc}") from None
    return Mesh1D(nodes, str(data.get("family", "Custom")), dict(data.get("params", {})))


def mesh_from_json(text: str) -> Mesh1D:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid mesh JSON: {exc}") from None
    return mesh_from_dict(data)


def read_mesh(path: str | Path) -> Mesh1D:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read mesh file {path}: {exc}") from None
    if path.suffix.lower() == ".csv":
        return mesh_from_csv(text)
    return mesh_from_json(text)


def mesh_to_csv(mesh: Mesh1D) -> str:
    """Rows ``i,x,h`` with ``h_0`` left empty."""
    lines = ["i,x,h"]
    h = mesh.steps
    for i, x in enumerate(mesh.nodes):
        lines.append(f"{i},{_num(x)},{_num(h[i - 1]) if i else ''}")
    return "\n".join(lines) + "\n"


def mesh_from_csv(text: str) -> Mesh1D:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0].replace(" ", "") != "i,x,h":
        raise InputError("mesh CSV must start with the header i,x,h")
    try:
        nodes = [float(r.split(",")[1]) for r in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad mesh CSV row: {exc}") from None
    return Mesh1D(np.asarray(nodes), "Custom", {})


def solution_to_csv(solution: DiscreteSolution) -> str:
    """Rows ``i,x,u,uexact,err`` (exact columns empty without an exact solution)."""
    x, u = solution.mesh.nodes, solution.values
    p = solution.problem
    ex = p.exact(x) if p is not None and p.exact is not None else None
    lines = ["i,x,u,uexact,err"]
    for i in range(x.size):
        if ex is None:
            lines.append(f"{i},{_num(x[i])},{_num(u[i])},,")
        else:
            lines.append(f"{i},{_num(x[i])},{_num(u[i])},{_num(ex[i])},{_num(abs(ex[i] - u[i]))}")
    return "\n".join(lines) + "\n"


def solution_to_dict(solution: DiscreteSolution) -> dict:
    out = {"scheme": solution.scheme, "conservative": solution.conservative,
           "mesh": mesh_to_dict(solution.mesh), "values": solution.values.tolist()}
    p = solution.problem
    if p is not None and p.exact is not None:
        ex = p.exact(solution.mesh.nodes)
        out["exact"] = ex.tolist()
        out["error_max"] = float(np.max(np.abs(ex - solution.values)))
    return out


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
