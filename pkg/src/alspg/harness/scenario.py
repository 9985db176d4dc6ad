"""Scenario files: INI-style sections of ``key = value`` lines.

Grammar::

    [scenario]              id, problem, solver, seed (default 0), repeat (default 1)
    [problem]               problem parameters, forwarded to the problem builder
    [solver]                solver settings; dotted keys reach nested configs
                            (``inner.tol``, ``inner.line_search.memory``, ``ilqr.max_iter``)
    [polygon.<name>]        vertices = x y; x y; ...   or   rect = cx cy hx hy angle
    [curve.<name>]          control_points = x y; x y; ...
    [point.<name>]          at = x y

Shape sections feed the problem builder by name (for instance
``[polygon.obstacle0]``, ``[polygon.robot]``, ``[curve.target]``).
Comments start with ``#`` or ``;`` on their own line.
"""

from __future__ import annotations

import configparser
import csv
import io
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import ConvexPolygon2D

SOLVERS = ("alspg", "spg", "ilqr", "alspg-noproj")
SHAPE_KINDS = ("polygon", "curve", "point", "polyline")


def bundled_dir() -> Path:
    """Directory of the scenario files shipped with the package."""
    return Path(str(resources.files("alspg") / "scenarios"))


class ScenarioError(ValueError):
    """The scenario text does not parse or names something unknown."""


@dataclass
class Scenario:
    id: str
    problem: str
    solver: str
    seed: int = 0
    repeat: int = 1
    params: dict[str, str] = field(default_factory=dict)
    solver_params: dict[str, str] = field(default_factory=dict)
    shapes: dict[str, tuple[str, np.ndarray]] = field(default_factory=dict)
    source: str = ""
    path: str = ""


def parse_points(text: str) -> np.ndarray:
    """``"x y; x y; ..."`` (commas allowed as separators) to an ``(n, 2)`` array."""
    rows = [r for r in (s.strip() for s in text.split(";")) if r]
    try:
        pts = np.array([[float(t) for t in r.replace(",", " ").split()] for r in rows])
    except ValueError:
        raise ScenarioError(f"bad point list {text!r}") from None
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ScenarioError(f"expected 'x y' pairs separated by ';', got {text!r}")
    return pts


def format_points(pts) -> str:
    return "; ".join(f"{x!r} {y!r}" for x, y in np.asarray(pts, float).tolist())


def _shape(kind: str, name: str, sec) -> tuple[str, np.ndarray]:
    keys = set(sec)
    if kind == "polygon":
        if "vertices" in sec:
            verts = parse_points(sec["vertices"])
        elif "rect" in sec:
            vals = [float(t) for t in sec["rect"].replace(",", " ").split()]
            if len(vals) not in (4, 5):
                raise ScenarioError(f"polygon {name!r}: rect needs cx cy hx hy [angle]")
            verts = ConvexPolygon2D.rectangle(vals[:2], vals[2:4], vals[4] if len(vals) == 5 else 0.0).vertices
        else:
            raise ScenarioError(f"polygon {name!r} needs 'vertices' or 'rect'")
        try:
            ConvexPolygon2D(verts)
        except ValueError as e:
            raise ScenarioError(f"polygon {name!r}: {e}") from None
        keys -= {"vertices", "rect"}
    elif kind == "curve":
        verts = parse_points(sec.get("control_points", ""))
        keys -= {"control_points"}
    elif kind == "point":
        verts = parse_points(sec.get("at", ""))
        keys -= {"at"}
    else:
        verts = parse_points(sec.get("vertices", ""))
        keys -= {"vertices"}
    if keys:
        raise ScenarioError(f"{kind} {name!r}: unknown key(s) {', '.join(sorted(keys))}")
    return kind, verts


def parse_scenario(text: str, path: str = "") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path or "<scenario>")
    except configparser.Error as e:
        raise ScenarioError(str(e).splitlines()[0]) from None
    if not cp.has_section("scenario"):
        raise ScenarioError("missing [scenario] section")
    head = dict(cp["scenario"])
    for key in ("id", "problem", "solver"):
        if key not in head:
            raise ScenarioError(f"[scenario] needs '{key}'")
    solver = head["solver"].strip()
    if solver not in SOLVERS:
        raise ScenarioError(f"unknown solver {solver!r}; expected one of {', '.join(SOLVERS)}")
    try:
        seed = int(head.get("seed", "0"))
        repeat = int(head.get("repeat", "1"))
    except ValueError:
        raise ScenarioError("seed and repeat must be integers") from None
    if repeat < 1:
        raise ScenarioError("repeat must be >= 1")
    extra = set(head) - {"id", "problem", "solver", "seed", "repeat"}
    if extra:
        raise ScenarioError(f"[scenario]: unknown key(s) {', '.join(sorted(extra))}")

    shapes = {}
    for name in cp.sections():
        if name in ("scenario", "problem", "solver"):
            continue
        kind, _, shape_name = name.partition(".")
        if kind not in SHAPE_KINDS or not shape_name:
            raise ScenarioError(f"unknown section [{name}]")
        shapes[shape_name] = _shape(kind, shape_name, cp[name])

    return Scenario(
        id=head["id"].strip(),
        problem=head["problem"].strip(),
        solver=solver,
        seed=seed,
        repeat=repeat,
        params=dict(cp["problem"]) if cp.has_section("problem") else {},
        solver_params=dict(cp["solver"]) if cp.has_section("solver") else {},
        shapes=shapes,
        source=text,
        path=str(path),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}") from None
    return parse_scenario(text, str(path))


# --------------------------------------------------------------------------
# geometry CSV: one row per vertex

GEOMETRY_COLUMNS = ("shape", "kind", "vertex", "x", "y")


def write_geometry_csv(shapes: dict, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(GEOMETRY_COLUMNS)
    for name in sorted(shapes):
        kind, pts = shapes[name]
        for i, (x, y) in enumerate(np.asarray(pts, float).tolist()):
            w.writerow([name, kind, i, repr(x), repr(y)])


def read_geometry_csv(fh) -> dict[str, tuple[str, np.ndarray]]:
    rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != GEOMETRY_COLUMNS:
        raise ScenarioError("geometry CSV header must be " + ",".join(GEOMETRY_COLUMNS))
    acc: dict[str, tuple[str, list]] = {}
    for r in rows[1:]:
        name, kind, idx, x, y = r
        if kind not in SHAPE_KINDS:
            raise ScenarioError(f"unknown shape kind {kind!r}")
        k, pts = acc.setdefault(name, (kind, []))
        if k != kind or int(idx) != len(pts):
            raise ScenarioError(f"shape {name!r}: inconsistent rows")
        pts.append((float(x), float(y)))
    return {n: (k, np.array(p)) for n, (k, p) in acc.items()}


def geometry_sections(shapes: dict) -> str:
    """Scenario-file sections describing ``shapes``."""
    key = {"polygon": "vertices", "curve": "control_points", "point": "at", "polyline": "vertices"}
    out = []
    for name in sorted(shapes):
        kind, pts = shapes[name]
        out.append(f"[{kind}.{name}]\n{key[kind]} = {format_points(pts)}\n")
    return "\n".join(out)


def geometry_roundtrip(shapes: dict) -> dict:
    """Emit ``shapes`` as CSV, convert to scenario sections and parse back."""
    buf = io.StringIO()
    write_geometry_csv(shapes, buf)
    buf.seek(0)
    parsed = read_geometry_csv(buf)
    text = "[scenario]\nid = geometry\nproblem = none\nsolver = alspg\n\n" + geometry_sections(parsed)
    return parse_scenario(text).shapes
