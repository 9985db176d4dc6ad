"""Run scenarios, collect records, aggregate suites and emit plot data."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..auglag import AlspgConfig, write_trace_csv
from ..ocp import ilqr_baseline, solve_ocp, write_trajectory_csv
from ..problems.base import without_projections
from ..problems.registry import Instance, ParamError, Params, build
from ..spg import SpgConfig, spg_minimize
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario, write_geometry_csv

RECORD_COLUMNS = (
    "scenario_id", "problem", "solver", "seed", "repeat_index", "status", "wall_ms",
    "n_f", "n_grad", "n_jac", "n_g", "final_objective", "max_violation", "domain_violation",
    "outer_iterations", "iterations",
)
SUMMARY_COLUMNS = (
    "problem", "solver", "runs", "converged",
    "wall_ms_mean", "wall_ms_std", "n_f_mean", "n_f_std", "n_grad_mean", "n_grad_std",
    "n_jac_mean", "n_jac_std", "objective_mean", "objective_median", "max_violation_max",
)
ILQR_DEFAULTS = {"max_iter": 200, "tol": 1e-8, "reg_init": 1e-6, "reg_max": 1e2, "max_halvings": 20}


class PlotError(RuntimeError):
    """The record lacks the data needed for the requested plot."""


@dataclass
class RunRecord:
    scenario_id: str
    problem: str
    solver: str
    seed: int
    repeat_index: int
    status: str
    wall_ms: float
    n_f: int
    n_grad: int
    n_jac: int
    n_g: int
    final_objective: float
    max_violation: float
    domain_violation: float
    outer_iterations: int
    iterations: int
    metrics: dict = field(default_factory=dict)
    solution: list = field(default_factory=list)
    # (iter, objective, stationarity) per solver iteration
    history: list = field(default_factory=list)
    scenario: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self, with_time: bool = True) -> dict:
        d = dataclasses.asdict(self)
        if not with_time:
            d.pop("wall_ms")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def determinism_hash(self) -> str:
        """SHA-256 of the record without the wall time."""
        blob = json.dumps(self.to_dict(with_time=False), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


# --------------------------------------------------------------------------
# solver settings


def _coerce(default, text: str, key: str):
    t = text.strip()
    if default is None or isinstance(default, float):
        if t.lower() == "none":
            return None
        return float(t)
    if isinstance(default, bool):
        return t.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(t)
    raise ScenarioError(f"solver key {key!r} cannot be set from a scenario")


def _apply(obj, path: list[str], text: str, key: str):
    names = {f.name for f in dataclasses.fields(obj)}
    head = path[0]
    if head not in names:
        raise ScenarioError(f"unknown solver key {key!r}")
    cur = getattr(obj, head)
    if len(path) > 1:
        if not dataclasses.is_dataclass(cur):
            raise ScenarioError(f"unknown solver key {key!r}")
        return dataclasses.replace(obj, **{head: _apply(cur, path[1:], text, key)})
    try:
        return dataclasses.replace(obj, **{head: _coerce(cur, text, key)})
    except ValueError as e:
        raise ScenarioError(f"solver key {key!r}: {e}") from None


def solver_settings(params: dict[str, str]) -> tuple[AlspgConfig, dict]:
    """ALSPG config (``inner.*`` reaches the SPG config) and iLQR keyword arguments."""
    cfg = AlspgConfig()
    ilqr = dict(ILQR_DEFAULTS)
    for key in sorted(params):
        text = params[key]
        if key.startswith("ilqr."):
            name = key[5:]
            if name not in ilqr:
                raise ScenarioError(f"unknown solver key {key!r}")
            try:
                ilqr[name] = type(ILQR_DEFAULTS[name])(float(text)) if name != "tol" else float(text)
            except ValueError:
                raise ScenarioError(f"solver key {key!r}: expected a number") from None
        else:
            cfg = _apply(cfg, key.split("."), text, key)
    return cfg, ilqr


# --------------------------------------------------------------------------
# running


def build_instance(sc: Scenario) -> Instance:
    try:
        return build(sc.problem, Params(sc.params), sc.shapes, sc.seed)
    except ParamError as e:
        raise ScenarioError(str(e)) from None
    except ValueError as e:
        raise ScenarioError(f"problem {sc.problem!r}: {e}") from None


def _history_rows(history) -> list:
    return [[h.iter, float(h.f), float(h.stationarity)] for h in history]


def _domain_violation(domain, x) -> float:
    return 0.0 if domain is None else float(domain.distance(x))


def _solve(sc: Scenario, inst: Instance, cfg: AlspgConfig, ilqr_kw: dict):
    """Run the solver; returns (result summary dict, wall ms)."""
    solver = sc.solver
    if inst.kind == "static":
        prob = inst.problem
        if solver == "ilqr":
            raise ScenarioError(f"solver 'ilqr' needs an optimal control problem, {sc.problem!r} is static")
        if solver == "spg" and prob.blocks:
            raise ScenarioError(f"solver 'spg' cannot handle the constraint blocks of {sc.problem!r}")
        if solver == "alspg-noproj":
            prob = without_projections(prob)
        t0 = time.perf_counter()
        if solver == "spg":
            res = spg_minimize(prob.oracle(), prob.domain, inst.x0, cfg.inner)
            wall = (time.perf_counter() - t0) * 1e3
            return _from_spg(res), wall, prob.domain
        res = prob.solve(cfg, inst.x0)
        wall = (time.perf_counter() - t0) * 1e3
        return _from_alspg(res), wall, prob.domain

    prob = inst.problem
    if solver == "ilqr":
        target = inst.unconstrained or prob
        if target.has_constraints or target.control_domain is not None:
            raise ScenarioError(f"solver 'ilqr' handles unconstrained problems only; {sc.problem!r} has constraints")
        t0 = time.perf_counter()
        res = ilqr_baseline(target, inst.x0, **ilqr_kw)
        wall = (time.perf_counter() - t0) * 1e3
        return _from_ilqr(res), wall, None
    if solver == "spg" and prob.has_constraints:
        raise ScenarioError(f"solver 'spg' cannot handle the state constraints of {sc.problem!r}")
    t0 = time.perf_counter()
    res = solve_ocp(prob, inst.x0, cfg, projections=solver != "alspg-noproj")
    wall = (time.perf_counter() - t0) * 1e3
    return _from_alspg(res), wall, prob.control_domain


def _from_alspg(res) -> dict:
    c = res.counters
    return dict(
        status=res.status, x=res.x_star, f=res.f_star, n_f=c["n_f"], n_grad=c["n_grad"], n_jac=c["n_jac"], n_g=c["n_g"],
        max_violation=res.max_violation, outer=res.outer_iterations, iterations=res.inner_iterations,
        history=_history_rows(res.history), result=res,
    )


def _from_spg(res) -> dict:
    status = {"converged": "converged", "max_iter": "max_iter", "line_search_failed": "inner_failed"}[res.status]
    c = res.counters
    return dict(
        status=status, x=res.x_star, f=res.f_star, n_f=c["n_f"], n_grad=c["n_grad"], n_jac=0, n_g=0,
        max_violation=0.0, outer=0, iterations=res.iterations, history=_history_rows(res.history), result=res,
    )


def _from_ilqr(res) -> dict:
    c = res.counters
    return dict(
        status=res.status, x=res.x_star, f=res.f_star, n_f=c["n_f"], n_grad=c["n_grad"], n_jac=c["n_jac"], n_g=0,
        max_violation=0.0, outer=0, iterations=res.iterations, history=_history_rows(res.history), result=res,
    )


def run_once(sc: Scenario, repeat_index: int = 0) -> tuple[RunRecord, object]:
    """One solve of ``sc``; returns the record and the raw solver result."""
    cfg, ilqr_kw = solver_settings(sc.solver_params)
    inst = build_instance(sc)
    out, wall, domain = _solve(sc, inst, cfg, ilqr_kw)
    x = np.asarray(out["x"], float)
    metrics = inst.evaluate(x) if inst.evaluate else {}
    rec = RunRecord(
        scenario_id=sc.id,
        problem=sc.problem,
        solver=sc.solver,
        seed=sc.seed,
        repeat_index=repeat_index,
        status=out["status"],
        wall_ms=wall,
        n_f=int(out["n_f"]),
        n_grad=int(out["n_grad"]),
        n_jac=int(out["n_jac"]),
        n_g=int(out["n_g"]),
        final_objective=float(out["f"]),
        max_violation=float(out["max_violation"]),
        domain_violation=_domain_violation(domain, x),
        outer_iterations=int(out["outer"]),
        iterations=int(out["iterations"]),
        metrics={k: float(v) for k, v in metrics.items()},
        solution=x.tolist(),
        history=out["history"],
        scenario=sc.source,
    )
    return rec, out["result"]


def _stem(rec: RunRecord, repeat: int) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", rec.scenario_id)
    return safe if repeat == 1 else f"{safe}.r{rec.repeat_index}"


def write_run_outputs(rec: RunRecord, result, out_dir: Path, repeat: int = 1) -> Path:
    """``<id>.record.json``, ``<id>.trace.csv`` and, for ALSPG, ``<id>.outer.csv``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _stem(rec, repeat)
    path = out_dir / f"{stem}.record.json"
    path.write_text(rec.to_json() + "\n")
    with open(out_dir / f"{stem}.trace.csv", "w", newline="") as fh:
        _write_convergence(rec, fh)
    if getattr(result, "trace", None):
        with open(out_dir / f"{stem}.outer.csv", "w", newline="") as fh:
            write_trace_csv(result, fh)
    return path


def run_scenario(sc: Scenario | str | Path, out_dir=None, seed: int | None = None) -> list[RunRecord]:
    """Run every repeat of a scenario; writes outputs when ``out_dir`` is given."""
    if not isinstance(sc, Scenario):
        sc = load_scenario(sc)
    if seed is not None:
        sc = dataclasses.replace(sc, seed=seed)
    records = []
    for k in range(sc.repeat):
        rec, result = run_once(sc, k)
        if out_dir is not None:
            write_run_outputs(rec, result, Path(out_dir), sc.repeat)
        records.append(rec)
    return records


# --------------------------------------------------------------------------
# suites


def find_scenarios(directory, pattern: str | None = None) -> list[Path]:
    root = Path(directory)
    paths = sorted(p for p in root.rglob("*.scenario") if p.is_file())
    if pattern:
        rx = re.compile(pattern)
        paths = [p for p in paths if rx.search(p.relative_to(root).as_posix())]
    return paths


def _run_path(args) -> list[RunRecord]:
    path, out_dir, seed = args
    return run_scenario(path, out_dir, seed)


def run_suite(directory, pattern: str | None = None, jobs: int = 1, out_dir=None, seed: int | None = None):
    """Run all matching scenarios; returns (records, summary rows).

    Scenarios are parsed up front so a bad file fails before any solve.
    Records come back ordered by scenario id and repeat index whatever the
    worker count.
    """
    paths = find_scenarios(directory, pattern)
    if not paths:
        raise ScenarioError(f"no scenarios under {directory}" + (f" matching {pattern!r}" if pattern else ""))
    ids = {}
    for p in paths:
        sc = load_scenario(p)
        if sc.id in ids:
            raise ScenarioError(f"duplicate scenario id {sc.id!r} in {p} and {ids[sc.id]}")
        ids[sc.id] = p
    work = [(str(p), None if out_dir is None else str(out_dir), seed) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_path, work))
    else:
        chunks = [_run_path(w) for w in work]
    records = sorted((r for c in chunks for r in c), key=lambda r: (r.scenario_id, r.repeat_index))
    return records, summarize(records)


def _mean_std(xs):
    xs = [float(x) for x in xs]
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def summarize(records: list[RunRecord]) -> list[dict]:
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.problem, r.solver), []).append(r)
    rows = []
    for (problem, solver), rs in sorted(groups.items()):
        row = {"problem": problem, "solver": solver, "runs": len(rs), "converged": sum(r.converged for r in rs)}
        for name, attr in (("wall_ms", "wall_ms"), ("n_f", "n_f"), ("n_grad", "n_grad"), ("n_jac", "n_jac")):
            m, s = _mean_std(getattr(r, attr) for r in rs)
            row[f"{name}_mean"], row[f"{name}_std"] = m, s
        objs = [r.final_objective for r in rs]
        row["objective_mean"] = statistics.fmean(objs)
        row["objective_median"] = statistics.median(objs)
        row["max_violation_max"] = max(r.max_violation for r in rs)
        rows.append(row)
    return rows


def write_records_csv(records: list[RunRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        d = r.to_dict()
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in RECORD_COLUMNS])


def write_summary_csv(rows: list[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in SUMMARY_COLUMNS])


def format_summary(rows: list[dict]) -> str:
    """Aligned text table with ``mean ± std`` cells."""
    head = ["problem", "solver", "runs", "conv", "time [ms]", "fun evals", "grad evals", "jac evals", "objective (median)"]
    body = []
    for r in rows:
        body.append([
            r["problem"], r["solver"], str(r["runs"]), str(r["converged"]),
            f"{r['wall_ms_mean']:.1f} ± {r['wall_ms_std']:.1f}",
            f"{r['n_f_mean']:.1f} ± {r['n_f_std']:.1f}",
            f"{r['n_grad_mean']:.1f} ± {r['n_grad_std']:.1f}",
            f"{r['n_jac_mean']:.1f} ± {r['n_jac_std']:.1f}",
            f"{r['objective_median']:.6g}",
        ])
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_tables(records: list[RunRecord], rows: list[dict], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.csv", "w", newline="") as fh:
        write_records_csv(records, fh)
    with open(out / "summary.csv", "w", newline="") as fh:
        write_summary_csv(rows, fh)
    (out / "summary.txt").write_text(format_summary(rows))


# --------------------------------------------------------------------------
# plot data

PLOT_KINDS = ("convergence", "trajectory", "geometry")


def _write_convergence(rec: RunRecord, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["iter", "cost", "stationarity"])
    for it, f, st in rec.history:
        w.writerow([it, repr(float(f)), repr(float(st))])


def emit_plotdata(record: RunRecord | str | Path, kind: str, out_dir=None) -> Path | str:
    """Write the CSV behind a convergence, trajectory or geometry plot.

    Returns the written path, or the CSV text when ``out_dir`` is None.
    """
    if not isinstance(record, RunRecord):
        record = RunRecord.from_json(Path(record).read_text())
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    buf = io.StringIO()
    if kind == "convergence":
        if not record.history:
            raise PlotError(f"record {record.scenario_id!r} has no iteration history")
        _write_convergence(record, buf)
    else:
        if not record.scenario:
            raise PlotError(f"record {record.scenario_id!r} does not embed its scenario")
        sc = dataclasses.replace(parse_scenario(record.scenario), seed=record.seed)
        inst = build_instance(sc)
        if kind == "trajectory":
            if inst.kind != "ocp":
                raise PlotError(f"problem {record.problem!r} has no trajectory")
            if not record.solution:
                raise PlotError(f"record {record.scenario_id!r} has no solution")
            write_trajectory_csv(inst.problem, np.asarray(record.solution), buf)
        else:
            if not inst.shapes:
                raise PlotError(f"problem {record.problem!r} has no geometry")
            write_geometry_csv(inst.shapes, buf)
    if out_dir is None:
        return buf.getvalue()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(record, 1)}.{kind}.csv"
    path.write_text(buf.getvalue())
    return path
