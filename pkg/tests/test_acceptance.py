"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (echoed in the terminal summary) before
asserting.  Criteria 7 and 8 are measured faithfully and currently fail;
they are marked ``xfail(strict=True)`` so a future pass is noticed.
"""

import statistics
import time

import numpy as np
import pytest

from alspg.auglag import AlspgConfig
from alspg.harness import bundled_dir, load_scenario, run_scenario
from alspg.harness.runner import ILQR_DEFAULTS, build_instance
from alspg.ocp import adjoint_products, ilqr_baseline, solve_ocp

from setcases import FACTORIES, make_case, run_projection_suite
from test_auglag import SET_KINDS, _scalar_kkt, al_gradient_fd_error
from test_ocp import adjoint_scaling_exponent, dense_oracle
from test_problems import robust_ik_satisfaction


def _by_id(records):
    return {r.scenario_id: r for r in records}


def test_criterion_01_projection_suite(acceptance_report):
    t0 = time.perf_counter()
    worst = {}
    ok = True
    for name in FACTORIES:
        rep = run_projection_suite(make_case(name))
        worst[name] = rep
        ok &= rep.idempotence <= 1e-9 and rep.membership_failures == 0 and rep.optimality_slack <= 1e-6
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    idem = max(r.idempotence for r in worst.values())
    slack = max(r.optimality_slack for r in worst.values())
    fails = sum(r.membership_failures for r in worst.values())
    acceptance_report(1, "projection suite", ok,
                      f"8 sets, idempotence {idem:.1e}, membership failures {fails}, slack {slack:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_al_gradient_identity(acceptance_report):
    errs = {kind: max(al_gradient_fd_error(kind, seed) for seed in range(20)) for kind in SET_KINDS}
    worst = max(errs.values())
    ok = worst <= 1e-5
    acceptance_report(2, "AL gradient identity", ok, f"{len(SET_KINDS)} set types x 20, worst rel. err {worst:.1e}")
    assert ok


def test_criterion_03_recursive_adjoint(acceptance_report):
    worst = 0.0
    for T in (1, 2, 10, 40):
        for m in (1, 2, 3):
            for n in (1, 2, 3):
                rng = np.random.default_rng(100 * T + 10 * m + n + 7)
                As = rng.normal(scale=0.5, size=(T, m, m))
                Bs = rng.normal(size=(T, m, n))
                y = rng.normal(size=T * m)
                worst = max(worst, float(np.max(np.abs(adjoint_products(As, Bs, y).ravel() - dense_oracle(As, Bs).T @ y))))
    slope = adjoint_scaling_exponent()
    ok = worst <= 1e-10 and slope <= 1.3
    acceptance_report(3, "recursive adjoint", ok, f"abs err {worst:.1e}, time exponent {slope:.2f}")
    assert ok


def test_criterion_04_scalar_kkt(acceptance_report):
    res = _scalar_kkt(AlspgConfig())
    dx, dl = abs(res.x_star[0] - 1), abs(res.blocks[0].lam[0] + 2)
    ok = res.converged and dx <= 1e-4 and dl <= 1e-2
    acceptance_report(4, "scalar KKT", ok, f"|x-1| = {dx:.1e}, |lambda+2| = {dl:.1e}, {res.outer_iterations} outer iterations")
    assert ok


def test_criterion_05_robust_ik(acceptance_report):
    t0 = time.perf_counter()
    res, rate = robust_ik_satisfaction()
    elapsed = time.perf_counter() - t0
    ok = res.converged and 0.77 <= rate <= 0.83 and elapsed < 30.0
    acceptance_report(5, "robust IK", ok, f"satisfaction {rate:.4f} over 10^4 samples, {elapsed:.2f} s")
    assert ok


def test_criterion_06_ablation_ordering(bundled_suite, acceptance_report):
    recs = _by_id(bundled_suite[0])
    proj = [recs[f"ablation_scene{k}_proj"].n_f for k in range(5)]
    noproj = [recs[f"ablation_scene{k}_noproj"].n_f for k in range(5)]
    wins = sum(a < b for a, b in zip(proj, noproj))
    ok = statistics.fmean(proj) < statistics.fmean(noproj) and wins >= 4
    acceptance_report(6, "ablation ordering", ok,
                      f"mean n_f {statistics.fmean(proj):.0f} vs {statistics.fmean(noproj):.0f}, wins {wins}/5")
    assert ok


@pytest.mark.xfail(strict=True, reason="ALSPG needs more cost evaluations than analytic-derivative iLQR on pushing")
def test_criterion_07_push_planning(bundled_suite, acceptance_report):
    recs = _by_id(bundled_suite[0])
    al = [recs[f"push_target{k:02d}_alspg"] for k in range(10)]
    il = [recs[f"push_target{k:02d}_ilqr"] for k in range(10)]
    med_al = statistics.median(r.final_objective for r in al)
    med_il = statistics.median(r.final_objective for r in il)
    nf_al, nf_il = sum(r.n_f for r in al), sum(r.n_f for r in il)
    cost_ok, evals_ok = med_al <= med_il, nf_al < nf_il
    ok = cost_ok and evals_ok
    acceptance_report(7, "push planning", ok,
                      f"median cost {med_al:.3e} vs iLQR {med_il:.3e} ({'ok' if cost_ok else 'worse'}); "
                      f"total n_f {nf_al} vs iLQR {nf_il} ({'ok' if evals_ok else 'more'})")
    assert ok


def _reach_times(horizons=(20, 40, 80, 160), rounds=5):
    """Best-of-rounds wall time per horizon for SPG and iLQR, horizons interleaved."""
    probs = {}
    for T in horizons:
        sc = load_scenario(bundled_dir() / "reach" / f"reach_T{T:03d}_spg.scenario")
        inst = build_instance(sc)
        probs[T] = (inst.problem, inst.x0)
    spg = {T: np.inf for T in horizons}
    ilqr = {T: np.inf for T in horizons}
    for _ in range(rounds):
        for T, (prob, u0) in probs.items():
            t0 = time.perf_counter()
            a = solve_ocp(prob, u0)
            spg[T] = min(spg[T], time.perf_counter() - t0)
            t0 = time.perf_counter()
            b = ilqr_baseline(prob, u0, **ILQR_DEFAULTS)
            ilqr[T] = min(ilqr[T], time.perf_counter() - t0)
            assert a.converged and b.converged
    Ts = np.array(horizons, float)
    s, i = np.array([spg[T] for T in horizons]), np.array([ilqr[T] for T in horizons])
    return (float(np.polyfit(np.log(Ts), np.log(s), 1)[0]), float(np.polyfit(Ts, s, 1)[0]),
            float(np.polyfit(Ts, i, 1)[0]))


@pytest.mark.xfail(strict=True, reason="SPG time per horizon step exceeds the Riccati baseline's on the reach task")
def test_criterion_08_horizon_scaling(acceptance_report):
    exponent, slope_spg, slope_ilqr = _reach_times()
    ok = exponent <= 1.2 and slope_spg <= slope_ilqr
    acceptance_report(8, "horizon scaling", ok,
                      f"SPG exponent {exponent:.2f} ({'ok' if exponent <= 1.2 else 'too steep'}); "
                      f"slope {slope_spg * 1e3:.3f} vs iLQR {slope_ilqr * 1e3:.3f} ms/step")
    assert ok


REPLAY = ("ik_annulus", "robust_ik", "car_point_single", "push_target00_alspg", "reach_T040_spg", "ablation_scene0_proj")


def test_criterion_09_feasibility_and_determinism(bundled_suite, acceptance_report):
    records = bundled_suite[0]
    converged = [r for r in records if r.converged]
    bad = [r.scenario_id for r in converged if r.max_violation > 1e-4 or r.domain_violation > 1e-9]
    paths = {load_scenario(p).id: p for p in bundled_dir().rglob("*.scenario")}
    recs = _by_id(records)
    mismatched = [sid for sid in REPLAY
                  if run_scenario(paths[sid])[0].determinism_hash() != recs[sid].determinism_hash()]
    ok = not bad and not mismatched
    acceptance_report(9, "feasibility and determinism", ok,
                      f"{len(converged)}/{len(records)} converged, {len(bad)} infeasible, "
                      f"{len(REPLAY) - len(mismatched)}/{len(REPLAY)} replays identical")
    assert ok


def test_criterion_10_suite_runtime(bundled_suite, acceptance_report):
    records, _, seconds = bundled_suite
    ok = seconds < 600
    acceptance_report(10, "bundled suite runtime", ok, f"{len(records)} scenarios in {seconds:.0f} s")
    assert ok
