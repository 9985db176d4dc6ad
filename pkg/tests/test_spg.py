import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import lsq_linear

from alspg.geometry import BoxSet, QuadricAnnulusSet
from alspg.spg import (
    HISTORY_COLUMNS,
    LineSearchConfig,
    LineSearchFailed,
    NonDescentDirection,
    ObjectiveOracle,
    SpgConfig,
    nonmonotone_line_search,
    spectral_stepsize,
    spg_minimize,
    write_history_csv,
)


def quadratic(Q, c=None):
    Q = np.asarray(Q, float)
    c = np.zeros(len(Q)) if c is None else np.asarray(c, float)
    return ObjectiveOracle(lambda x: 0.5 * x @ Q @ x + c @ x, lambda x: Q @ x + c)


class Recorder(ObjectiveOracle):
    """Oracle that remembers every point where ``f`` is evaluated.

    Gradient calls are not recorded: the initial spectral probe
    ``x0 - gamma_small * g`` is a curvature sample, not an iterate.
    """

    def __init__(self, fun, grad):
        super().__init__(fun, grad)
        self.points = []

    def value(self, x):
        self.points.append(np.array(x))
        return super().value(x)


# ---------------------------------------------------------------- line search


def test_full_step_accepted():
    f = quadratic(np.eye(1))
    x = np.array([1.0])
    res = nonmonotone_line_search(f, x, np.array([-1.0]), [f.value(x)], LineSearchConfig())
    assert res.alpha == 1.0
    assert res.backtracks == 0
    assert res.f == 0.0


def test_non_descent_direction_rejected():
    f = quadratic(np.eye(2))
    x = np.array([1.0, 0.0])
    with pytest.raises(NonDescentDirection):
        nonmonotone_line_search(f, x, np.array([1.0, 0.0]), [0.5], LineSearchConfig())


def test_backtrack_limit():
    # gradient points the wrong way, so no step along d decreases f
    f = ObjectiveOracle(lambda x: float(x @ x), lambda x: -2 * x)
    x = np.array([1.0])
    with pytest.raises(LineSearchFailed):
        nonmonotone_line_search(f, x, np.array([1.0]), [1.0], LineSearchConfig(max_backtracks=5))


def test_memory_one_is_monotone_armijo():
    # a high old value lets the non-monotone rule accept an uphill full step
    f = ObjectiveOracle(lambda x: float((x[0] - 1.0) ** 2), lambda x: np.array([2 * (x[0] - 1.0)]))
    x = np.array([0.0])
    d = np.array([3.0])  # overshoots to f(3) = 4 > f(0) = 1
    hist = [10.0, f.value(x)]
    loose = nonmonotone_line_search(f, x, d, hist, LineSearchConfig(memory=10))
    assert loose.alpha == 1.0 and loose.f > 1.0
    strict = nonmonotone_line_search(f, x, d, hist, LineSearchConfig(memory=1))
    assert strict.fmax == 1.0
    assert strict.f <= 1.0 + strict.alpha * 1e-4 * strict.slope


def _replay_line_search(f, fp, x, d, fmax, beta=1e-4, lo=0.1, hi=0.9):
    """Scalar re-implementation of the halving/interpolation sequence."""
    c = fp(x) * d
    fx = f(x)
    a = 1.0
    fa = f(x + a * d)
    while fa > fmax + a * beta * c:
        den = fa - fx - a * c
        trial = -0.5 * a * a * c / den if den > 0 else -1
        a = trial if lo * a <= trial <= hi * a else a / 2
        fa = f(x + a * d)
    return a


def test_quartic_step_matches_replay():
    f = lambda x: x**4
    fp = lambda x: 4 * x**3
    x0, d = 2.0, -fp(2.0)
    want = _replay_line_search(f, fp, x0, d, f(x0))
    oracle = ObjectiveOracle(lambda x: x[0] ** 4, lambda x: np.array([4 * x[0] ** 3]))
    got = nonmonotone_line_search(oracle, np.array([x0]), np.array([d]), [f(x0)], LineSearchConfig())
    assert got.alpha == want
    assert got.backtracks > 0


# ---------------------------------------------------------------- spectral step


def test_spectral_identity_curvature():
    s = np.array([0.3, -1.2])
    assert spectral_stepsize(s, s, SpgConfig()) == pytest.approx(1.0)


def test_spectral_fallback_on_nonpositive_curvature():
    cfg = SpgConfig()
    assert spectral_stepsize(np.array([1.0, 0.0]), np.array([0.0, 1.0]), cfg) == cfg.gamma_max
    assert spectral_stepsize(np.array([1.0]), np.array([-1.0]), cfg) == cfg.gamma_max


def test_spectral_clamped():
    cfg = SpgConfig(gamma_min=1e-3, gamma_max=10.0)
    assert spectral_stepsize(np.array([1.0]), np.array([1e6]), cfg) == 1e-3
    assert spectral_stepsize(np.array([1.0]), np.array([1e-6]), cfg) == 10.0


@settings(max_examples=300)
@given(st.tuples(st.floats(-10, 10), st.floats(-10, 10)).filter(lambda s: s[0] ** 2 + s[1] ** 2 > 1e-6))
def test_spectral_within_inverse_eigenvalues(s):
    Q = np.diag([1.0, 4.0])
    s = np.array(s)
    y = Q @ s
    g1 = (s @ s) / (s @ y)
    g2 = (s @ y) / (y @ y)
    assert 0.25 - 1e-12 <= g1 <= 1 + 1e-12
    assert 0.25 - 1e-12 <= g2 <= 1 + 1e-12
    gamma = spectral_stepsize(s, y, SpgConfig())
    assert gamma == pytest.approx(g2 if g1 < 2 * g2 else g1 - 0.5 * g2)


# ---------------------------------------------------------------- spg_minimize


def test_box_corner():
    res = spg_minimize(quadratic(np.eye(2)), BoxSet([1, 1], [np.inf, np.inf]), [5.0, 3.0])
    assert res.converged
    np.testing.assert_allclose(res.x_star, [1, 1])
    assert res.f_star == pytest.approx(1.0)


def test_ball_projection():
    target = np.array([3.0, 4.0])
    f = ObjectiveOracle(lambda x: 0.5 * (x - target) @ (x - target), lambda x: x - target)
    res = spg_minimize(f, QuadricAnnulusSet.from_radii([0, 0], 0, 2), [0.0, 0.0], SpgConfig(tol=1e-10))
    np.testing.assert_allclose(res.x_star, [1.2, 1.6], atol=1e-9)


def _qp_oracle(Q, c, lo, hi):
    """Bounded least squares on the Cholesky factor of Q."""
    L = np.linalg.cholesky(Q)
    b = -np.linalg.solve(L, c)
    return lsq_linear(L.T, b, bounds=(lo, hi), tol=1e-15, lsmr_tol=None, method="bvls").x


@pytest.mark.parametrize("seed", range(5))
def test_box_qp_matches_reference(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(10, 10))
    Q = A @ A.T + np.eye(10)
    c = rng.normal(size=10) * 3
    lo, hi = -np.ones(10) * 0.5, np.ones(10)
    ref = _qp_oracle(Q, c, lo, hi)
    res = spg_minimize(quadratic(Q, c), BoxSet(lo, hi), np.zeros(10), SpgConfig(tol=1e-11, max_iter=5000))
    assert res.converged
    assert np.linalg.norm(res.x_star - ref) <= 1e-6


def test_iterates_stay_feasible_and_envelope_holds():
    rng = np.random.default_rng(9)
    A = rng.normal(size=(6, 6))
    Q = A @ A.T + 0.1 * np.eye(6)
    c = rng.normal(size=6)
    box = BoxSet(-np.ones(6), np.ones(6))
    f = Recorder(lambda x: 0.5 * x @ Q @ x + c @ x * 5, lambda x: Q @ x + 5 * c)
    cfg = SpgConfig(tol=1e-9)
    res = spg_minimize(f, box, rng.normal(size=6) * 4, cfg)
    assert all(box.contains(p, 1e-9) for p in f.points)
    M, beta = cfg.line_search.memory, cfg.line_search.beta
    fs = [h.f for h in res.history]
    for k in range(1, len(res.history)):
        h = res.history[k]
        assert h.fmax == max(fs[max(0, k - M):k])
        assert h.f <= h.fmax + h.alpha * beta * h.slope


def test_stationarity_certificate():
    rng = np.random.default_rng(10)
    Q = np.diag(rng.uniform(0.5, 5, 8))
    c = rng.normal(size=8) * 4
    box = BoxSet(-np.ones(8), np.ones(8))
    cfg = SpgConfig(tol=1e-7)
    res = spg_minimize(quadratic(Q, c), box, np.zeros(8), cfg)
    assert res.converged
    x = res.x_star
    g = Q @ x + c
    assert np.max(np.abs(np.clip(x - g, -1, 1) - x)) <= cfg.tol


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 3.0), st.integers(2, 20))
def test_unconstrained_quadratic_converges(seed, log_cond, n):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = np.logspace(0, log_cond, n)
    Q = (U * eig) @ U.T
    c = rng.normal(size=n)
    res = spg_minimize(quadratic(Q, c), None, rng.normal(size=n), SpgConfig(tol=1e-10, max_iter=500))
    assert np.linalg.norm(Q @ res.x_star + c) <= 1e-8


def test_line_search_failure_returns_best_iterate():
    f = ObjectiveOracle(lambda x: float(x @ x), lambda x: -2 * x)
    res = spg_minimize(f, None, np.array([1.0]), SpgConfig(line_search=LineSearchConfig(max_backtracks=3)))
    assert res.status == "line_search_failed"
    np.testing.assert_array_equal(res.x_star, [1.0])


def test_zero_probe_difference_falls_back_to_unit_step():
    c = np.array([1.0, -2.0])
    f = ObjectiveOracle(lambda x: c @ x, lambda x: c)
    res = spg_minimize(f, BoxSet([0, 0], [1, 1]), [0.5, 0.5])
    assert res.history[0].gamma == 1.0
    np.testing.assert_allclose(res.x_star, [0, 1])


def test_counters_and_history_csv():
    f = quadratic(np.diag([1.0, 10.0]))
    res = spg_minimize(f, None, [1.0, 1.0])
    assert res.counters == {"n_f": f.n_f, "n_grad": f.n_grad}
    buf = io.StringIO()
    write_history_csv(res, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == HISTORY_COLUMNS
    assert [int(r[0]) for r in rows[1:]] == list(range(len(res.history)))
    assert math.isnan(float(rows[1][4]))


def test_config_validation():
    with pytest.raises(ValueError):
        LineSearchConfig(beta=1.5)
    with pytest.raises(ValueError):
        LineSearchConfig(interp_lo=0.9, interp_hi=0.1)
    with pytest.raises(ValueError):
        SpgConfig(tol=0)
