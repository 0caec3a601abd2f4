import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from comptree import EdgeParams, EmConfig, RootParams, em_fit, fit_root, predict, sample_risk
from comptree._backend import BACKEND, get_run_em
from comptree.edge_model import em_iterate, initial_params, responsibilities
from comptree.errors import DimensionMismatch, EmptyData
from oracles import em_one_step

BACKENDS = ["python"] + (["cython"] if BACKEND == "cython" else [])


def random_params(rng, dc, dp, omega0=None):
    w0 = rng.uniform(0.1, 0.9) if omega0 is None else omega0
    return EdgeParams(w0, rng.dirichlet(np.ones(dc)), rng.dirichlet(np.ones(dc), size=dp).T)


def zero_inflated(rng, n, d, rate):
    x = rng.dirichlet(np.ones(d), size=n)
    keep = rng.random((n, d)) >= rate
    keep[np.arange(n), rng.integers(0, d, n)] = True
    x = np.where(keep, x, 0.0)
    return x / x.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- predict


def test_predict_example():
    prm = EdgeParams(0.5, np.array([0.5, 0.5]), np.eye(2))
    np.testing.assert_allclose(predict(prm, [1.0, 0.0]), [0.75, 0.25], rtol=1e-15)


def test_predict_degenerate_returns_eta(rng):
    eta = rng.dirichlet(np.ones(4))
    prm = EdgeParams(0.3, eta, np.repeat(eta[:, None], 3, axis=1))
    x = rng.dirichlet(np.ones(3), size=10)
    np.testing.assert_allclose(predict(prm, x), np.broadcast_to(eta, (10, 4)), atol=1e-15)


def test_predict_floor_case(rng):
    cfg = EmConfig()
    eta = np.array([cfg.eta_min, 1 - cfg.eta_min])
    prm = EdgeParams(1 - cfg.omega_min, eta, np.array([[0.0, 0.0], [1.0, 1.0]]))
    out = predict(prm, [0.4, 0.6])
    assert out.min() >= cfg.epsilon0 * (1 - 1e-12)
    assert out.sum() == pytest.approx(1.0)


def test_predict_dimension_mismatch():
    prm = EdgeParams(0.5, np.array([0.5, 0.5]), np.eye(2))
    with pytest.raises(DimensionMismatch):
        predict(prm, [1.0, 0.0, 0.0])


def test_edge_params_check():
    prm = EdgeParams(0.5, np.array([0.5, 0.5]), np.array([[0.5, 2.0], [0.5, -1.0]]))
    with pytest.raises(ValueError):
        prm.check()
    assert EdgeParams(0.25, np.array([0.5, 0.5]), np.eye(2)).omega1 == 0.75


# ---------------------------------------------------------- responsibilities


@given(st.integers(1, 6), st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_responsibilities_partition(n, dc, dp, seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng, dc, dp)
    xc = rng.dirichlet(np.ones(dc), size=n)
    xp = zero_inflated(rng, n, dp, 0.3)
    g0, g1, alloc = responsibilities(prm, xc, xp)
    mx = xp @ prm.M.T
    ok = mx > 0
    np.testing.assert_allclose((g0 + g1)[ok], 1.0, atol=1e-12)
    np.testing.assert_allclose(alloc.sum(axis=2)[ok], 1.0, atol=1e-12)


def test_responsibility_guard_zero_parent_mass():
    M = np.array([[0.0, 0.5], [1.0, 0.5]])
    prm = EdgeParams(0.5, np.array([0.5, 0.5]), M)
    g0, g1, alloc = responsibilities(prm, [[0.3, 0.7]], [[1.0, 0.0]])
    assert g1[0, 0] == 0.0 and g0[0, 0] == pytest.approx(1.0)
    np.testing.assert_allclose(alloc[0, 0], [0.5, 0.5])


# ----------------------------------------------------------- one EM step


def tiny_instance(seed):
    """Tiny instance on which one unprojected step stays inside the floors and clamps."""
    cfg = EmConfig()
    rng = np.random.default_rng(seed)
    while True:
        n, dc, dp = int(rng.integers(1, 4)), int(rng.integers(2, 4)), int(rng.integers(2, 4))
        xc = rng.dirichlet(np.ones(dc), size=n)
        xp = rng.dirichlet(np.ones(dp), size=n)
        prm = random_params(rng, dc, dp)
        w0, eta, M = em_one_step(xc.tolist(), xp.tolist(), prm.omega0, prm.eta.tolist(), prm.M.tolist())
        if min(eta) > cfg.eta_min and cfg.omega_min < w0 < 1 - cfg.omega_min:
            return xc, xp, prm, (w0, np.array(eta), np.array(M))


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(25))
def test_one_step_matches_straight_line_oracle(seed, backend):
    xc, xp, prm, (w0, eta, M) = tiny_instance(seed)
    cfg = EmConfig(accelerate=False)
    out, trace, *_ = em_iterate(prm, xc, xp, cfg, max_iters=1, backend=backend)
    assert out.omega0 == pytest.approx(w0, rel=1e-12)
    np.testing.assert_allclose(out.eta, eta, rtol=1e-12)
    np.testing.assert_allclose(out.M, M, rtol=1e-12, atol=1e-300)
    assert len(trace) == 2


def test_one_step_single_sample_2x2():
    xc = np.array([[0.3, 0.7]])
    xp = np.array([[0.6, 0.4]])
    prm = EdgeParams(0.4, np.array([0.5, 0.5]), np.array([[0.8, 0.3], [0.2, 0.7]]))
    out, *_ = em_iterate(prm, xc, xp, EmConfig(accelerate=False), max_iters=1)
    w0, eta, M = em_one_step(xc.tolist(), xp.tolist(), 0.4, [0.5, 0.5], prm.M.tolist())
    assert out.omega0 == pytest.approx(w0, rel=1e-12)
    np.testing.assert_allclose(out.eta, eta, rtol=1e-12)
    np.testing.assert_allclose(out.M, M, rtol=1e-12)


# ------------------------------------------------------------ EM behaviour


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("accelerate", [False, True])
@given(
    n=st.integers(2, 80),
    dc=st.integers(2, 6),
    dp=st.integers(2, 6),
    rate=st.floats(0.0, 0.6),
    seed=st.integers(0, 2**32 - 1),
)
def test_em_monotone_feasible_nested(backend, accelerate, n, dc, dp, rate, seed):
    rng = np.random.default_rng(seed)
    xc = zero_inflated(rng, n, dc, rate)
    xp = zero_inflated(rng, n, dp, rate)
    cfg = EmConfig(max_iters=60, restarts=2, seed=seed, accelerate=accelerate)
    res = em_fit(xc, xp, cfg, backend=backend)
    steps = np.diff(res.risk_trace)
    assert np.all((steps <= 1e-10) | res.projected[1:])
    prm = res.params
    np.testing.assert_allclose(prm.M.sum(axis=0), 1.0, atol=1e-9)
    assert prm.M.min() >= 0.0
    assert prm.eta.sum() == pytest.approx(1.0, abs=1e-9)
    assert prm.eta.min() >= cfg.eta_min * (1 - 1e-12)
    assert cfg.omega_min <= prm.omega0 <= 1 - cfg.omega_min
    assert prm.omega0 + prm.omega1 == 1.0
    root = sample_risk(fit_root(xc, cfg.eta_min), xc)
    assert res.risk <= root + 1e-8
    assert res.risk == pytest.approx(sample_risk(prm, xc, xp), rel=1e-9, abs=1e-12)


def test_em_matches_or_beats_generating_params(rng):
    truth = EdgeParams(0.3, np.array([0.2, 0.3, 0.5]), np.array([[0.7, 0.1], [0.2, 0.1], [0.1, 0.8]]))
    xp = rng.dirichlet(np.ones(2), size=800)
    xc = predict(truth, xp)
    res = em_fit(xc, xp, EmConfig(max_iters=2000, rel_tol=1e-12))
    assert res.risk <= sample_risk(truth, xc, xp) + 1e-6


def test_degenerate_start_stays_at_root_fit(rng):
    xc = zero_inflated(rng, 50, 4, 0.2)
    xp = zero_inflated(rng, 50, 3, 0.2)
    cfg = EmConfig(accelerate=False)
    start = initial_params(xc, 3, cfg, restart=0)
    root = fit_root(xc, cfg.eta_min)
    np.testing.assert_array_equal(start.eta, root.eta)
    np.testing.assert_allclose(predict(start, xp), np.broadcast_to(root.eta, (50, 4)), atol=1e-15)
    out, trace, *_ = em_iterate(start, xc, xp, cfg, max_iters=1)
    root_risk = sample_risk(root, xc)
    assert trace[0] == pytest.approx(root_risk, rel=1e-12)
    # the baseline share and baseline composition are fixed points of the degenerate start
    assert out.omega0 == pytest.approx(0.5, rel=1e-12)
    np.testing.assert_allclose(out.eta, root.eta, rtol=1e-10)
    assert trace[1] <= root_risk + 1e-10


def test_restarts_are_seeded_and_distinct():
    xc = np.full((3, 3), 1 / 3)
    cfg = EmConfig(seed=7)
    a = initial_params(xc, 4, cfg, 2, stream=(0, 1))
    b = initial_params(xc, 4, cfg, 2, stream=(0, 1))
    c = initial_params(xc, 4, cfg, 3, stream=(0, 1))
    np.testing.assert_array_equal(a.M, b.M)
    assert not np.array_equal(a.M, c.M)
    np.testing.assert_allclose(a.M.sum(axis=0), 1.0)


@pytest.mark.skipif(BACKEND != "cython", reason="compiled kernel not built")
@pytest.mark.parametrize("accelerate", [False, True])
def test_backends_agree(rng, accelerate):
    xc = zero_inflated(rng, 300, 5, 0.2)
    xp = zero_inflated(rng, 300, 4, 0.2)
    cfg = EmConfig(seed=3, accelerate=accelerate)
    a = em_fit(xc, xp, cfg, backend="python")
    b = em_fit(xc, xp, cfg, backend="cython")
    assert a.risk == pytest.approx(b.risk, rel=1e-9)
    if not accelerate:
        np.testing.assert_allclose(a.params.M, b.params.M, atol=1e-10)
        assert a.iterations == b.iterations


def test_get_run_em_names():
    assert callable(get_run_em("python"))
    with pytest.raises(ValueError):
        get_run_em("fortran")


def test_em_errors():
    with pytest.raises(EmptyData):
        em_fit(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(DimensionMismatch):
        em_fit(np.full((3, 2), 0.5), np.full((4, 2), 0.5))
    with pytest.raises(ValueError):
        em_fit(np.full((3, 2), 0.5), np.full((3, 2), 0.5), EmConfig(eta_min=0.6))


@pytest.mark.parametrize(
    "kwargs",
    [dict(max_iters=0), dict(rel_tol=0.0), dict(omega_min=0.5), dict(eta_min=0.0), dict(restarts=0), dict(seed=-1)],
)
def test_em_config_validation(kwargs):
    with pytest.raises(ValueError):
        EmConfig(**kwargs)


def test_em_config_epsilon0():
    assert EmConfig().epsilon0 == pytest.approx(1e-10)


# ----------------------------------------------------------------- roots


def test_fit_root_examples():
    np.testing.assert_allclose(fit_root(np.array([[0.2, 0.8]])).eta, [0.2, 0.8])
    np.testing.assert_allclose(fit_root(np.array([[1.0, 0.0], [0.0, 1.0]])).eta, [0.5, 0.5])
    eta = fit_root(np.array([[0.0, 1.0]] * 3), eta_min=1e-6).eta
    np.testing.assert_allclose(eta, [1e-6, 1 - 1e-6], rtol=1e-12)
    with pytest.raises(EmptyData):
        fit_root(np.zeros((0, 3)))


def test_sample_risk_examples(rng):
    prm = random_params(rng, 3, 2)
    xp = rng.dirichlet(np.ones(2), size=5)
    assert sample_risk(prm, predict(prm, xp), xp) == pytest.approx(0.0, abs=1e-15)
    eta = np.array([0.1, 0.9])
    assert sample_risk(RootParams(eta), np.tile(eta, (4, 1))) == pytest.approx(0.0, abs=1e-15)
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert sample_risk(RootParams(np.array([0.5, 0.5])), rows) == pytest.approx(math.log(2), rel=1e-15)


def test_sample_risk_argument_errors(rng):
    prm = random_params(rng, 3, 2)
    with pytest.raises(ValueError):
        sample_risk(prm, np.full((2, 3), 1 / 3))
    with pytest.raises(ValueError):
        sample_risk(RootParams(np.array([0.5, 0.5])), np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    with pytest.raises(DimensionMismatch):
        sample_risk(RootParams(np.array([0.5, 0.5])), np.full((2, 3), 1 / 3))
