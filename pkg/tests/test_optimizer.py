"""Momentum SGD stepper and driver: exact recursions, determinism, averaging,
divergence handling, burn-in rule."""

import math

import numpy as np
import pytest

from sgdmlab import (
    AveragingState,
    DivergedError,
    GammaMode,
    HessianSpectrum,
    MomentumConfig,
    OptimizerState,
    RngStream,
    Trajectory,
    adaptive_gamma,
    choose_burn_in,
    generate_quadratic,
    read_csv,
    resolve_gamma,
    run,
    sgdm_step,
    spectral_radius_closed_form,
)
from sgdmlab.problems import QuadraticProblem


def constant_quadratic(dim=3, n=16):
    """All components share one Hessian and b_i = A x_star, so every
    mini-batch gradient vanishes identically at the minimizer."""
    base = generate_quadratic(n, dim, 1.0, 10.0, 2)
    a = base.sigma_hat.copy()
    x_true = np.arange(1.0, dim + 1.0)
    b = a @ x_true
    ev = np.linalg.eigvalsh(a)
    return QuadraticProblem(
        a_mats=np.repeat(a[None], n, axis=0),
        b_vecs=np.repeat(b[None], n, axis=0),
        x_star=x_true,
        sigma_hat=a,
        mu=float(ev[0]),
        ell=float(ev[-1]),
        sigma2=0.0,
        omega=np.eye(dim) / dim,
        seed=0,
        rho=1.0,
        diag_shift=10.0,
    )


# ---------------------------------------------------------------------------
# single step

def test_step_gamma_zero_is_plain_sgd():
    cfg = MomentumConfig(alpha=0.2, gamma=0.0)
    state = OptimizerState(x=np.array([1.0, -2.0]), m=np.zeros(2), t=1, config=cfg)
    g = np.array([0.5, 1.5])
    nxt = sgdm_step(state, g)
    assert np.array_equal(nxt.m, g)
    assert np.array_equal(nxt.x, state.x - 0.2 * g)
    assert nxt.t == 2


def test_step_zero_gradient_zero_momentum_is_fixed_point():
    cfg = MomentumConfig(alpha=0.2, gamma=0.7)
    state = OptimizerState(x=np.array([1.0, -2.0]), m=np.zeros(2), t=5, config=cfg)
    nxt = sgdm_step(state, np.zeros(2))
    assert np.array_equal(nxt.x, state.x)
    assert np.array_equal(nxt.m, np.zeros(2))
    assert nxt.t == 6


def test_step_first_momentum_step_scales_gradient():
    cfg = MomentumConfig(alpha=0.1, gamma=0.9)
    x = np.array([0.0, 1.0, 2.0])
    g = np.array([1.0, -1.0, 4.0])
    nxt = sgdm_step(OptimizerState(x=x, m=np.zeros(3), t=1, config=cfg), g)
    assert np.allclose(nxt.m, 0.1 * g, atol=1e-16)
    assert np.allclose(nxt.x, x - 0.01 * g, atol=1e-16)


def test_step_is_pure():
    cfg = MomentumConfig(alpha=0.1, gamma=0.5)
    x = np.array([1.0, 2.0])
    m = np.array([0.3, -0.1])
    state = OptimizerState(x=x.copy(), m=m.copy(), t=3, config=cfg)
    sgdm_step(state, np.array([1.0, 1.0]))
    assert np.array_equal(state.x, x)
    assert np.array_equal(state.m, m)
    assert state.t == 3


def test_step_rejects_bad_gradient():
    cfg = MomentumConfig(alpha=0.1)
    state = OptimizerState(x=np.zeros(2), m=np.zeros(2), t=7, config=cfg)
    with pytest.raises(ValueError):
        sgdm_step(state, np.zeros(3))
    with pytest.raises(DivergedError) as err:
        sgdm_step(state, np.array([1.0, math.nan]))
    assert err.value.step == 7


# ---------------------------------------------------------------------------
# driver

def test_run_stays_at_minimizer_without_noise():
    p = constant_quadratic()
    cfg = MomentumConfig(alpha=0.01, gamma=0.5, batch_size=4)
    state, avg, traj = run(p, cfg, iters=50, seed=3, x_init=p.x_star)
    assert np.array_equal(state.x, p.x_star)
    assert traj.err_last.max() == 0.0
    assert np.linalg.norm(avg.mean - p.x_star) == 0.0


def test_run_is_deterministic():
    p = generate_quadratic(60, 4, 1.0, 10.0, 1)
    cfg = MomentumConfig(alpha=0.01, gamma=0.6, batch_size=8)
    s1, _, t1 = run(p, cfg, iters=120, seed=9, n0=20)
    s2, _, t2 = run(p, cfg, iters=120, seed=9, n0=20)
    assert np.array_equal(s1.x, s2.x)
    assert np.array_equal(t1.err_last, t2.err_last)
    assert np.array_equal(t1.err_avg[20:], t2.err_avg[20:])


def test_run_matches_inlined_reference_loop():
    p = generate_quadratic(60, 4, 1.0, 10.0, 1)
    cfg = MomentumConfig(alpha=0.01, gamma=0.6, batch_size=8)
    state, _, _ = run(p, cfg, iters=80, seed=5)
    rng = RngStream(5)
    ref = OptimizerState(x=np.zeros(4), m=np.zeros(4), t=1, config=cfg)
    for _ in range(80):
        idx = rng.batch_indices(p.n_samples, 8)
        ref = sgdm_step(ref, p.minibatch_gradient(ref.x, idx))
    assert np.array_equal(state.x, ref.x)
    assert np.array_equal(state.m, ref.m)


def test_run_gamma_zero_matches_plain_sgd_loop():
    p = generate_quadratic(60, 4, 1.0, 10.0, 6)
    cfg = MomentumConfig(alpha=0.02, gamma=0.0, batch_size=8)
    state, _, _ = run(p, cfg, iters=60, seed=7)
    rng = RngStream(7)
    x = np.zeros(4)
    for _ in range(60):
        idx = rng.batch_indices(p.n_samples, 8)
        g = p.minibatch_gradient(x, idx)
        x = x - 0.02 * ((1.0 - 0.0) * g)
    assert np.array_equal(state.x, x)


def test_run_records_all_early_steps_then_stride():
    p = generate_quadratic(40, 3, 1.0, 10.0, 8)
    cfg = MomentumConfig(alpha=0.005, gamma=0.3, batch_size=4)
    _, _, traj = run(p, cfg, iters=1500, seed=2, n0=500, record_stride=100)
    want = list(range(1, 1001)) + [1100, 1200, 1300, 1400, 1500]
    assert traj.steps.tolist() == want
    assert math.isnan(traj.err_avg[499])
    assert math.isfinite(traj.err_avg[500])


def test_run_divergence_raises_with_step():
    p = generate_quadratic(40, 3, 1.0, 10.0, 8)
    cfg = MomentumConfig(alpha=10.0, gamma=0.0, batch_size=4)
    with pytest.raises(DivergedError) as err:
        run(p, cfg, iters=500, seed=1, x_init=p.x_star + 1.0)
    assert isinstance(err.value.step, int)
    assert 1 <= err.value.step <= 500
    assert "blow-up" in str(err.value) or "non-finite" in str(err.value)


def test_run_custom_blowup_triggers_earlier():
    p = generate_quadratic(40, 3, 1.0, 10.0, 8)
    cfg = MomentumConfig(alpha=10.0, gamma=0.0, batch_size=4)
    with pytest.raises(DivergedError) as tight:
        run(p, cfg, iters=500, seed=1, x_init=p.x_star + 1.0, blowup=1e2)
    with pytest.raises(DivergedError) as loose:
        run(p, cfg, iters=500, seed=1, x_init=p.x_star + 1.0, blowup=1e9)
    assert tight.value.step <= loose.value.step


def test_run_validates_arguments():
    p = generate_quadratic(40, 3, 1.0, 10.0, 8)
    with pytest.raises(ValueError):
        run(p, MomentumConfig(alpha=0.01), iters=0, seed=1)
    with pytest.raises(ValueError):
        run(p, MomentumConfig(alpha=0.01), iters=10, seed=1, n0=10)
    with pytest.raises(ValueError, match="alpha must be positive"):
        run(p, MomentumConfig(alpha=0.0), iters=10, seed=1)


def test_resolve_gamma_adaptive_uses_problem_curvature():
    p = generate_quadratic(60, 4, 1.0, 10.0, 1)
    cfg = MomentumConfig(alpha=0.02, gamma_mode=GammaMode.ADAPTIVE)
    assert resolve_gamma(p, cfg) == adaptive_gamma(p.mu, 0.02)
    fixed = MomentumConfig(alpha=0.02, gamma=0.4)
    assert resolve_gamma(p, fixed) == 0.4


# ---------------------------------------------------------------------------
# dynamics match the spectral theory

def test_full_batch_rate_matches_closed_form_radius():
    p = generate_quadratic(60, 4, 0.0, 2.5, 11)  # isotropic Hessian 2.5 I
    cfg = MomentumConfig(alpha=0.1, gamma=0.2)
    rep = spectral_radius_closed_form(HessianSpectrum.from_extremes(2.5, 2.5), cfg)
    assert rep.branch == "real"
    state = OptimizerState(
        x=p.x_star + np.array([1.0, -0.5, 0.3, 0.8]), m=np.zeros(4), t=1, config=cfg
    )
    errs = []
    for _ in range(60):
        state = sgdm_step(state, p.full_gradient(state.x))
        errs.append(np.linalg.norm(state.x - p.x_star))
    rate = (errs[59] / errs[19]) ** (1.0 / 40.0)
    assert abs(rate - rep.lam) <= 1e-9


def test_full_batch_sgd_contracts_by_exact_factor_each_step():
    p = generate_quadratic(60, 4, 0.0, 2.5, 11)
    cfg = MomentumConfig(alpha=0.1, gamma=0.0)
    state = OptimizerState(
        x=p.x_star + np.array([1.0, -0.5, 0.3, 0.8]), m=np.zeros(4), t=1, config=cfg
    )
    prev = np.linalg.norm(state.x - p.x_star)
    for _ in range(20):
        state = sgdm_step(state, p.full_gradient(state.x))
        err = np.linalg.norm(state.x - p.x_star)
        assert abs(err / prev - 0.75) <= 1e-12  # |1 - alpha * curvature|
        prev = err


def test_adaptive_momentum_reaches_threshold_before_sgd():
    p = generate_quadratic(100, 6, 1.0, 10.0, 4)
    alpha = 0.005
    start = p.x_star + np.array([1.0, -0.5, 0.3, 0.8, -1.2, 0.4])
    e0 = np.linalg.norm(start - p.x_star)

    def steps_to_threshold(gamma):
        state = OptimizerState(
            x=start, m=np.zeros(6), t=1,
            config=MomentumConfig(alpha=alpha, gamma=gamma),
        )
        for t in range(1, 20001):
            state = sgdm_step(state, p.full_gradient(state.x))
            if np.linalg.norm(state.x - p.x_star) <= 1e-3 * e0:
                return t
        raise AssertionError("threshold never reached")

    assert steps_to_threshold(adaptive_gamma(p.mu, alpha)) < steps_to_threshold(0.0)


# ---------------------------------------------------------------------------
# averaging

def test_averaging_matches_arithmetic_mean():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((40, 5))
    avg = AveragingState(n0=15)
    for t, x in enumerate(xs, start=1):
        avg.fold(x, t)
    want = xs[15:].mean(axis=0)
    assert avg.count == 25
    assert np.allclose(avg.mean, want, atol=1e-12 * avg.count)


def test_averaging_before_burn_in_raises():
    avg = AveragingState(n0=10)
    avg.fold(np.ones(2), 5)
    assert avg.count == 0
    with pytest.raises(ValueError):
        avg.mean


# ---------------------------------------------------------------------------
# burn-in rule

def test_burn_in_examples():
    assert choose_burn_in(0.9, 4000) == 51
    assert choose_burn_in(0.99, 4000) == 642
    assert choose_burn_in(0.5, 1) == 1


def test_burn_in_least_integer_property():
    for lam in (0.3, 0.9, 0.99, 0.999):
        for batch in (1, 10, 4000):
            n = choose_burn_in(lam, batch)
            target = (1.0 - lam) / batch
            assert lam ** (2 * n) <= target
            if n > 1:
                assert lam ** (2 * (n - 1)) > target
            assert choose_burn_in(lam, batch, mode="linear") == n


def test_burn_in_validates_arguments():
    with pytest.raises(ValueError):
        choose_burn_in(1.0, 10)
    with pytest.raises(ValueError):
        choose_burn_in(0.0, 10)
    with pytest.raises(ValueError):
        choose_burn_in(0.5, 0)
    with pytest.raises(ValueError):
        choose_burn_in(0.5, 10, mode="cubic")


# ---------------------------------------------------------------------------
# trajectory serialization

def test_trajectory_csv_round_trip(tmp_path):
    p = generate_quadratic(40, 3, 1.0, 10.0, 8)
    cfg = MomentumConfig(alpha=0.01, gamma=0.4, batch_size=4)
    _, _, traj = run(p, cfg, iters=30, seed=2, n0=10, record_loss=True)
    path = str(tmp_path / "traj.csv")
    traj.to_csv(path, header={"alpha": 0.01, "gamma": 0.4})
    meta, rows = read_csv(path)
    assert meta["alpha"] == "0.01"
    assert len(rows) == 30
    got_err = np.array([r["err_last"] for r in rows])
    assert np.array_equal(got_err, traj.err_last)
    got_loss = np.array([r["loss"] for r in rows])
    assert np.array_equal(got_loss, traj.loss)
    assert all(math.isnan(r["err_avg"]) for r in rows[:10])
