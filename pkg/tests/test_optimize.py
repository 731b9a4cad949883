import math

import numpy as np
import pytest
from scipy import stats

from oais import (
    MissingNormalizerError,
    ParameterBox,
    PreconditionError,
    ScheduleConfig,
    last_iterate_shortcut,
    run_exact_gd,
    run_sgd_averaged,
    run_sgd_vanilla,
)
from oais.optimize import make_streams
from oais.oracles import GaussianOracle, QuadratureOracle, estimate_lipschitz

SQRT = ScheduleConfig("inverse-sqrt", 0.5)


def test_schedule():
    s = ScheduleConfig("inverse-sqrt", 0.5)
    steps = [s.step(k) for k in range(1, 6)]
    assert steps[0] == 0.5 and steps[3] == 0.25
    assert all(a > b for a, b in zip(steps, steps[1:]))
    assert ScheduleConfig("constant", 0.1).step(7) == 0.1
    for bad in [("constant", 0.0), ("linear", 1.0)]:
        with pytest.raises(ValueError):
            ScheduleConfig(*bad)
    with pytest.raises(ValueError):
        s.step(0)


def test_streams_deterministic_and_distinct():
    a1, b1 = make_streams(5)
    a2, b2 = make_streams(5)
    x = a1.random(4)
    np.testing.assert_array_equal(x, a2.random(4))
    assert not np.array_equal(b1.random(4), x)
    c, _ = make_streams(np.random.SeedSequence([5, 1]))
    assert not np.array_equal(c.random(4), x)


@pytest.fixture
def gd_setup(std_prop, std_target):
    box = ParameterBox([-2.0], [2.0])
    oracle = GaussianOracle(std_prop, std_target)
    return box, oracle, estimate_lipschitz(oracle.grad, box)


def test_exact_gd_fixed_point(std_prop, std_target, phi, gd_setup):
    box, oracle, L = gd_setup
    tr = run_exact_gd(std_prop, std_target, box, [0.0], ScheduleConfig("constant", 1 / L), 20, 50, phi,
                      seed=1, oracle=oracle, lipschitz=L)
    np.testing.assert_array_equal(tr.theta, 0.0)


def test_exact_gd_lemma_bound(std_prop, std_target, phi, gd_setup):
    box, oracle, L = gd_setup
    gamma = 1 / L
    tr = run_exact_gd(std_prop, std_target, box, [2.0], ScheduleConfig("constant", gamma), 200, 100, phi,
                      seed=2, oracle=oracle, lipschitz=L)
    rho = tr.rho_true
    assert np.all(np.diff(rho) <= 1e-15)
    t = tr.t
    assert np.all(rho - 1.0 <= 4.0 / (2 * gamma * t))
    assert tr.extra["lipschitz"] == L


def test_exact_gd_guards(std_prop, std_target, unnorm_target, bimodal, phi, gd_setup):
    box, oracle, L = gd_setup
    with pytest.raises(PreconditionError):
        run_exact_gd(std_prop, std_target, box, [1.0], ScheduleConfig("constant", 2 / L), 5, 10, phi,
                     oracle=oracle, lipschitz=L)
    with pytest.raises(PreconditionError):
        run_exact_gd(std_prop, std_target, box, [1.0], SQRT, 5, 10, phi, oracle=oracle, lipschitz=L)
    with pytest.raises(PreconditionError):
        run_exact_gd(std_prop, std_target, box, [3.0], ScheduleConfig("constant", 1 / L), 5, 10, phi,
                     oracle=oracle, lipschitz=L)
    with pytest.raises(MissingNormalizerError):
        run_exact_gd(std_prop, unnorm_target, box, [1.0], ScheduleConfig("constant", 1 / L), 5, 10, phi,
                     estimator="is", oracle=oracle, lipschitz=L)


def test_exact_gd_quadrature_oracle(bimodal, phi):
    from oais import gaussian_mean_family
    prop = gaussian_mean_family(4.0)
    box = ParameterBox([-0.5], [0.5])
    oracle = QuadratureOracle(prop, bimodal, box)
    L = estimate_lipschitz(oracle.grad, box)
    tr = run_exact_gd(prop, bimodal, box, [0.5], ScheduleConfig("constant", 1 / L), 60, 100, phi, seed=0)
    assert np.all(np.diff(tr.rho_true) <= 0)
    assert tr.extra["lipschitz"] == pytest.approx(L, rel=1e-12)
    assert tr.rho_true[-1] == pytest.approx(1.3524404836102317, rel=1e-6)


def _zero(theta):
    return np.zeros_like(theta)


@pytest.mark.parametrize("runner", [run_sgd_vanilla, run_sgd_averaged])
def test_zero_gradient_keeps_theta(std_prop, std_target, box1, phi, runner):
    tr = runner(std_prop, std_target, box1, [1.0], SQRT, 15, 40, phi, seed=3, gradient_override=_zero)
    np.testing.assert_array_equal(tr.theta, 1.0)
    np.testing.assert_array_equal(tr.theta_bar, 1.0)
    np.testing.assert_array_equal(tr.deployed, 1.0)


def test_theta_bar_is_running_mean(std_prop, std_target, box1, phi):
    # constant unit steps drive θ through 0, 1, 2
    tr = run_sgd_averaged(std_prop, std_target, ParameterBox([-5.0], [5.0]), [0.0],
                          ScheduleConfig("constant", 1.0), 3, 10, phi, seed=0,
                          gradient_override=lambda th: -np.ones(1))
    np.testing.assert_allclose(tr.theta[:3, 0], [0.0, 1.0, 2.0])
    assert tr.theta_bar[2, 0] == 1.0


@pytest.mark.parametrize("runner", [run_sgd_vanilla, run_sgd_averaged])
@pytest.mark.parametrize("path", ["normalized", "self-normalized"])
def test_trace_invariants(std_prop, std_target, unnorm_target, box1, phi, runner, path):
    target = std_target if path == "normalized" else unnorm_target
    sched = SQRT if path == "normalized" else ScheduleConfig("inverse-sqrt", 0.005)
    tr = runner(std_prop, target, box1, [1.5], sched, 60, 100, phi, seed=11, path=path)
    assert tr.theta.shape == (61, 1) and tr.estimate.shape == (60,)
    assert all(box1.contains(th) for th in tr.theta)
    recomputed = np.cumsum(tr.theta[:-1], axis=0) / tr.t[:, None]
    np.testing.assert_allclose(tr.theta_bar, recomputed, atol=1e-12)
    assert np.all(tr.ess <= 100 * (1 + 1e-12))
    assert np.all(np.isfinite(tr.estimate))
    assert abs(tr.deployed[-1, 0]) < 0.5


@pytest.mark.parametrize("runner", [run_sgd_vanilla, run_sgd_averaged])
def test_bitwise_reproducible(std_prop, std_target, box1, phi, runner):
    a = runner(std_prop, std_target, box1, [1.5], SQRT, 30, 50, phi, seed=99)
    b = runner(std_prop, std_target, box1, [1.5], SQRT, 30, 50, phi, seed=99)
    assert a.to_bytes() == b.to_bytes()
    c = runner(std_prop, std_target, box1, [1.5], SQRT, 30, 50, phi, seed=100)
    assert a.to_bytes() != c.to_bytes()


def test_unit_z_paths_coincide(std_prop, phi, box1):
    from oais import make_gaussian_target
    tgt = make_gaussian_target([0.0], 1.0, normalized=False, log_z_offset=0.0)
    norm = make_gaussian_target([0.0], 1.0)
    for runner in (run_sgd_vanilla, run_sgd_averaged):
        a = runner(std_prop, norm, box1, [1.5], SQRT, 40, 80, phi, seed=5, path="normalized")
        b = runner(std_prop, tgt, box1, [1.5], SQRT, 40, 80, phi, seed=5, path="self-normalized")
        np.testing.assert_array_equal(a.theta, b.theta)


def test_self_normalized_needs_no_log_z(std_prop, unnorm_target, box1, phi):
    with pytest.raises(MissingNormalizerError):
        run_sgd_averaged(std_prop, unnorm_target, box1, [1.0], SQRT, 5, 10, phi, path="normalized")
    with pytest.raises(MissingNormalizerError):
        run_sgd_vanilla(std_prop, unnorm_target, box1, [1.0], SQRT, 5, 10, phi, estimator="is")


def test_vanilla_reuses_previous_particles(std_prop, std_target, box1, phi):
    # with n=1 the first step is driven by the bootstrap draw from the gradient stream
    tr = run_sgd_vanilla(std_prop, std_target, box1, [1.0], ScheduleConfig("constant", 0.01), 2, 1, phi, seed=4)
    _, rng_grad = make_streams(4)
    x0 = std_prop.sample([1.0], rng_grad, 1)
    w2 = math.exp(2 * (std_target.log_unnormalized(x0) - std_prop.log_density([1.0], x0))[0])
    expected = 1.0 - 0.01 * (1.0 - x0[0, 0]) * w2
    assert tr.theta[1, 0] == pytest.approx(expected, rel=1e-12)


def test_nonfinite_gradient_skipped(std_prop, std_target, box1, phi, caplog):
    calls = iter([np.array([np.nan]), np.array([1.0])])
    with caplog.at_level("WARNING", logger="oais.optimize"):
        tr = run_sgd_averaged(std_prop, std_target, box1, [1.0], ScheduleConfig("constant", 0.1), 2, 10,
                              phi, seed=0, gradient_override=lambda th: next(calls))
    np.testing.assert_array_equal(tr.skipped, [True, False])
    assert tr.theta[1, 0] == 1.0 and tr.theta[2, 0] == pytest.approx(0.9)
    assert "step skipped" in caplog.text


def test_variance_guard_flags_but_steps(std_prop, std_target, box1, phi):
    tr = run_sgd_averaged(std_prop, std_target, box1, [1.0], ScheduleConfig("constant", 0.1), 3, 10, phi,
                          seed=0, log_ratio_cap=-1.0)
    assert tr.flagged.all() and not tr.skipped.any()
    assert tr.theta[-1, 0] != 1.0


def test_shortcut_matches_full_run(std_prop, std_target, box1, phi):
    full = run_sgd_averaged(std_prop, std_target, box1, [1.5], SQRT, 40, 60, phi, seed=12)
    short = last_iterate_shortcut(std_prop, std_target, box1, [1.5], SQRT, 40, 60, phi, seed=12)
    np.testing.assert_array_equal(short.theta_bar, full.theta_bar[-1])
    np.testing.assert_array_equal(short.thetas, full.theta[:40])


def test_shortcut_t1_is_fixed_proposal(std_prop, std_target, box1, phi):
    from oais import draw_particles, snis_estimate
    res = last_iterate_shortcut(std_prop, std_target, box1, [0.7], SQRT, 1, 100, phi, seed=8)
    rng_est, _ = make_streams(8)
    ref = snis_estimate(draw_particles(std_prop, [0.7], std_target, 100, rng_est), phi)
    assert res.estimate == ref
    np.testing.assert_array_equal(res.theta_bar, [0.7])
    with pytest.raises(ValueError):
        last_iterate_shortcut(std_prop, std_target, box1, [0.7], SQRT, 0, 100, phi)


def test_shortcut_is_faster(std_prop, std_target, box1, phi):
    full = run_sgd_averaged(std_prop, std_target, box1, [1.5], SQRT, 1000, 1000, phi, seed=1)
    short = last_iterate_shortcut(std_prop, std_target, box1, [1.5], SQRT, 1000, 1000, phi, seed=1)
    assert short.wall_time < full.wall_time


def test_rho_convex_along_segment(bimodal):
    from oais import gaussian_mean_family
    prop = gaussian_mean_family(4.0)
    box = ParameterBox([-1.0], [1.0])
    quad = QuadratureOracle(prop, bimodal, box)
    t0, ts = np.array([1.0]), np.array([0.0])
    for lam in (0.25, 0.5, 0.75):
        assert quad.rho(lam * t0 + (1 - lam) * ts) <= lam * quad.rho(t0) + (1 - lam) * quad.rho(ts)


def test_step_size_sample_size_coupling(std_prop, std_target, phi):
    box = ParameterBox([-1.5], [1.5])
    betas = np.array([0.2, 0.1, 0.05])
    mses = []
    for beta in betas:
        n, t = math.ceil(1 / beta), math.ceil(1 / beta**2)
        ests = [
            last_iterate_shortcut(std_prop, std_target, box, [1.5], ScheduleConfig("inverse-sqrt", beta),
                                  t, n, phi, seed=[int(1 / beta), s]).estimate
            for s in range(400)
        ]
        mses.append(np.mean(np.square(ests)))
    fit = stats.linregress(betas, mses)
    assert fit.slope > 0 and fit.rvalue**2 >= 0.8
