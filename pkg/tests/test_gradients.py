import math

import numpy as np
import pytest

from oais import (
    MissingNormalizerError,
    ParameterBox,
    ParticleReuseError,
    PreconditionError,
    draw_particles,
    finite_diff_check,
    grad_oracle_gaussian,
    grad_r_mc,
    grad_rho_mc,
)
from oais.gradients import grad_from_particles
from oais.harness import fit_rate
from oais.oracles import GaussianOracle, QuadratureOracle


def test_zero_at_minimizer(std_prop, std_target):
    g = grad_rho_mc(std_prop, [0.0], std_target, n=10**6, rng=np.random.default_rng(1))
    assert g.norm <= 0.01
    assert g.kind == "normalized" and not g.reused_particles and g.n_used == 10**6


def test_value_at_unit_mean(std_prop, std_target):
    assert grad_oracle_gaussian([1.0], [0.0], 1.0)[0] == pytest.approx(2 * math.e, rel=1e-14)
    g = grad_rho_mc(std_prop, [1.0], std_target, n=10**6, rng=np.random.default_rng(2))
    assert g.vector[0] == pytest.approx(5.4366, rel=0.03)


def test_batch_mean_unbiased(std_prop, std_target):
    rng = np.random.default_rng(3)
    gs = np.array([grad_rho_mc(std_prop, [0.5], std_target, n=100, rng=rng).vector[0] for _ in range(1000)])
    se = gs.std(ddof=1) / math.sqrt(gs.size)
    assert abs(gs.mean() - grad_oracle_gaussian([0.5], [0.0], 1.0)[0]) < 3 * se


def test_r_gradient_scaling(std_prop, std_target, unnorm_target):
    rng = np.random.default_rng(4)
    a = np.array([grad_rho_mc(std_prop, [0.5], std_target, n=200, rng=rng).vector[0] for _ in range(800)])
    b = np.array([grad_r_mc(std_prop, [0.5], unnorm_target, n=200, rng=rng).vector[0] for _ in range(800)])
    exact = grad_oracle_gaussian([0.5], [0.0], 1.0)[0]
    assert abs(b.mean() - 100 * exact) < 3 * b.std(ddof=1) / math.sqrt(b.size)
    assert abs(a.mean() - exact) < 3 * a.std(ddof=1) / math.sqrt(a.size)


def test_r_gradient_is_exactly_scaled_on_same_particles(std_prop, unnorm_target):
    ps = draw_particles(std_prop, [0.8], unnorm_target, 500, np.random.default_rng(6))
    ps_norm = type(ps)(ps.points, ps.log_unnorm_weights, ps.snis_weights, ps.theta_used, math.log(10.0))
    g_r = grad_from_particles(std_prop, ps, "unnormalized")
    g_rho = grad_from_particles(std_prop, ps_norm, "normalized")
    np.testing.assert_allclose(g_r.vector, 100 * g_rho.vector, rtol=1e-12)


def test_r_gradient_zero_at_minimizer(std_prop, unnorm_target):
    g = grad_r_mc(std_prop, [0.0], unnorm_target, n=10**6, rng=np.random.default_rng(7))
    assert g.kind == "unnormalized"
    # ∇R = 100 ∇ρ, so the band scales by Z²
    assert g.norm <= 100 * 0.01


def test_normalized_needs_log_z(std_prop, unnorm_target):
    with pytest.raises(MissingNormalizerError):
        grad_rho_mc(std_prop, [0.0], unnorm_target, n=10, rng=np.random.default_rng(0))


def test_reuse_contract(std_prop, std_target):
    ps = draw_particles(std_prop, [0.3], std_target, 50, np.random.default_rng(0))
    g = grad_rho_mc(std_prop, [0.3], std_target, source=ps)
    assert g.reused_particles and g.n_used == 50
    with pytest.raises(ParticleReuseError):
        grad_rho_mc(std_prop, [0.31], std_target, source=ps)
    with pytest.raises(ValueError):
        grad_rho_mc(std_prop, [0.3], std_target, source="fresh")


def test_variance_guard_flags(std_prop, std_target):
    far = draw_particles(std_prop, [1.5], std_target, 2000, np.random.default_rng(1))
    g = grad_from_particles(std_prop, far, "normalized", log_ratio_cap=0.5)
    assert g.flagged and g.finite
    assert not grad_from_particles(std_prop, far, "normalized").flagged


@pytest.mark.parametrize("kind", ["rho", "r"])
def test_mse_rate(std_prop, std_target, unnorm_target, kind):
    ns = np.array([100, 1000, 10000])
    exact = grad_oracle_gaussian([0.5], [0.0], 1.0)
    if kind == "r":
        exact = 100 * exact
    mse = []
    for n in ns:
        rng = np.random.default_rng([int(n), 1 if kind == "r" else 0])
        if kind == "rho":
            gs = [grad_rho_mc(std_prop, [0.5], std_target, n=int(n), rng=rng).vector for _ in range(300)]
        else:
            gs = [grad_r_mc(std_prop, [0.5], unnorm_target, n=int(n), rng=rng).vector for _ in range(300)]
        mse.append(np.mean(np.sum((np.array(gs) - exact) ** 2, axis=1)))
    assert fit_rate(ns, mse).slope == pytest.approx(-1.0, abs=0.2)


def test_oracle_examples():
    np.testing.assert_array_equal(grad_oracle_gaussian([0.4, -0.2], [0.8, -0.4], 2.0), [0.0, 0.0])
    d = np.array([0.3, -0.7])
    star = np.array([1.0, 2.0])
    np.testing.assert_allclose(
        grad_oracle_gaussian(star + d, star, 1.0), -grad_oracle_gaussian(star - d, star, 1.0), rtol=1e-14
    )


def test_oracle_matches_quadrature_fd(std_prop, std_target):
    box = ParameterBox([-2.0], [2.0])
    quad = QuadratureOracle(std_prop, std_target, box)
    for theta in (-1.2, 0.3, 1.0):
        err = finite_diff_check(quad.rho, lambda t: grad_oracle_gaussian(t, [0.0], 1.0), [theta], 1e-4, box)
        assert err <= 1e-5


def test_quadrature_gradient_matches_closed_form(bimodal):
    from oais import gaussian_mean_family
    prop = gaussian_mean_family(4.0)
    box = ParameterBox([-1.0], [1.0])
    quad = QuadratureOracle(prop, bimodal, box)
    for theta in (-0.6, 0.25, 0.8):
        assert finite_diff_check(quad.rho, quad.grad, [theta], 1e-4, box) <= 1e-5


def test_fd_on_quadratic():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    f = lambda t: 0.5 * t @ a @ t + t.sum()
    assert finite_diff_check(f, lambda t: a @ t + 1, [0.4, -1.3]) <= 1e-9


def test_fd_rejects_wrong_gradient():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    f = lambda t: 0.5 * t @ a @ t
    err = finite_diff_check(f, lambda t: 2 * (a @ t), [0.4, -1.3])
    assert err == pytest.approx(1.0, abs=1e-6)


def test_fd_boundary_precondition():
    box = ParameterBox([-1.0], [1.0])
    with pytest.raises(PreconditionError):
        finite_diff_check(lambda t: float(t @ t), lambda t: 2 * t, [1.0 - 5e-5], 1e-4, box)
    with pytest.raises(ValueError):
        finite_diff_check(lambda t: float(t @ t), lambda t: 2 * t, [0.0], 0.0)


def test_gaussian_oracle_hessian():
    from oais import gaussian_mean_family, make_gaussian_target
    prop = gaussian_mean_family(1.5, 2)
    target = make_gaussian_target([0.3, -0.6], 1.5)
    o = GaussianOracle(prop, target)
    t = np.array([0.5, 0.1])
    h = 1e-5
    fd = np.column_stack([(o.grad(t + h * e) - o.grad(t - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(o.hessian(t), fd, rtol=1e-6)
    np.testing.assert_allclose(o.theta_star(), [0.2, -0.4])
