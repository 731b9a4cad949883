"""Independent ground-truth oracles for low-dimensional fixtures.

These never touch the Monte Carlo code paths: ρ, R, ∇ρ and (φ, π) are
computed either in closed form (in-family Gaussian) or by trapezoidal
quadrature on a fixed grid, which is spectrally accurate for the smooth,
rapidly decaying integrands ρ and ∇ρ. Expectations (φ, π) use adaptive
quadrature since φ may be discontinuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import nquad, quad
from scipy.optimize import minimize
from scipy.special import logsumexp

from .proposal import ExpFamilyProposal, ParameterBox
from .target import TargetDensity, TestFunction

__all__ = [
    "QuadratureOracle",
    "GaussianOracle",
    "make_oracle",
    "locate_minimizer",
    "estimate_lipschitz",
]


class QuadratureOracle:
    """ρ(θ) = ∫ π²/q_θ and friends by quadrature, for targets with ``dim <= 2``.

    The grid is fixed at construction (padded so that it covers π²/q_θ for
    every θ in ``box``), which keeps ρ a smooth function of θ and safe to
    finite-difference.
    """

    def __init__(
        self,
        prop: ExpFamilyProposal,
        target: TargetDensity,
        box: ParameterBox | None = None,
        nodes: int | None = None,
    ):
        if target.dim > 2:
            raise ValueError("quadrature oracle supports dim <= 2 only")
        if target.bounds is None:
            raise ValueError("target carries no quadrature bounds")
        self.prop = prop
        self.target = target
        lo, hi = (np.asarray(b, dtype=float) for b in target.bounds)
        if box is not None:
            centre = 0.5 * (lo + hi)
            corners = [prop.mean_suff_stat(c) for c in (box.lower, box.upper)]
            pad = max(np.max(np.abs(c - centre)) for c in corners)
            lo, hi = lo - pad, hi + pad
        if nodes is None:
            nodes = 6001 if target.dim == 1 else 801
        axes = [np.linspace(a, b, nodes) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.grid = np.stack([m.ravel() for m in mesh], axis=1)
        self._log_cell = float(sum(math.log(ax[1] - ax[0]) for ax in axes))
        # trapezoid end-weights; the integrands are negligible there anyway
        w = np.ones([nodes] * target.dim)
        for k in range(target.dim):
            idx = [slice(None)] * target.dim
            for end in (0, -1):
                idx[k] = end
                w[tuple(idx)] *= 0.5
        self._log_trap = np.log(w.ravel())
        self._log_pi_unnorm = target.log_unnorm(self.grid)
        self.log_z = float(logsumexp(self._log_pi_unnorm + self._log_trap) + self._log_cell)
        self._log_pi = self._log_pi_unnorm - self.log_z

    def _integrate_log(self, log_f: np.ndarray) -> float:
        return float(logsumexp(log_f + self._log_trap) + self._log_cell)

    def log_rho(self, theta) -> float:
        log_q = self.prop.log_density(theta, self.grid)
        return self._integrate_log(2.0 * self._log_pi - log_q)

    def rho(self, theta) -> float:
        return math.exp(self.log_rho(theta))

    def r(self, theta) -> float:
        """R(θ) = Z² ρ(θ) with the quadrature normalizer."""
        return math.exp(self.log_rho(theta) + 2.0 * self.log_z)

    def grad(self, theta) -> np.ndarray:
        """∇ρ(θ) = ∫ (∇A(θ) - T(x)) π²(x)/q_θ(x) dx."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        log_f = 2.0 * self._log_pi - self.prop.log_density(theta, self.grid)
        m = log_f.max()
        f = np.exp(log_f - m + self._log_trap)
        diff = self.prop.mean_suff_stat(theta)[None, :] - self.prop.suff_stat(self.grid)
        return (diff * f[:, None]).sum(axis=0) * math.exp(m + self._log_cell)

    def expectation(self, phi: TestFunction) -> float:
        """(φ, π) by adaptive quadrature over the target bounds.

        Adaptive rather than grid-based because test functions such as
        indicators are discontinuous, where the trapezoid rule is only O(h).
        """
        lo, hi = (np.asarray(b, dtype=float) for b in self.target.bounds)
        log_z = self.log_z
        log_pi = self.target.log_unnorm

        def integrand(*x):
            pt = np.array(x, dtype=float)[None, :]
            return math.exp(float(log_pi(pt)[0]) - log_z) * float(phi(pt)[0])

        opts = {"limit": 500, "epsabs": 1e-13, "epsrel": 1e-12}
        if self.target.dim == 1:
            return float(quad(integrand, lo[0], hi[0], **opts)[0])
        return float(nquad(integrand, list(zip(lo, hi)), opts={**opts, "limit": 200,
                                                                  "epsabs": 1e-10, "epsrel": 1e-10})[0])

    def total_mass(self) -> float:
        """∫ π on the grid, using the declared normalizer when present."""
        log_z = self.target.log_z if self.target.log_z is not None else self.log_z
        return math.exp(self._integrate_log(self._log_pi_unnorm - log_z))


class GaussianOracle:
    """Closed forms for a Gaussian target N(μ*, σ²I) and the mean family with the same σ².

    ρ(θ) = exp(‖σ²θ - μ*‖²/σ²), ∇ρ(θ) = 2(σ²θ - μ*) ρ(θ).
    """

    def __init__(self, prop: ExpFamilyProposal, target: TargetDensity):
        if prop.info.get("kind") != "gaussian_mean" or target.info.get("kind") != "gaussian":
            raise ValueError("closed forms need a Gaussian target and the Gaussian mean family")
        if not math.isclose(prop.info["variance"], target.info["variance"]):
            raise ValueError("closed forms need matching variances")
        self.prop = prop
        self.target = target
        self.sigma2 = float(prop.info["variance"])
        self.mean = np.asarray(target.info["mean"], dtype=float)
        self.log_z = float(target.info["log_z_true"])
        self._quad = None

    def log_rho(self, theta) -> float:
        d = self.sigma2 * np.atleast_1d(np.asarray(theta, dtype=float)) - self.mean
        return float(d @ d) / self.sigma2

    def rho(self, theta) -> float:
        return math.exp(self.log_rho(theta))

    def r(self, theta) -> float:
        return math.exp(self.log_rho(theta) + 2.0 * self.log_z)

    def grad(self, theta) -> np.ndarray:
        d = self.sigma2 * np.atleast_1d(np.asarray(theta, dtype=float)) - self.mean
        return 2.0 * d * math.exp(float(d @ d) / self.sigma2)

    def hessian(self, theta) -> np.ndarray:
        d = self.sigma2 * np.atleast_1d(np.asarray(theta, dtype=float)) - self.mean
        rho = math.exp(float(d @ d) / self.sigma2)
        return rho * (2.0 * self.sigma2 * np.eye(d.size) + 4.0 * np.outer(d, d))

    def theta_star(self, box: ParameterBox | None = None) -> np.ndarray:
        t = self.mean / self.sigma2
        return t if box is None else box.project(t)

    def expectation(self, phi: TestFunction) -> float:
        if self.target.dim > 2:
            raise ValueError("(φ, π) oracle supports dim <= 2 only")
        if self._quad is None:
            self._quad = QuadratureOracle(self.prop, self.target)
        return self._quad.expectation(phi)


def make_oracle(prop: ExpFamilyProposal, target: TargetDensity, box: ParameterBox | None = None):
    """Closed-form oracle when available, quadrature otherwise."""
    try:
        return GaussianOracle(prop, target)
    except ValueError:
        return QuadratureOracle(prop, target, box)


@dataclass(frozen=True)
class Minimizer:
    theta: np.ndarray
    rho: float


def locate_minimizer(oracle, box: ParameterBox, points_per_axis: int | None = None) -> Minimizer:
    """θ* = argmin ρ over the box: dense grid search, then bounded L-BFGS-B polish."""
    if points_per_axis is None:
        points_per_axis = 201 if box.dim == 1 else 41
    grid = box.grid(points_per_axis)
    vals = np.array([oracle.log_rho(t) for t in grid])
    start = grid[np.argmin(vals)]

    def fun(t):
        lr = oracle.log_rho(t)
        return lr, oracle.grad(t) / math.exp(lr)

    res = minimize(fun, start, jac=True, method="L-BFGS-B",
                   bounds=list(zip(box.lower, box.upper)),
                   options={"ftol": 1e-15, "gtol": 1e-12})
    theta = box.project(res.x) if res.fun <= vals.min() else start
    return Minimizer(theta=theta, rho=oracle.rho(theta))


def estimate_lipschitz(grad_fn, box: ParameterBox, points_per_axis: int = 41, step: float = 1e-5) -> float:
    """max over a grid on the box of the spectral norm of the Hessian of ρ.

    The Hessian is taken by central differences of ``grad_fn``; for convex ρ
    this is the Lipschitz constant of ∇ρ on the box.
    """
    best = 0.0
    d = box.dim
    for t in box.grid(points_per_axis):
        h = np.empty((d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = step
            h[:, j] = (grad_fn(t + e) - grad_fn(t - e)) / (2.0 * step)
        h = 0.5 * (h + h.T)
        best = max(best, float(np.max(np.abs(np.linalg.eigvalsh(h)))))
    return best
