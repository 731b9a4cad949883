"""Importance sampling estimators and Monte Carlo estimates of ρ(θ), R(θ) and ESS.

All weight arithmetic stays in log space; weights are exponentiated only
after subtracting their maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegenerateWeightsError, MissingNormalizerError
from .proposal import ExpFamilyProposal
from .target import TargetDensity, TestFunction

__all__ = [
    "ParticleSet",
    "DivergenceEstimate",
    "draw_particles",
    "particles_from_points",
    "normalize_log_weights",
    "is_estimate",
    "snis_estimate",
    "effective_sample_size",
    "divergence_from_particles",
    "estimate_rho",
]

# exp() overflows float64 just above this
_LOG_MAX = math.log(np.finfo(float).max)


def normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    """Self-normalized weights W_i / Σ_j W_j computed from log W."""
    log_w = np.asarray(log_w, dtype=float)
    if log_w.size == 0 or not np.any(np.isfinite(log_w)) or np.any(np.isnan(log_w)):
        raise DegenerateWeightsError("no finite importance weight to normalize")
    if np.any(log_w == np.inf):
        raise DegenerateWeightsError("infinite importance weight")
    # subtract the max first; exp(log_w - logsumexp) drifts off Σ = 1 for large |log_w|
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Weighted draws x^(i) ~ q_θ with log W = log Π - log q_θ.

    ``log_z`` is the target's declared normalizer at draw time (None if
    unknown); it is what turns log W into the normalized log w.
    """

    points: np.ndarray
    log_unnorm_weights: np.ndarray
    snis_weights: np.ndarray
    theta_used: np.ndarray
    log_z: float | None = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def log_norm_weights(self) -> np.ndarray:
        """log w = log π - log q_θ; needs a known normalizer."""
        if self.log_z is None:
            raise MissingNormalizerError("particle set was drawn from a target without log Z")
        return self.log_unnorm_weights - self.log_z


def particles_from_points(points, log_unnorm_weights, theta, log_z=None) -> ParticleSet:
    """Assemble a :class:`ParticleSet` from precomputed points and log weights."""
    lw = np.asarray(log_unnorm_weights, dtype=float)
    return ParticleSet(
        points=np.asarray(points, dtype=float),
        log_unnorm_weights=lw,
        snis_weights=normalize_log_weights(lw),
        theta_used=np.array(theta, dtype=float, copy=True),
        log_z=log_z,
    )


def draw_particles(
    prop: ExpFamilyProposal,
    theta,
    target: TargetDensity,
    n: int,
    rng: np.random.Generator,
) -> ParticleSet:
    """Draw ``n`` iid points from q_θ and weight them against the target."""
    if n < 1:
        raise ValueError("n must be at least 1")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = prop.sample(theta, rng, n)
    log_w = target.log_unnormalized(x) - prop.log_density(theta, x)
    return particles_from_points(x, log_w, theta, target.log_z)


def is_estimate(ps: ParticleSet, phi: TestFunction, target_log_z: float | None = None) -> float:
    """Unbiased IS estimate (1/N) Σ w(x_i) φ(x_i) with normalized weights."""
    log_z = ps.log_z if target_log_z is None else target_log_z
    if log_z is None:
        raise MissingNormalizerError("IS estimate needs the target's log normalizing constant")
    log_w = ps.log_unnorm_weights - log_z
    m = log_w.max()
    if m > _LOG_MAX:
        raise DegenerateWeightsError(f"normalized weight exp({m:.1f}) overflows")
    return float(np.mean(np.exp(log_w) * phi(ps.points)))


def snis_estimate(ps: ParticleSet, phi: TestFunction) -> float:
    """Self-normalized estimate Σ 𝗐_i φ(x_i)."""
    return float(ps.snis_weights @ phi(ps.points))


def effective_sample_size(log_w: np.ndarray) -> float:
    """(Σ w)² / Σ w², invariant to the scale of the weights."""
    log_w = np.asarray(log_w, dtype=float)
    return float(np.exp(2.0 * logsumexp(log_w) - logsumexp(2.0 * log_w)))


@dataclass(frozen=True)
class DivergenceEstimate:
    """Monte Carlo estimates of ρ(θ), R(θ) and the ESS from one particle set.

    ``rho_hat`` is None when the target normalizer is unknown. Log-scale
    values are kept so that large divergences stay representable.
    """

    rho_hat: float | None
    r_hat: float
    ess: float
    n: int
    log_rho_hat: float | None
    log_r_hat: float


def divergence_from_particles(ps: ParticleSet) -> DivergenceEstimate:
    """Estimate R = E_q[W²] (and ρ = R/Z² when log Z is known) from existing particles."""
    n = ps.n
    log_r = float(logsumexp(2.0 * ps.log_unnorm_weights) - math.log(n))
    if not np.isfinite(log_r) or log_r > _LOG_MAX:
        raise DegenerateWeightsError(
            f"second moment of the weights overflows (log R-hat = {log_r:.1f}); "
            "proposal is catastrophically mismatched"
        )
    log_rho = None if ps.log_z is None else log_r - 2.0 * ps.log_z
    return DivergenceEstimate(
        rho_hat=None if log_rho is None else math.exp(log_rho),
        r_hat=math.exp(log_r),
        ess=effective_sample_size(ps.log_unnorm_weights),
        n=n,
        log_rho_hat=log_rho,
        log_r_hat=log_r,
    )


def estimate_rho(
    prop: ExpFamilyProposal,
    theta,
    target: TargetDensity,
    n: int,
    rng: np.random.Generator,
) -> DivergenceEstimate:
    """Draw fresh particles at θ and estimate ρ(θ), R(θ) and the ESS."""
    return divergence_from_particles(draw_particles(prop, theta, target, n, rng))
