"""Exponential-family proposals and the compact parameter box.

A proposal family is q_θ(x) = exp(θ·T(x) - A(θ)) h(x). The family object is
stateless; the natural parameter θ is passed to every call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ._util import as_batch

__all__ = [
    "ExpFamilyProposal",
    "ParameterBox",
    "gaussian_mean_family",
    "project",
    "log_density",
    "natural_from_mean",
    "mean_from_natural",
]

LOG_2PI = math.log(2.0 * math.pi)


def _check_theta(theta, dim_theta: int) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (dim_theta,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({dim_theta},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError(f"theta must be finite, got {theta.tolist()}")
    return theta


@dataclass(frozen=True, eq=False)
class ExpFamilyProposal:
    """Exponential family with sufficient statistic T, log-partition A and base measure h.

    All callables are vectorized over points: ``suff_stat`` maps ``(n, dim_x)``
    to ``(n, dim_theta)`` and ``base_log`` maps ``(n, dim_x)`` to ``(n,)``.
    ``sampler(theta, rng, n)`` returns ``(n, dim_x)`` iid draws from q_θ.
    """

    suff_stat: Callable[[np.ndarray], np.ndarray]
    log_partition: Callable[[np.ndarray], float]
    grad_log_partition: Callable[[np.ndarray], np.ndarray]
    base_log: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.ndarray, np.random.Generator, int], np.ndarray]
    dim_x: int
    dim_theta: int
    info: dict[str, Any] = field(default_factory=dict)

    def log_density(self, theta, x) -> np.ndarray:
        theta = _check_theta(theta, self.dim_theta)
        x, single = as_batch(x, self.dim_x)
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        out = self.suff_stat(x) @ theta - self.log_partition(theta) + self.base_log(x)
        return float(out[0]) if single else out

    def sample(self, theta, rng: np.random.Generator, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be at least 1")
        return self.sampler(_check_theta(theta, self.dim_theta), rng, int(n))

    def mean_suff_stat(self, theta) -> np.ndarray:
        """E_q[T(X)] = ∇A(θ)."""
        return np.asarray(self.grad_log_partition(_check_theta(theta, self.dim_theta)), dtype=float)


def log_density(prop: ExpFamilyProposal, theta, x):
    """log q_θ(x) = θ·T(x) - A(θ) + log h(x)."""
    return prop.log_density(theta, x)


def gaussian_mean_family(variance: float, dim: int = 1) -> ExpFamilyProposal:
    """Isotropic Gaussian N(μ, σ²I) with fixed σ² and learnable mean.

    Natural parameter θ = μ/σ², T(x) = x,
    A(θ) = σ²‖θ‖²/2 + (d/2) log(2πσ²), log h(x) = -‖x‖²/(2σ²).
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    var = float(variance)
    sd = math.sqrt(var)
    log_norm = 0.5 * dim * (LOG_2PI + math.log(var))

    def suff_stat(x):
        return x

    def log_partition(theta):
        return 0.5 * var * float(theta @ theta) + log_norm

    def grad_log_partition(theta):
        return var * theta

    def base_log(x):
        return -0.5 * np.einsum("ij,ij->i", x, x) / var

    def sampler(theta, rng, n):
        return var * theta + sd * rng.standard_normal((n, dim))

    return ExpFamilyProposal(
        suff_stat=suff_stat,
        log_partition=log_partition,
        grad_log_partition=grad_log_partition,
        base_log=base_log,
        sampler=sampler,
        dim_x=dim,
        dim_theta=dim,
        info={"kind": "gaussian_mean", "variance": var},
    )


def natural_from_mean(prop: ExpFamilyProposal, mean) -> np.ndarray:
    """θ = μ/σ² for the Gaussian mean family."""
    return np.atleast_1d(np.asarray(mean, dtype=float)) / prop.info["variance"]


def mean_from_natural(prop: ExpFamilyProposal, theta) -> np.ndarray:
    return prop.info["variance"] * np.atleast_1d(np.asarray(theta, dtype=float))


@dataclass(frozen=True, eq=False)
class ParameterBox:
    """Compact axis-aligned parameter set Θ = [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box must be bounded")
        if not np.all(lo < hi):
            raise ValueError("need lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def centered(cls, center, half_width) -> "ParameterBox":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(c - half_width, c + half_width)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        """sup ‖θ - θ'‖ over the box."""
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, v) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != self.lower.shape:
            raise ValueError(f"vector of shape {v.shape} does not match box of dim {self.dim}")
        return np.clip(v, self.lower, self.upper)

    def contains(self, v, atol: float = 0.0) -> bool:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return bool(np.all(v >= self.lower - atol) and np.all(v <= self.upper + atol))

    def farthest_corner(self, point) -> np.ndarray:
        """Corner of the box farthest from ``point`` (ties go to the upper face)."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return np.where(np.abs(self.upper - p) >= np.abs(p - self.lower), self.upper, self.lower)

    def grid(self, points_per_axis: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def project(box: ParameterBox, v) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    return box.project(v)
