"""Target densities known up to a normalizing constant, and bounded test functions.

Targets are evaluated on batches: ``x`` has shape ``(n, dim)`` and the
log-density has shape ``(n,)``. A single point of shape ``(dim,)`` is also
accepted and returns a scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from ._util import as_batch
from .exceptions import MissingNormalizerError, TargetDomainError

__all__ = [
    "TargetDensity",
    "TestFunction",
    "make_gaussian_target",
    "make_mixture_target",
    "clamp_test_function",
    "indicator_test_function",
    "DEFAULT_LOG_Z_OFFSET",
]

#: Synthetic normalizing constant used for unnormalized fixtures (Z = 10).
DEFAULT_LOG_Z_OFFSET = math.log(10.0)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """Unnormalized target log Π(x) with an optionally known log Z.

    Parameters
    ----------
    log_unnorm : callable
        Vectorized map from an ``(n, dim)`` array to ``n`` values of log Π.
    dim : int
        Dimension of the sample space.
    log_z : float or None
        Declared log normalizing constant. When set, ``log_unnorm - log_z`` is
        the normalized log-density and the unbiased IS paths are available.
    bounds : (lower, upper) or None
        Axis-aligned box holding all but a negligible fraction of the mass;
        used by quadrature oracles.
    info : dict
        Construction parameters (``kind``, ``mean``, ...) for closed-form oracles.
    """

    log_unnorm: Callable[[np.ndarray], np.ndarray]
    dim: int
    log_z: float | None = None
    bounds: tuple[np.ndarray, np.ndarray] | None = None
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def normalized(self) -> bool:
        return self.log_z is not None

    def log_unnormalized(self, x) -> np.ndarray | float:
        """Evaluate log Π at ``x``; raises :class:`TargetDomainError` on non-finite output."""
        batch, single = as_batch(x, self.dim)
        out = np.asarray(self.log_unnorm(batch), dtype=float)
        bad = ~np.isfinite(out)
        if bad.any():
            first = batch[np.argmax(bad)]
            raise TargetDomainError(f"log target is not finite at x={first.tolist()}")
        return float(out[0]) if single else out

    def log_density(self, x) -> np.ndarray | float:
        """Normalized log π(x) = log Π(x) - log Z."""
        if self.log_z is None:
            raise MissingNormalizerError("target has no declared log normalizing constant")
        return self.log_unnormalized(x) - self.log_z


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Bounded integrand φ with its sup-norm ‖φ‖∞."""

    __test__ = False  # not a pytest class

    eval: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    name: str = "phi"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim < 2:
            x = x.reshape(-1, 1)
        return np.asarray(self.eval(x), dtype=float)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(lambda x, f=self.eval: c * f(x), abs(c) * self.sup_bound, f"{c}*{self.name}")

    @property
    def c_mse(self) -> float:
        """Constant 4‖φ‖∞² of the MSE bound."""
        return 4.0 * self.sup_bound**2

    @property
    def c_bias(self) -> float:
        """Constant 12‖φ‖∞² of the bias bound."""
        return 12.0 * self.sup_bound**2


def _gaussian_box(mean: np.ndarray, sd: float, width: float = 12.0):
    return mean - width * sd, mean + width * sd


def make_gaussian_target(
    mean,
    variance: float,
    normalized: bool = True,
    log_z_offset: float = DEFAULT_LOG_Z_OFFSET,
) -> TargetDensity:
    """Isotropic Gaussian target N(mean, variance·I).

    With ``normalized=False`` the returned log Π equals log π + ``log_z_offset``
    and ``log_z`` is left undeclared, so only self-normalized paths apply.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    dim = mean.shape[0]
    var = float(variance)
    const = -0.5 * dim * (LOG_2PI + math.log(var))
    shift = 0.0 if normalized else float(log_z_offset)

    def log_unnorm(x: np.ndarray) -> np.ndarray:
        d = x - mean
        return const - 0.5 * np.einsum("ij,ij->i", d, d) / var + shift

    return TargetDensity(
        log_unnorm=log_unnorm,
        dim=dim,
        log_z=0.0 if normalized else None,
        bounds=_gaussian_box(mean, math.sqrt(var)),
        info={"kind": "gaussian", "mean": mean.copy(), "variance": var, "log_z_true": shift},
    )


def make_mixture_target(components: Sequence[tuple[float, Any, float]]) -> TargetDensity:
    """Normalized isotropic Gaussian mixture from ``(weight, mean, variance)`` triples."""
    if len(components) == 0:
        raise ValueError("mixture needs at least one component")
    weights = np.array([c[0] for c in components], dtype=float)
    means = np.array([np.atleast_1d(np.asarray(c[1], dtype=float)) for c in components])
    variances = np.array([c[2] for c in components], dtype=float)
    if np.any(weights <= 0):
        raise ValueError("mixture weights must be positive")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"mixture weights sum to {weights.sum()!r}, not 1")
    if np.any(variances <= 0):
        raise ValueError("mixture variances must be positive")
    dim = means.shape[1]
    log_coef = np.log(weights) - 0.5 * dim * (LOG_2PI + np.log(variances))

    def log_unnorm(x: np.ndarray) -> np.ndarray:
        # (n, k) squared distances to each component mean
        d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1)
        return logsumexp(log_coef[None, :] - 0.5 * d2 / variances[None, :], axis=1)

    sd = math.sqrt(variances.max())
    lower = means.min(axis=0) - 12.0 * sd
    upper = means.max(axis=0) + 12.0 * sd
    return TargetDensity(
        log_unnorm=log_unnorm,
        dim=dim,
        log_z=0.0,
        bounds=(lower, upper),
        info={
            "kind": "mixture",
            "weights": weights,
            "means": means,
            "variances": variances,
            "log_z_true": 0.0,
        },
    )


def clamp_test_function(lower: float = -10.0, upper: float = 10.0) -> TestFunction:
    """φ(x) = clip(mean of the coordinates of x, lower, upper)."""
    if not lower < upper:
        raise ValueError("need lower < upper")
    return TestFunction(
        lambda x: np.clip(x.mean(axis=1), lower, upper),
        max(abs(lower), abs(upper)),
        f"clamp[{lower},{upper}]",
    )


def indicator_test_function(threshold: float = 0.0, coord: int = 0) -> TestFunction:
    """φ(x) = 1{x[coord] > threshold}."""
    return TestFunction(
        lambda x: (x[:, coord] > threshold).astype(float),
        1.0,
        f"1[x{coord}>{threshold}]",
    )
