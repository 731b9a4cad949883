"""Adaptation loops: exact-gradient OAIS, vanilla SGD OAIS and averaged-iterate SGD OAIS.

Every run owns two independent random streams derived from its seed: one
for the particles that produce the reported estimate and one for the
particles that feed the gradient. Keeping them apart makes the averaged
scheme's parameter path independent of how often estimates are taken.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .estimators import (
    ParticleSet,
    divergence_from_particles,
    draw_particles,
    is_estimate,
    snis_estimate,
)
from .exceptions import MissingNormalizerError, PreconditionError
from .gradients import DEFAULT_LOG_RATIO_CAP, grad_from_particles
from .oracles import estimate_lipschitz, make_oracle
from .proposal import ExpFamilyProposal, ParameterBox
from .target import TargetDensity, TestFunction

__all__ = [
    "ScheduleConfig",
    "RunTrace",
    "ShortcutResult",
    "run_exact_gd",
    "run_sgd_vanilla",
    "run_sgd_averaged",
    "last_iterate_shortcut",
    "make_streams",
]

log = logging.getLogger(__name__)

Path = Literal["normalized", "self-normalized"]
Estimator = Literal["snis", "is"]


@dataclass(frozen=True)
class ScheduleConfig:
    """Step sizes: ``constant`` (γ_k = coef) or ``inverse-sqrt`` (γ_k = coef/√k)."""

    kind: Literal["constant", "inverse-sqrt"]
    coef: float

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-sqrt"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.coef > 0:
            raise ValueError("step-size coefficient must be positive")

    def step(self, k: int) -> float:
        if k < 1:
            raise ValueError("iterations are numbered from 1")
        return self.coef if self.kind == "constant" else self.coef / math.sqrt(k)


def make_streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """(estimate stream, gradient stream) derived deterministically from ``seed``.

    ``seed`` may be an int, a sequence of ints or a SeedSequence; the same
    seed always yields the same pair of streams.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = [
        np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,)) for i in range(2)
    ]
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed if isinstance(seed, int) or seed is None else list(seed)


@dataclass
class RunTrace:
    """Per-iteration record of one adaptation run.

    Row ``t - 1`` of each per-iteration array belongs to iteration t. ``theta``
    holds θ_0..θ_T; ``deployed`` is the parameter the reported estimate was
    sampled from (θ_t, or θ̄_t for the averaged scheme); ``rho_hat`` is ρ̂ on the
    normalized path and R̂ on the self-normalized path.
    """

    method: str
    path: str
    estimator: str
    seed: object
    schedule: ScheduleConfig
    theta: np.ndarray
    theta_bar: np.ndarray
    deployed: np.ndarray
    gamma: np.ndarray
    estimate: np.ndarray
    rho_hat: np.ndarray
    ess: np.ndarray
    grad_norm: np.ndarray
    flagged: np.ndarray
    skipped: np.ndarray
    rho_true: np.ndarray | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.gamma.shape[0] + 1)

    @property
    def theta0(self) -> np.ndarray:
        return self.theta[0]

    @property
    def final_theta_bar(self) -> np.ndarray:
        return self.theta_bar[-1]

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "method": self.method,
            "path": self.path,
            "estimator": self.estimator,
            "seed": _seed_repr(self.seed),
            "schedule": {"kind": self.schedule.kind, "coef": self.schedule.coef},
            "theta": arr(self.theta),
            "theta_bar": arr(self.theta_bar),
            "deployed": arr(self.deployed),
            "gamma": arr(self.gamma),
            "estimate": arr(self.estimate),
            "rho_hat": arr(self.rho_hat),
            "ess": arr(self.ess),
            "grad_norm": arr(self.grad_norm),
            "flagged": arr(self.flagged),
            "skipped": arr(self.skipped),
            "rho_true": arr(self.rho_true),
        }

    def to_bytes(self) -> bytes:
        """Canonical serialization (wall time excluded) for reproducibility checks."""
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=True).encode()


class _Recorder:
    def __init__(self, t_max: int, dim: int, theta0: np.ndarray):
        self.theta = np.empty((t_max + 1, dim))
        self.theta[0] = theta0
        self.theta_bar = np.empty((t_max, dim))
        self.deployed = np.empty((t_max, dim))
        self.gamma = np.empty(t_max)
        self.estimate = np.empty(t_max)
        self.rho_hat = np.empty(t_max)
        self.ess = np.empty(t_max)
        self.grad_norm = np.empty(t_max)
        self.flagged = np.zeros(t_max, dtype=bool)
        self.skipped = np.zeros(t_max, dtype=bool)

    def trace(self, **kw) -> RunTrace:
        return RunTrace(
            theta=self.theta, theta_bar=self.theta_bar, deployed=self.deployed,
            gamma=self.gamma, estimate=self.estimate, rho_hat=self.rho_hat, ess=self.ess,
            grad_norm=self.grad_norm, flagged=self.flagged, skipped=self.skipped, **kw,
        )


def _check_path(target: TargetDensity, path: str, estimator: str):
    if path not in ("normalized", "self-normalized"):
        raise ValueError(f"unknown path {path!r}")
    if estimator not in ("snis", "is"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if target.log_z is None and (path == "normalized" or estimator == "is"):
        raise MissingNormalizerError(
            "the normalized path and the IS estimator need the target's log Z"
        )


def _report(ps: ParticleSet, phi: TestFunction, estimator: str, path: str):
    est = snis_estimate(ps, phi) if estimator == "snis" else is_estimate(ps, phi)
    div = divergence_from_particles(ps)
    rho = div.rho_hat if path == "normalized" else div.r_hat
    return est, rho, div.ess


def _prepare(box: ParameterBox, theta0, t_max: int):
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if not box.contains(theta0):
        raise PreconditionError(f"θ0={theta0.tolist()} lies outside the parameter box")
    return theta0


def _step(box, theta_prev, gamma, vec, t, rec):
    """Projected step; non-finite gradients are skipped and logged."""
    if np.all(np.isfinite(vec)):
        rec.grad_norm[t - 1] = float(np.linalg.norm(vec))
        return box.project(theta_prev - gamma * vec)
    log.warning("non-finite gradient at iteration %d; step skipped", t)
    rec.grad_norm[t - 1] = np.inf
    rec.skipped[t - 1] = True
    return theta_prev.copy()


def _grad_kind(path: str) -> str:
    return "normalized" if path == "normalized" else "unnormalized"


def run_exact_gd(
    prop: ExpFamilyProposal,
    target: TargetDensity,
    box: ParameterBox,
    theta0,
    schedule: ScheduleConfig,
    t_max: int,
    n: int,
    phi: TestFunction,
    seed=None,
    oracle=None,
    lipschitz: float | None = None,
    estimator: Estimator = "snis",
) -> RunTrace:
    """Projected gradient descent θ_t = Proj(θ_{t-1} - γ∇ρ(θ_{t-1})) with exact gradients.

    ``oracle`` supplies ``grad`` and ``rho`` (closed form or quadrature); the
    constant step must satisfy γ ≤ 1/L, with L estimated on a grid over the
    box unless given. An IS/SNIS estimate from ``n`` fresh draws at θ_t is
    recorded at every iteration, alongside the exact ρ(θ_t).
    """
    if schedule.kind != "constant":
        raise PreconditionError("exact-gradient OAIS uses a constant step size")
    _check_path(target, "self-normalized", estimator)
    theta0 = _prepare(box, theta0, t_max)
    if oracle is None:
        try:
            oracle = make_oracle(prop, target, box)
        except ValueError as exc:
            raise PreconditionError(f"no exact-gradient oracle for this target: {exc}") from exc
    if lipschitz is None:
        lipschitz = estimate_lipschitz(oracle.grad, box)
    gamma = schedule.coef
    if gamma * lipschitz > 1.0 + 1e-9:
        raise PreconditionError(f"step size γ={gamma:.6g} exceeds 1/L={1.0 / lipschitz:.6g}")

    start = time.perf_counter()
    rng_est, _ = make_streams(seed)
    rec = _Recorder(t_max, box.dim, theta0)
    rho_true = np.empty(t_max)
    running = np.zeros(box.dim)
    theta = theta0
    for t in range(1, t_max + 1):
        running += theta
        rec.theta_bar[t - 1] = running / t
        g = np.asarray(oracle.grad(theta), dtype=float)
        rec.grad_norm[t - 1] = float(np.linalg.norm(g))
        theta = box.project(theta - gamma * g)
        rec.theta[t] = theta
        rec.gamma[t - 1] = gamma
        rec.deployed[t - 1] = theta
        ps = draw_particles(prop, theta, target, n, rng_est)
        rec.estimate[t - 1], rec.rho_hat[t - 1], rec.ess[t - 1] = _report(
            ps, phi, estimator, "normalized" if target.log_z is not None else "self-normalized"
        )
        rho_true[t - 1] = oracle.rho(theta)
    return rec.trace(
        method="exact-gd", path="normalized", estimator=estimator, seed=seed,
        schedule=schedule, rho_true=rho_true, wall_time=time.perf_counter() - start,
        extra={"lipschitz": lipschitz},
    )


def run_sgd_vanilla(
    prop: ExpFamilyProposal,
    target: TargetDensity,
    box: ParameterBox,
    theta0,
    schedule: ScheduleConfig,
    t_max: int,
    n: int,
    phi: TestFunction,
    seed=None,
    path: Path = "self-normalized",
    estimator: Estimator = "snis",
    gradient_override: Callable[[np.ndarray], np.ndarray] | None = None,
    log_ratio_cap: float = DEFAULT_LOG_RATIO_CAP,
) -> RunTrace:
    """Stochastic gradient OAIS on the raw iterates.

    The gradient at iteration t reuses the particles drawn at θ_{t-1}; a
    bootstrap set is drawn at θ_0 before the loop. Fresh particles at θ_t
    then give the reported estimate and become the next gradient's input.
    """
    _check_path(target, path, estimator)
    theta0 = _prepare(box, theta0, t_max)
    start = time.perf_counter()
    rng_est, rng_grad = make_streams(seed)
    rec = _Recorder(t_max, box.dim, theta0)
    kind = _grad_kind(path)
    theta = theta0
    running = np.zeros(box.dim)
    ps = draw_particles(prop, theta, target, n, rng_grad)
    for t in range(1, t_max + 1):
        running += theta
        rec.theta_bar[t - 1] = running / t
        gamma = schedule.step(t)
        rec.gamma[t - 1] = gamma
        if gradient_override is not None:
            vec = np.asarray(gradient_override(theta), dtype=float)
        else:
            g = grad_from_particles(prop, ps, kind, reused=True, log_ratio_cap=log_ratio_cap)
            rec.flagged[t - 1] = g.flagged
            vec = g.vector
        theta = _step(box, theta, gamma, vec, t, rec)
        rec.theta[t] = theta
        rec.deployed[t - 1] = theta
        ps = draw_particles(prop, theta, target, n, rng_est)
        rec.estimate[t - 1], rec.rho_hat[t - 1], rec.ess[t - 1] = _report(ps, phi, estimator, path)
    return rec.trace(
        method="sgd-vanilla", path=path, estimator=estimator, seed=seed,
        schedule=schedule, wall_time=time.perf_counter() - start,
    )


def run_sgd_averaged(
    prop: ExpFamilyProposal,
    target: TargetDensity,
    box: ParameterBox,
    theta0,
    schedule: ScheduleConfig,
    t_max: int,
    n: int,
    phi: TestFunction,
    seed=None,
    path: Path = "self-normalized",
    estimator: Estimator = "snis",
    n_grad: int | None = None,
    gradient_override: Callable[[np.ndarray], np.ndarray] | None = None,
    log_ratio_cap: float = DEFAULT_LOG_RATIO_CAP,
) -> RunTrace:
    """Stochastic gradient OAIS with averaged iterates.

    At iteration t the estimate is drawn from q at θ̄_t = mean(θ_0..θ_{t-1});
    the gradient at θ_{t-1} uses a separate set of ``n_grad`` (default ``n``)
    draws, so estimation samples never feed the adaptation.
    """
    _check_path(target, path, estimator)
    theta0 = _prepare(box, theta0, t_max)
    start = time.perf_counter()
    rng_est, rng_grad = make_streams(seed)
    rec = _Recorder(t_max, box.dim, theta0)
    kind = _grad_kind(path)
    n_grad = n if n_grad is None else n_grad
    theta = theta0
    running = np.zeros(box.dim)
    for t in range(1, t_max + 1):
        running += theta
        theta_bar = running / t
        rec.theta_bar[t - 1] = theta_bar
        rec.deployed[t - 1] = theta_bar
        ps_bar = draw_particles(prop, theta_bar, target, n, rng_est)
        rec.estimate[t - 1], rec.rho_hat[t - 1], rec.ess[t - 1] = _report(ps_bar, phi, estimator, path)
        gamma = schedule.step(t)
        rec.gamma[t - 1] = gamma
        theta = _adapt(prop, target, box, theta, gamma, n_grad, rng_grad, kind,
                       gradient_override, log_ratio_cap, t, rec)
        rec.theta[t] = theta
    return rec.trace(
        method="sgd-averaged", path=path, estimator=estimator, seed=seed,
        schedule=schedule, wall_time=time.perf_counter() - start,
    )


def _adapt(prop, target, box, theta, gamma, n_grad, rng_grad, kind, override, cap, t, rec):
    if override is not None:
        return _step(box, theta, gamma, np.asarray(override(theta), dtype=float), t, rec)
    ps = draw_particles(prop, theta, target, n_grad, rng_grad)
    g = grad_from_particles(prop, ps, kind, reused=False, log_ratio_cap=cap)
    rec.flagged[t - 1] = g.flagged
    return _step(box, theta, gamma, g.vector, t, rec)


@dataclass(frozen=True)
class ShortcutResult:
    estimate: float
    theta_bar: np.ndarray
    thetas: np.ndarray
    wall_time: float


def last_iterate_shortcut(
    prop: ExpFamilyProposal,
    target: TargetDensity,
    box: ParameterBox,
    theta0,
    schedule: ScheduleConfig,
    t_final: int,
    n: int,
    phi: TestFunction,
    seed=None,
    path: Path = "self-normalized",
    estimator: Estimator = "snis",
    n_grad: int | None = None,
    log_ratio_cap: float = DEFAULT_LOG_RATIO_CAP,
) -> ShortcutResult:
    """Averaged-iterate OAIS that only estimates once, at t = ``t_final``.

    Runs the T-1 adaptation steps that produce θ_1..θ_{T-1}, then samples
    from q at θ̄_T. With the same seed, θ̄_T matches the full run exactly.
    """
    if t_final < 1:
        raise ValueError("t_final must be at least 1")
    _check_path(target, path, estimator)
    theta0 = _prepare(box, theta0, t_final)
    start = time.perf_counter()
    rng_est, rng_grad = make_streams(seed)
    kind = _grad_kind(path)
    n_grad = n if n_grad is None else n_grad
    rec = _Recorder(t_final, box.dim, theta0)
    theta = theta0
    running = theta0.copy()
    for t in range(1, t_final):
        theta = _adapt(prop, target, box, theta, schedule.step(t), n_grad, rng_grad, kind,
                       None, log_ratio_cap, t, rec)
        rec.theta[t] = theta
        running += theta
    theta_bar = running / t_final
    ps = draw_particles(prop, theta_bar, target, n, rng_est)
    est, _, _ = _report(ps, phi, estimator, path)
    return ShortcutResult(
        estimate=est,
        theta_bar=theta_bar,
        thetas=rec.theta[:t_final].copy(),
        wall_time=time.perf_counter() - start,
    )
