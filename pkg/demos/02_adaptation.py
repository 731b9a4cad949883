# %% [markdown]
# # Adapting the proposal
#
# Three ways to move θ toward the minimizer of ρ on the Gaussian fixture
# (target N(0, 1), proposal family N(σ²θ, 1), Θ = [-1.5, 1.5]), all started at
# the far corner θ₀ = 1.5, where ρ = e^2.25 ≈ 9.5.

# %%
import numpy as np

from oais import (
    GaussianOracle,
    ParameterBox,
    ScheduleConfig,
    clamp_test_function,
    gaussian_mean_family,
    make_gaussian_target,
    run_exact_gd,
    run_sgd_averaged,
    run_sgd_vanilla,
)
from oais.oracles import estimate_lipschitz

prop = gaussian_mean_family(1.0)
target = make_gaussian_target([0.0], 1.0)
box = ParameterBox([-1.5], [1.5])
phi = clamp_test_function()
oracle = GaussianOracle(prop, target)

# %% Exact gradients with γ = 1/L
L = estimate_lipschitz(oracle.grad, box)
gd = run_exact_gd(prop, target, box, [1.5], ScheduleConfig("constant", 1 / L), 200, 500, phi,
                  seed=0, oracle=oracle, lipschitz=L)
print(f"L ≈ {L:.1f}")
for t in (1, 10, 50, 200):
    print(f"  exact GD   t={t:>3}  rho - 1 = {gd.rho_true[t - 1] - 1:.2e}")

# %% Stochastic gradients: raw iterates vs averaged iterates
sched = ScheduleConfig("inverse-sqrt", 0.5)
for name, runner in (("vanilla", run_sgd_vanilla), ("averaged", run_sgd_averaged)):
    gaps = np.zeros(4)
    for seed in range(20):
        tr = runner(prop, target, box, [1.5], sched, 400, 500, phi, seed=seed, path="normalized")
        gaps += [oracle.rho(tr.deployed[t - 1]) - 1 for t in (25, 50, 100, 400)]
    print(f"  {name:<9} mean rho - 1 at t = 25/50/100/400:", " ".join(f"{g / 20:.1e}" for g in gaps))

# %% [markdown]
# The averaged scheme pays for its stability early on: θ̄_t still carries the
# starting corner at t = 25. The gaps fall much faster than the 1/√t
# worst-case guarantee because ρ is strongly convex around θ* here.

# %% Unknown normalizer: adapt through R(θ) = Z²ρ(θ) with β = α/Z²
unnorm = make_gaussian_target([0.0], 1.0, normalized=False)  # Z = 10
tr = run_sgd_averaged(prop, unnorm, box, [1.5], ScheduleConfig("inverse-sqrt", 0.005), 400, 500, phi,
                      seed=3, path="self-normalized")
print(f"self-normalized path: theta_bar_400 = {tr.final_theta_bar[0]:+.4f}, SNIS estimate {tr.estimate[-1]:+.4f}")
