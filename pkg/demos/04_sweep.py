# %% [markdown]
# # Sweeps, tables and bound checks
#
# The harness runs replicated experiments from a config dict (the same
# document `oais run` reads from JSON), writes a CSV with a JSON sidecar,
# and compares the table with the finite-sample bounds.

# %%
import tempfile
from pathlib import Path

from oais import ExperimentConfig, check_bounds, run_sweep
from oais.harness import read_table, write_table

config = ExperimentConfig.from_dict({
    "target": {"kind": "gaussian", "mean": [0.0], "variance": 1.0},
    "proposal": {"kind": "gaussian_mean", "variance": 1.0},
    "box": {"lower": [-1.5], "upper": [1.5]},
    "method": "exact-gd",
    "schedule": {"kind": "constant", "coef": None},  # null means γ = 1/L
    "n_grid": [200, 800],
    "t_grid": [1, 10, 100],
    "seeds": 50,
    "master_seed": 1,
})
table = run_sweep(config)

# %%
out = Path(tempfile.mkdtemp()) / "gd.csv"
write_table(table, out)
print(out.read_text())
print("sidecar:", out.with_name(out.name + ".meta.json"))

# %% Absolute checks use only measurable constants
for kind in ("lem3-gd", "thm1-mse", "thm2-bias"):
    report = check_bounds(read_table(out), kind)
    print(f"{kind}: {'all pass' if report.passed else 'violations'} ({len(report.checks)} cells)")
    print("  " + report.lines()[-1])
