"""A small reproducible Monte Carlo run through the harness.

Run with ``python demos/small_monte_carlo.py``; set ``BGINDEX_JOBS`` for
parallel replicates.  Results do not depend on the number of workers.
"""

# %%
from bgindex.harness import ExperimentConfig, run_monte_carlo

cfg = ExperimentConfig.from_dict({
    "schema_version": 1,
    "model": {"type": "explicit",
              "components": [{"beta": 1.5, "tail_intensity": 20.0}, {"beta": 1.0, "tail_intensity": 20.0}],
              "vol": {"type": "constant", "sigma": 0.1}},
    "scheme": {"horizon": 1.0, "delta": 1e-5},
    "prelim": {"j": 2},
    "contrast": {},
    "replicates": 20,
    "seed": 2024,
})
table = run_monte_carlo(cfg, progress=lambda row: print("replicate", row["replicate"], "done"))

# %%
for name in ("prelim_beta1", "final_beta1", "prelim_beta2", "final_beta2"):
    s = table.summary[name]
    if s["count"] == 0:
        print(f"{name:14s} no usable replicates")
        continue
    print(f"{name:14s} mean {s['mean']:.3f}  rmse {s['rmse']:.3f}  usable {s['count']}")
print("failures:", table.summary["failures"])
