"""Median optimality gap of the standard controller as the model error grows.

A reduced version of ``robustfo sweep-sigma --config configs/sweep_sigma.json``.

    python demos/sensitivity_error_sweep.py
"""

from robustfo.experiments import divergence_counts, median_gaps, sweep_sigma

rows = sweep_sigma(seeds=range(8), horizon=800)
div = divergence_counts(rows)
print("sigma   median gap   diverged")
for sigma, gap in median_gaps(rows).items():
    print(f"{sigma:5g}   {gap:10.4g}   {div[sigma]}/8")
