"""Run the three controllers on a stable plant with model error and check the tracking bound.

    python demos/closed_loop_bound.py
"""

import numpy as np

from robustfo import (ROBUST_L1, ROBUST_L2, STANDARD, Scenario, SignalSchedule, compute_constants,
                      make_config, max_step_size, run, sensitivity, verify_bound)
from robustfo.plant import plant_with_sensitivity

rng = np.random.default_rng(0)
# fast first-order dynamics around a random 2x2 sensitivity
plant = plant_with_sensitivity(rng.standard_normal((2, 2)), 0.2 * np.eye(2))
H = sensitivity(plant)
H_hat = H * (1 + 0.2 * rng.uniform(-1, 1, H.shape))

K = 300
k = np.arange(K)[:, None]
signals = SignalSchedule(0.1 * np.sin(0.05 * k) * np.ones(2), np.tile([0.3, -0.2], (K, 1)),
                         np.zeros((K, 2)))

for variant, rho in ((STANDARD, None), (ROBUST_L2, 0.2), (ROBUST_L1, 0.2)):
    cfg = make_config(variant, 1.0, np.eye(2), np.eye(2), 1.0, H_hat, rho=rho)
    cfg = cfg.with_eta(0.5 * max_step_size(plant, cfg))
    log = run(Scenario(plant, signals, cfg, H_true=H))
    consts = compute_constants(plant, cfg)
    report = verify_bound(log, consts, H, H_hat)
    print(f"{variant:10s} eta={cfg.eta:.4f} c_M={consts.c_M:.4f} "
          f"final |u-u*|={log.err_u[-1]:.2e}  bound: {report.summary()}")
