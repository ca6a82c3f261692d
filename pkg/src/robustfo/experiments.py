"""Scripted numerical experiments.

* :func:`sweep_sigma` perturbs a 3x3 sensitivity with uniform noise of growing
  magnitude and runs the standard controller at a fixed step size.
* :func:`sweep_dimension` grows the problem size at a fixed perturbation norm.
* :func:`grid_case` fits a feeder sensitivity from historical data, moves the
  slack bus and runs the three controllers on the changed feeder.

Every cell is a pure function of its arguments, so tables are reproducible
and the sweeps can be spread over processes without changing their order.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import max_step_size
from .closed_loop import NOMINAL, Scenario, run, tail_mean
from .controllers import ROBUST_L1, ROBUST_L2, STANDARD, make_config
from .errors import InvalidArgumentError
from .feeder import (V_MAX, V_MIN, FeederSpec, build_case, disturbance_schedule,
                     feeder_plant, fit_sensitivity, historical_samples, sensitivity_matrix,
                     split_input, switch_pcc)
from .numerics import op_norm, sym_eig_extremes
from .plant import SignalSchedule, plant_with_sensitivity, random_plant, sensitivity
from .problems import RobustProblem, smoothness_constants
from .uncertainty import perturb_dirichlet, perturb_uniform

DEFAULT_SIGMAS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_DIMS = tuple(range(1, 8))
ZERO_Q_TOL = 1e-10
# stream tags keep the H, disturbance and perturbation draws independent
_TAG_PROBLEM = 0
_TAG_PERTURB = 1


@dataclass(frozen=True)
class SweepRow:
    """One (parameter, seed) cell of a sweep.

    ``final_gap`` and ``tail_gap`` are ``inf`` for diverged runs.
    """

    param: float
    seed: int
    final_gap: float
    tail_gap: float
    diverged: bool
    eta: float


def random_sensitivity(m, seed, R=None, Q=None, lam=1.0, floor=0.1):
    """Square sensitivity with entries uniform on [-1, 1].

    The matrix is scaled up until ``lambda_min(R + lam H^T Q H) >= floor``;
    with ``R = I`` this never triggers.
    """
    rng = np.random.default_rng([seed, _TAG_PROBLEM])
    H = rng.uniform(-1.0, 1.0, size=(m, m))
    d = rng.standard_normal(m)
    R = np.eye(m) if R is None else R
    Q = np.eye(m) if Q is None else Q
    lo, _ = sym_eig_extremes(R + lam * H.T @ Q @ H)
    if lo < floor:
        _, lo_h = sym_eig_extremes(lam * H.T @ Q @ H)
        if lo_h <= 0:
            raise InvalidArgumentError("cannot rescale a singular sensitivity")
        H = H * np.sqrt(floor / lo_h)
    return H, d


def _static_run(H, H_hat, d, eta, lam, horizon):
    m = H.shape[1]
    p = H.shape[0]
    plant = plant_with_sensitivity(H)
    cfg = make_config(STANDARD, eta, np.eye(m), np.eye(p), lam, H_hat)
    signals = SignalSchedule.constant(horizon, np.zeros(p), d, np.zeros(p))
    return run(Scenario(plant, signals, cfg, H_true=H, target=NOMINAL))


def _row(param, seed, log, eta):
    if log.diverged:
        return SweepRow(float(param), int(seed), np.inf, np.inf, True, float(eta))
    return SweepRow(float(param), int(seed), float(log.gap[-1]), tail_mean(log.gap), False,
                    float(eta))


def _sigma_cell(args):
    sigma, seed, m, lam, horizon, eta_factor = args
    H, d = random_sensitivity(m, seed, lam=lam)
    nominal = make_config(STANDARD, 1.0, np.eye(m), np.eye(m), lam, H)
    eta = eta_factor * max_step_size(plant_with_sensitivity(H), nominal)
    H_hat = perturb_uniform(H, sigma, [seed, _TAG_PERTURB])
    return _row(sigma, seed, _static_run(H, H_hat, d, eta, lam, horizon), eta)


def _dim_cell(args):
    m, seed, eta, lam, horizon = args
    H, d = random_sensitivity(m, seed, lam=lam)
    # unit Frobenius norm keeps ||Delta||_F = 1 a fixed relative error across m
    H = H / np.linalg.norm(H)
    H_hat = perturb_dirichlet(H, [seed, _TAG_PERTURB])
    return _row(m, seed, _static_run(H, H_hat, d, eta, lam, horizon), eta)


def _map_cells(fn, cells, jobs):
    if jobs is None or jobs <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


def sweep_sigma(sigmas=DEFAULT_SIGMAS, seeds=range(20), m=3, lam=1.0, horizon=2000,
                eta_factor=0.8, jobs=1):
    """Optimality gap of the standard controller under ``H_hat = H + sigma Delta``.

    The step size of each seed is ``eta_factor`` times the admissible step of
    the unperturbed instance, so divergence is caused by the mismatch alone.
    Rows are ordered by ``(sigma, seed)``.
    """
    sigmas = [float(s) for s in sigmas]
    if not sigmas or min(sigmas) < 0:
        raise InvalidArgumentError("sigmas must be a non-empty list of non-negative values")
    cells = [(s, int(seed), m, lam, horizon, eta_factor) for s in sigmas for seed in seeds]
    return _map_cells(_sigma_cell, cells, jobs)


def sweep_dimension(dims=DEFAULT_DIMS, seeds=range(100), eta=0.1, lam=1.0, horizon=500,
                    jobs=1):
    """Optimality gap versus problem size for ``||H_hat - H||_F = 1`` at one fixed ``eta``."""
    dims = [int(m) for m in dims]
    if not dims or min(dims) < 1 or max(dims) > 16:
        raise InvalidArgumentError("dims must lie within 1..16")
    cells = [(m, int(seed), eta, lam, horizon) for m in dims for seed in seeds]
    return _map_cells(_dim_cell, cells, jobs)


def median_gaps(rows, which="final_gap"):
    """Median gap per parameter value, diverged runs counting as ``inf``."""
    params = sorted({r.param for r in rows})
    return {p: float(np.median([getattr(r, which) for r in rows if r.param == p]))
            for p in params}


def divergence_counts(rows):
    params = sorted({r.param for r in rows})
    return {p: sum(r.diverged for r in rows if r.param == p) for p in params}


def count_inversions(values):
    """Number of adjacent pairs where the sequence strictly decreases."""
    v = list(values)
    return sum(1 for a, b in zip(v, v[1:]) if b < a)


def sweep_summary(rows):
    med = median_gaps(rows)
    return {
        "params": list(med),
        "median_final_gap": list(med.values()),
        "median_tail_gap": list(median_gaps(rows, "tail_gap").values()),
        "diverged": list(divergence_counts(rows).values()),
        "inversions": count_inversions(med.values()),
        "cells": len(rows),
    }


def random_tracking_scenario(seed, horizon=400, mismatch=0.2, eta_fraction=0.5):
    """Randomized closed-loop scenario for checking the tracking bound.

    Dimensions ``n <= 6`` and ``m, p <= 4``; even seeds use the ridge
    controller and odd seeds the lasso controller.  ``H_hat`` is ``H`` with
    entry-wise relative error up to ``mismatch``.  Seeds ``4j, 4j+1`` have
    static signals, ``4j+2, 4j+3`` sinusoidal ones.  The step size is
    ``eta_fraction`` times the admissible step of the scenario.
    """
    rng = np.random.default_rng(seed)
    n, m, p = (int(rng.integers(1, hi)) for hi in (7, 5, 5))
    plant = random_plant(n, m, p, rng)
    H = sensitivity(plant)
    H_hat = H * (1 + mismatch * rng.uniform(-1, 1, H.shape))
    variant = ROBUST_L2 if seed % 2 == 0 else ROBUST_L1
    rho = rng.uniform(0, 0.5) if variant == ROBUST_L2 else rng.uniform(0, 0.5, m)
    cfg = make_config(variant, 1.0, np.eye(m), np.eye(p), 1.0, H_hat, rho=rho)
    cfg = cfg.with_eta(eta_fraction * max_step_size(plant, cfg))
    k = np.arange(horizon)[:, None]
    if seed % 4 < 2:
        signals = SignalSchedule.constant(horizon, rng.standard_normal(n),
                                          rng.standard_normal(p), rng.standard_normal(p))
    else:
        signals = SignalSchedule(
            rng.standard_normal(n) + 0.5 * np.sin(0.05 * k) * rng.standard_normal(n),
            rng.standard_normal(p) + 0.5 * np.cos(0.03 * k) * rng.standard_normal(p),
            0.3 * np.sin(0.02 * k) * np.ones(p))
    return Scenario(plant, signals, cfg, x0=rng.standard_normal(n), u0=rng.standard_normal(m),
                    H_true=H, seed=int(seed))


# ---------------------------------------------------------------------------
# feeder case

@dataclass
class GridResult:
    logs: dict
    summary: dict
    H_hat: np.ndarray
    H_true: np.ndarray
    eta: float
    feeder: object = field(repr=False, default=None)


def voltage_violations(v, v_min=V_MIN, v_max=V_MAX, tol=1e-9):
    """Number of steps with any voltage outside ``[v_min, v_max]``."""
    v = np.atleast_2d(v)
    return int(np.sum(np.any((v > v_max + tol) | (v < v_min - tol), axis=1)))


def _controller_summary(log):
    curt, q = split_input(log.u)
    return {
        "violations": voltage_violations(log.y),
        "v_max": float(np.max(log.y)),
        "v_min": float(np.min(log.y)),
        "curtailment": float(-np.sum(curt)) + 0.0,
        "abs_q": float(np.sum(np.abs(q))),
        "zero_q": int(np.sum(np.abs(q) < ZERO_Q_TOL)),
        "status": log.status,
    }


def grid_case(spec=FeederSpec(), new_pcc=3, lam=10.0, eta_factor=1.3, rho=1.0,
              n_samples=200, history_seed=None, v_ref=1.0,
              variants=(STANDARD, ROBUST_L2, ROBUST_L1)):
    """Three controllers on a feeder whose slack bus moved after ``H_hat`` was fitted.

    ``H_hat`` is a least-squares fit to ``n_samples`` historical operating
    points of the original feeder.  All controllers share
    ``eta = eta_factor / L`` with ``L`` the smoothness constant of the fitted
    problem, ``R = I``, ``Q = I`` and the same ``rho`` (scalar ridge weight or
    per-entry lasso weight).

    Returns
    -------
    GridResult
        Per-variant logs and a summary with voltage-limit violations (steps),
        total curtailment, total ``|q|`` and the count of zero ``q`` entries.
    """
    feeder = build_case(spec)
    seed = spec.seed + 100 if history_seed is None else history_seed
    U, V = historical_samples(feeder, n_samples, seed)
    H_hat = fit_sensitivity(U, V)
    switched = switch_pcc(feeder, new_pcc)
    plant, signals = feeder_plant(switched, v_ref)
    m, p = H_hat.shape[1], H_hat.shape[0]
    R, Q = np.eye(m), np.eye(p)
    _, L = smoothness_constants(RobustProblem(R, Q, lam, H_hat))
    eta = eta_factor / L
    logs = {}
    rows = {}
    for variant in variants:
        cfg = make_config(variant, eta, R, Q, lam, H_hat,
                          rho=None if variant == STANDARD else rho)
        logs[variant] = run(Scenario(plant, signals, cfg, target=NOMINAL))
        rows[variant] = _controller_summary(logs[variant])
    uncontrolled_pre = disturbance_schedule(feeder)
    summary = {
        "controllers": rows,
        "eta": eta,
        "lam": lam,
        "rho": rho,
        "new_pcc": int(new_pcc),
        "fit_error_pre": op_norm(H_hat - sensitivity_matrix(feeder)),
        "fit_error_post": op_norm(H_hat - plant.H),
        "uncontrolled_pre": [float(uncontrolled_pre.min()), float(uncontrolled_pre.max())],
        "uncontrolled_post": [float(signals.d_y.min()), float(signals.d_y.max())],
        "spec": asdict(spec),
    }
    return GridResult(logs, summary, H_hat, plant.H, eta, switched)
