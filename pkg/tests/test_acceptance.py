"""Acceptance criteria, one test each.

Each test prints ``ACCEPTANCE <n> PASS|FAIL`` with the measured quantities and
the session ends with a summary table of all verdicts.  Run directly with
``python tests/test_acceptance.py`` for the table alone.
"""

import os
import shutil
import sys
import tempfile
import time

import numpy as np
import pytest

from robustfo.analysis import TELESCOPED, compute_constants, max_step_size, verify_bound
from robustfo.cli import main as cli_main
from robustfo.closed_loop import CONTROLLER, Scenario, run
from robustfo.controllers import ROBUST_L1, ROBUST_L2, STANDARD, exact_feedback_map, make_config
from robustfo.errors import DegenerateOptimumError
from robustfo.experiments import (count_inversions, divergence_counts, grid_case, median_gaps,
                                  random_tracking_scenario, sweep_dimension, sweep_sigma)
from robustfo.numerics import solve_discrete_lyapunov
from robustfo.plant import SignalSchedule, plant_with_sensitivity, random_plant, sensitivity
from robustfo.problems import (RobustProblem, grad_phi_l2, phi_l2, robust_minimizer,
                               smoothness_constants, soft_threshold)
from robustfo.uncertainty import (UncertaintySet, compact_form, sample_uncertainty,
                                  worst_case_maximizer, worst_case_value)

sys.path.insert(0, os.path.dirname(__file__))
from conftest import random_spd, record  # noqa: E402

CONFIGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "configs")
JOBS = min(4, os.cpu_count() or 1)


def _verdict(number, title, checks, detail):
    passed = all(checks.values())
    failed = [k for k, ok in checks.items() if not ok]
    record(number, title, passed, detail + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert passed, failed


def test_01_worst_case_closed_form():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    max_excess = -np.inf
    max_attain = 0.0
    for i in range(200):
        R, Q = random_spd(rng, 2), random_spd(rng, 2)
        cf = compact_form(R, Q, rng.uniform(0.5, 2.0), rng.standard_normal((2, 2)),
                          rng.standard_normal(2), rng.standard_normal(2))
        u = rng.standard_normal(2)
        uset = (UncertaintySet.gen(rng.uniform(0.1, 1.0)) if i % 2 == 0
                else UncertaintySet.col(rng.uniform(0.1, 1.0, 2)))
        value = worst_case_value(cf, u, uset)
        draws = sample_uncertainty(uset, 2, 2, boundary=True, seed=[1, i], structured=False,
                                   size=100_000)
        sampled = np.linalg.norm(np.einsum("kij,j->ki", cf.M + draws, u) + cf.eps, axis=1)
        max_excess = max(max_excess, sampled.max() - value)
        dm = worst_case_maximizer(cf, u, uset)
        attained = np.linalg.norm((cf.M + dm) @ u + cf.eps)
        max_attain = max(max_attain, abs(attained - value) if uset.contains(dm) else np.inf)
    runtime = time.perf_counter() - t0
    _verdict(1, "worst-case closed form", {
        "sampled sup <= closed form": max_excess <= 0.0,
        "maximizer attains to 1e-9": max_attain <= 1e-9,
        "runtime < 30 s": runtime < 30,
    }, f"max sampled - value {max_excess:.3g}, attainment error {max_attain:.2g}, "
       f"{runtime:.1f} s")


def _brute_force(objective, m, lo=-4.0, hi=4.0):
    """Grid argmin with pitch 1e-3, refined coarse to fine (objective is convex)."""
    center = np.zeros(m)
    half = (hi - lo) / 2
    for pitch in (0.05, 0.005, 0.001):
        axis = np.arange(-half, half + pitch / 2, pitch)
        grids = np.meshgrid(*[c + axis for c in center], indexing="ij")
        pts = np.stack(grids, -1).reshape(-1, m)
        center = pts[np.argmin(objective(pts))]
        half = 10 * pitch
    return center


def _random_robust_problem(rng, m, kind):
    while True:
        R, Q = random_spd(rng, m), random_spd(rng, 2)
        H = rng.standard_normal((2, m))
        lam = rng.uniform(0.5, 2.0)
        uset = (UncertaintySet.gen(rng.uniform(0.05, 0.5)) if kind == "gen"
                else UncertaintySet.col(rng.uniform(0.05, 0.5, m)))
        pb = RobustProblem(R, Q, lam, H, uset)
        d, r = 2 * rng.standard_normal(2), np.zeros(2)
        try:
            u, _ = robust_minimizer(pb, d, r)
        except DegenerateOptimumError:
            continue
        if np.max(np.abs(u)) < 3.5:
            return pb, d, r, u


def test_02_regularizer_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for m in (1, 2):
        for kind in ("gen", "col"):
            for _ in range(20):
                pb, d, r, u = _random_robust_problem(rng, m, kind)
                cf = pb.compact(d, r)
                rho = pb.uset.rho

                def objective(pts, cf=cf, rho=rho, kind=kind):
                    spread = (rho * np.linalg.norm(pts, axis=1) if kind == "gen"
                              else np.abs(pts) @ rho)
                    return np.linalg.norm(pts @ cf.M.T + cf.eps, axis=1) + spread

                worst = max(worst, np.linalg.norm(_brute_force(objective, m) - u))
    runtime = time.perf_counter() - t0
    _verdict(2, "regularized optimum equals min-max optimum", {
        "u distance <= 2e-3": worst <= 2e-3,
        "runtime < 120 s": runtime < 120,
    }, f"80 instances, max distance {worst:.2g}, {runtime:.1f} s")


def test_03_gradients():
    rng = np.random.default_rng(3)
    worst_fd = 0.0
    for _ in range(100):
        m, p = rng.integers(1, 5, size=2)
        pb = RobustProblem(random_spd(rng, m), random_spd(rng, p), rng.uniform(0.5, 2.0),
                           rng.standard_normal((p, m)))
        d, r, u = rng.standard_normal(p), rng.standard_normal(p), rng.standard_normal(m)
        rho = rng.uniform(0, 1)
        h = 1e-6
        fd = np.array([(phi_l2(u + h * e, pb, d, r, rho) - phi_l2(u - h * e, pb, d, r, rho))
                       / (2 * h) for e in np.eye(m)])
        g = grad_phi_l2(u, pb, d, r, rho)
        worst_fd = max(worst_fd, np.linalg.norm(fd - g) / np.linalg.norm(g))
    grid = np.linspace(-6, 6, 600_001)
    worst_prox = 0.0
    for v, tau in zip(rng.uniform(-4, 4, 50), rng.uniform(0, 2, 50)):
        best = grid[np.argmin(0.5 * (grid - v) ** 2 + tau * np.abs(grid))]
        worst_prox = max(worst_prox, abs(best - soft_threshold(v, tau)))
    _verdict(3, "gradient and prox correctness", {
        "finite differences 1e-5 relative": worst_fd <= 1e-5,
        "soft threshold vs grid 1e-4": worst_prox <= 1e-4,
    }, f"max FD rel error {worst_fd:.2g}, max prox error {worst_prox:.2g}")


def test_04_lyapunov_and_contraction():
    rng = np.random.default_rng(4)
    worst_res = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        plant = random_plant(n, 1, 1, rng, spectral_radius_max=0.95)
        P = solve_discrete_lyapunov(plant.A, np.eye(n))
        worst_res = max(worst_res, np.linalg.norm(plant.A.T @ P @ plant.A - P + np.eye(n)))
    worst_ratio = -np.inf
    for _ in range(40):
        m, p = rng.integers(1, 5, size=2)
        rho = rng.uniform(0, 0.5)
        cfg = make_config(ROBUST_L2, 1.0, random_spd(rng, m), random_spd(rng, p), 1.0,
                          rng.standard_normal((p, m)), rho=rho)
        mu, L = smoothness_constants(cfg.problem(), rho)
        H, d, r = cfg.H_hat, rng.standard_normal(p), rng.standard_normal(p)
        for frac in (0.05, 0.3, 0.6, 0.95):
            eta = frac * 2 * mu / L ** 2
            c = cfg.with_eta(eta)
            alpha = np.sqrt(1 - eta * (2 * mu - eta * L ** 2))
            for _ in range(10):
                u, v = rng.standard_normal(m), rng.standard_normal(m)
                ratio = (np.linalg.norm(exact_feedback_map(u, c, H, d, r)
                                        - exact_feedback_map(v, c, H, d, r))
                         / np.linalg.norm(u - v))
                worst_ratio = max(worst_ratio, ratio - alpha)
    _verdict(4, "Lyapunov solve and contraction", {
        "Lyapunov residual < 1e-10": worst_res < 1e-10,
        "contraction <= alpha + 1e-9": worst_ratio <= 1e-9,
    }, f"max residual {worst_res:.2g}, max factor - alpha {worst_ratio:.2g}")


def test_05_tracking_bound():
    t0 = time.perf_counter()
    failures = []
    worst = 0.0
    for seed in range(50):
        sc = random_tracking_scenario(seed, eta_fraction=0.5)
        log = run(sc)
        c = compute_constants(sc.plant, sc.controller)
        report = verify_bound(log, c, sc.H_true, sc.controller.H_hat, TELESCOPED)
        if not (report.applicable and report.holds):
            failures.append(seed)
        else:
            worst = max(worst, float(np.max(report.lhs / report.rhs)))
    runtime = time.perf_counter() - t0
    _verdict(5, "tracking bound holds at eta*/2", {
        "holds on all 50 scenarios": not failures,
        "runtime < 60 s": runtime < 60,
    }, f"failures {failures}, max lhs/rhs {worst:.3f}, {runtime:.1f} s")


def _empirical_rate(err, floor=1e-12):
    k = np.nonzero(err > floor)[0]
    k = k[k >= 5]
    slope = np.polyfit(k, np.log(err[k]), 1)[0]
    return float(np.exp(slope))


def test_06_exact_model_convergence():
    worst_steps = 0
    worst_rate_excess = -np.inf
    for seed in range(8):
        rng = np.random.default_rng([6, seed])
        plant = plant_with_sensitivity(rng.standard_normal((2, 2)), 0.2 * np.eye(2))
        signals = SignalSchedule.constant(2000, rng.standard_normal(2), rng.standard_normal(2),
                                          rng.standard_normal(2))
        for variant in (ROBUST_L2, ROBUST_L1):
            cfg = make_config(variant, 1.0, np.eye(2), np.eye(2), 1.0, sensitivity(plant),
                              rho=0.0)
            cfg = cfg.with_eta(0.5 * max_step_size(plant, cfg))
            c = compute_constants(plant, cfg)
            log = run(Scenario(plant, signals, cfg, u0=rng.standard_normal(2), target=CONTROLLER))
            hit = np.nonzero(log.err_u < 1e-8)[0]
            worst_steps = max(worst_steps, int(hit[0]) if hit.size else 10 ** 9)
            worst_rate_excess = max(worst_rate_excess, _empirical_rate(log.err_u) - c.c_M)
    _verdict(6, "exact-model convergence", {
        "||u - u*|| < 1e-8 within 2000 steps": worst_steps < 2000,
        "rate <= c_M + 0.05": worst_rate_excess <= 0.05,
    }, f"16 runs, slowest reaches 1e-8 at step {worst_steps}, "
       f"max rate - c_M {worst_rate_excess:.3f}")


def test_07_sigma_trend():
    rows = sweep_sigma(jobs=JOBS)
    med = median_gaps(rows)
    div = divergence_counts(rows)
    inversions = count_inversions(med.values())
    _verdict(7, "gap grows with sensitivity error", {
        "at most one inversion": inversions <= 1,
        "some sigma diverges": any(div.values()),
    }, "median gaps " + ", ".join(f"{s:g}:{g:.3g}" for s, g in med.items())
       + f"; diverged {list(div.values())}; inversions {inversions}")


def test_08_dimension_trend():
    rows = sweep_dimension(jobs=JOBS)
    med = median_gaps(rows)
    inversions = count_inversions(med.values())
    _verdict(8, "gap grows with dimension", {
        "at most one inversion": inversions <= 1,
    }, "median gaps " + ", ".join(f"{m:g}:{g:.3g}" for m, g in med.items())
       + f"; inversions {inversions}")


def test_09_grid_case():
    t0 = time.perf_counter()
    result = grid_case()
    runtime = time.perf_counter() - t0
    rows = result.summary["controllers"]
    _verdict(9, "feeder case after slack-bus move", {
        "standard has violations": rows[STANDARD]["violations"] >= 1,
        "robust_l2 has no violations": rows[ROBUST_L2]["violations"] == 0,
        "robust_l1 has no violations": rows[ROBUST_L1]["violations"] == 0,
        "l1 has more zero q than l2": rows[ROBUST_L1]["zero_q"] > rows[ROBUST_L2]["zero_q"],
        "runtime < 60 s": runtime < 60,
    }, "violations " + ", ".join(f"{v} {rows[v]['violations']}" for v in rows)
       + f"; zero q l1 {rows[ROBUST_L1]['zero_q']} vs l2 {rows[ROBUST_L2]['zero_q']}; "
       f"{runtime:.1f} s")


CLI_CASES = [
    ("run", "run_static.json"), ("run", "run_lti.json"), ("run", "run_diverge.json"),
    ("analyze", "analyze.json"), ("analyze", "analyze_large_eta.json"),
    ("grid", "grid.json"), ("sweep-sigma", "sweep_sigma.json"), ("sweep-dim", "sweep_dim.json"),
]


def _snapshot(path):
    return {name: open(os.path.join(path, name), "rb").read() for name in sorted(os.listdir(path))}


def test_10_determinism():
    tmp = tempfile.mkdtemp()
    mismatched = []
    try:
        for command, name in CLI_CASES:
            outs = []
            for rep in ("a", "b"):
                out = os.path.join(tmp, f"{name}-{rep}")
                cli_main([command, "--config", os.path.join(CONFIGS, name), "--out", out,
                          "--jobs", str(JOBS)])
                outs.append(_snapshot(out))
            if not outs[0] or outs[0] != outs[1]:
                mismatched.append(f"{command} {name}")
    finally:
        shutil.rmtree(tmp)
    _verdict(10, "byte-identical CLI outputs", {
        "all commands repeat exactly": not mismatched,
    }, f"{len(CLI_CASES)} command/config pairs; mismatched {mismatched}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
