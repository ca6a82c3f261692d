"""Closed-loop simulation of a plant driven by a feedback-optimization controller."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .controllers import ControllerState, controller_step
from .errors import InvalidArgumentError
from .numerics import solve_discrete_lyapunov
from .plant import (StaticPlant, aggregate_disturbances, sensitivity,
                    steady_state_x)
from .problems import (L1, nominal_objective, phi_l1, phi_l2,
                       regularized_minimizer, robust_minimizer)

DIVERGENCE_LIMIT = 1e9
COMPLETED = "completed"
DIVERGED = "diverged"

# optimizer-trajectory modes
NOMINAL = "nominal"
REGULARIZED_L2 = "regularized_l2"
REGULARIZED_L1 = "regularized_l1"
ROBUST = "robust"
CONTROLLER = "controller"


@dataclass
class Scenario:
    plant: object
    signals: object
    controller: object
    x0: np.ndarray = None
    u0: np.ndarray = None
    H_true: np.ndarray = None
    target: str = CONTROLLER
    Qbar: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        cfg, plant, sig = self.controller, self.plant, self.signals
        if plant.m != cfg.m or plant.p != cfg.p:
            raise InvalidArgumentError(
                f"controller dims (m={cfg.m}, p={cfg.p}) do not match plant "
                f"(m={plant.m}, p={plant.p})")
        if sig.d_y.shape[1] != plant.p or (plant.n and sig.d_x.shape[1] != plant.n):
            raise InvalidArgumentError("signal dimensions do not match the plant")
        if sig.lo is not None and sig.lo.shape[1] != plant.m:
            raise InvalidArgumentError("box bounds must have the input dimension")
        self.x0 = np.zeros(plant.n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        self.u0 = np.zeros(plant.m) if self.u0 is None else np.asarray(self.u0, dtype=float)
        if self.x0.shape != (plant.n,) or self.u0.shape != (plant.m,):
            raise InvalidArgumentError("x0/u0 have the wrong dimension")
        if self.H_true is None:
            self.H_true = plant.H if isinstance(plant, StaticPlant) else sensitivity(plant)
        if self.Qbar is None:
            self.Qbar = np.eye(plant.n)


@dataclass
class TrajectoryLog:
    u: np.ndarray
    y: np.ndarray
    x: np.ndarray
    d: np.ndarray
    r: np.ndarray
    status: str
    phi: np.ndarray = None
    phi_star: np.ndarray = None
    u_star: np.ndarray = None
    err_u: np.ndarray = None
    err_x: np.ndarray = None
    d_x: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.u.shape[0]

    @property
    def gap(self):
        return self.phi - self.phi_star

    @property
    def diverged(self):
        return self.status == DIVERGED


def _target_problem(cfg, mode, H_true):
    problem = cfg.problem()
    if mode == CONTROLLER:
        return problem, cfg.reg
    if mode == NOMINAL:
        return problem.with_H(H_true), None
    raise InvalidArgumentError(f"unknown target mode {mode!r}")


def objective_value(u, problem, d, r, reg):
    if reg is None:
        return nominal_objective(u, problem.H_hat, d, r, problem.R, problem.Q, problem.lam)
    if reg.kind == L1:
        return phi_l1(u, problem, d, r, reg.rho)
    return phi_l2(u, problem, d, r, reg.rho)


def optimal_trajectory(problem, D, Rref, mode, reg=None):
    """Per-step optimizers ``u_k*`` and optimal values.

    ``mode`` is one of ``nominal`` (no regularizer; pass the true sensitivity
    in ``problem``), ``regularized_l2`` / ``regularized_l1`` (constant ``reg``)
    or ``robust`` (exact regularizer from ``problem.uset``, recomputed per step).
    """
    D = np.atleast_2d(D)
    Rref = np.atleast_2d(Rref)
    if mode == NOMINAL:
        reg = None
    elif mode in (REGULARIZED_L2, REGULARIZED_L1):
        want = "l2" if mode == REGULARIZED_L2 else "l1"
        if reg is None or reg.kind != want:
            raise InvalidArgumentError(f"mode {mode} needs an {want} regularizer")
    elif mode != ROBUST:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    U = np.empty((D.shape[0], problem.m))
    values = np.empty(D.shape[0])
    last = None
    for k, (d, r) in enumerate(zip(D, Rref)):
        key = (d.tobytes(), r.tobytes())
        if key == last:
            U[k], values[k] = U[k - 1], values[k - 1]
            continue
        if mode == ROBUST:
            u, step_reg = robust_minimizer(problem, d, r)
        else:
            u, step_reg = regularized_minimizer(problem, d, r, reg), reg
        U[k] = u
        values[k] = objective_value(u, problem, d, r, step_reg)
        last = key
    return U, values


def _mode_for(reg):
    if reg is None:
        return NOMINAL
    return REGULARIZED_L1 if reg.kind == L1 else REGULARIZED_L2


def run(scenario):
    """Simulate the closed loop for the schedule horizon.

    At step ``k`` the output ``y_k`` is read from ``x_k``, the controller
    produces ``u_{k+1}`` from ``(u_k, y_k, r_k)`` and the plant advances with
    ``u_k``.  A run stops with status ``diverged`` once ``||u|| > 1e9``.
    """
    plant, sig, cfg = scenario.plant, scenario.signals, scenario.controller
    K = sig.horizon
    static = isinstance(plant, StaticPlant)
    us, ys, xs = [], [], []
    u = scenario.u0.copy()
    x = scenario.x0.copy()
    state = ControllerState(u, 0)
    status = COMPLETED
    for k in range(K):
        y = plant.H @ u + sig.d_y[k] if static else plant.C @ x + sig.d_y[k]
        us.append(u)
        ys.append(y)
        xs.append(x)
        state = controller_step(state, y, sig.r[k], cfg, box=sig.box(k))
        if not static:
            x = plant.A @ x + plant.B @ u + sig.d_x[k]
        u = state.u
        if not (np.all(np.isfinite(u)) and np.linalg.norm(u) <= DIVERGENCE_LIMIT):
            status = DIVERGED
            break
    n_steps = len(us)
    if static:
        d = sig.d_y[:n_steps].copy()
    else:
        d = aggregate_disturbances(plant, sig)[:n_steps]
    log = TrajectoryLog(
        u=np.array(us), y=np.array(ys), x=np.array(xs).reshape(n_steps, plant.n),
        d=d, r=sig.r[:n_steps].copy(), status=status, d_x=sig.d_x[:n_steps].copy(),
        meta={"variant": cfg.variant, "eta": cfg.eta, "target": scenario.target,
              "seed": scenario.seed},
    )
    if status == COMPLETED:
        attach_optimum(log, scenario)
        if not static:
            tracking_metrics(log, plant, scenario.Qbar)
    return log


def attach_optimum(log, scenario):
    """Fill ``u_star``, ``phi``, ``phi_star`` and ``err_u`` for the target mode."""
    cfg = scenario.controller
    problem, reg = _target_problem(cfg, scenario.target, scenario.H_true)
    U, values = optimal_trajectory(problem, log.d, log.r, _mode_for(reg), reg)
    log.u_star = U
    log.phi_star = values
    log.phi = np.array([objective_value(u, problem, d, r, reg)
                        for u, d, r in zip(log.u, log.d, log.r)])
    log.err_u = np.linalg.norm(log.u - U, axis=1)
    return log


def tracking_metrics(log, plant, Qbar=None):
    """Per-step ``||u_k - u_k*||``, ``||x_k - x_ss,k||_P`` and optimality gap.

    ``x_ss,k`` is the steady state induced by ``u_k`` and ``d_{x,k}``; ``P``
    solves the Lyapunov equation with ``Qbar`` (identity by default).
    """
    Qbar = np.eye(plant.n) if Qbar is None else Qbar
    P = solve_discrete_lyapunov(plant.A, Qbar)
    err_x = np.empty(len(log))
    for k in range(len(log)):
        e = log.x[k] - steady_state_x(plant, log.u[k], log.d_x[k])
        err_x[k] = np.sqrt(max(e @ P @ e, 0.0))
    log.err_x = err_x
    if log.err_u is None:
        log.err_u = np.linalg.norm(log.u - log.u_star, axis=1)
    return log.err_u, err_x, log.gap


def tail_mean(values, fraction=0.1):
    values = np.asarray(values)
    n = max(1, int(np.ceil(fraction * len(values))))
    return float(np.mean(values[-n:]))


def write_log_csv(log, path, scenario_hash):
    """One row per step: ``k, u[i]..., y[j]..., gap, err_u, err_x_P``."""
    m = log.u.shape[1]
    p = log.y.shape[1]
    n = len(log)
    gap = log.gap if log.phi is not None else np.full(n, np.nan)
    err_u = log.err_u if log.err_u is not None else np.full(n, np.nan)
    err_x = log.err_x if log.err_x is not None else np.full(n, np.nan)
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario {scenario_hash} status {log.status}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k"] + [f"u{i}" for i in range(m)] + [f"y{j}" for j in range(p)]
                        + ["gap", "err_u", "err_x_P"])
        for k in range(n):
            row = [str(k)] + [_fmt(v) for v in log.u[k]] + [_fmt(v) for v in log.y[k]]
            row += [_fmt(gap[k]), _fmt(err_u[k]), _fmt(err_x[k])]
            writer.writerow(row)


def _fmt(v):
    return format(float(v), ".17g")
