"""Online feedback-optimization update laws.

All three controllers share the measured-gradient direction
``R u + lam H_hat^T Q (y - r)``; the ridge variant adds ``rho u`` and the lasso
variant applies soft thresholding afterwards.  Optional box bounds are
enforced by projection after the update.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .numerics import as_matrix, as_vector
from .problems import L1, L2, Regularizer, RobustProblem, soft_threshold

STANDARD = "standard"
ROBUST_L2 = "robust_l2"
ROBUST_L1 = "robust_l1"
VARIANTS = (STANDARD, ROBUST_L2, ROBUST_L1)
_REG_KIND = {STANDARD: None, ROBUST_L2: L2, ROBUST_L1: L1}


@dataclass(frozen=True)
class ControllerConfig:
    variant: str
    eta: float
    R: np.ndarray
    Q: np.ndarray
    lam: float
    H_hat: np.ndarray
    reg: Regularizer = None
    box: tuple = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"unknown controller variant {self.variant!r}")
        if not self.eta > 0:
            raise InvalidArgumentError("step size eta must be positive")
        want = _REG_KIND[self.variant]
        have = None if self.reg is None else self.reg.kind
        if want != have:
            raise InvalidArgumentError(
                f"variant {self.variant} needs regularizer {want}, got {have}")
        # validates shapes once
        problem = RobustProblem(self.R, self.Q, self.lam, self.H_hat)
        object.__setattr__(self, "R", problem.R)
        object.__setattr__(self, "Q", problem.Q)
        object.__setattr__(self, "H_hat", problem.H_hat)
        object.__setattr__(self, "lam", problem.lam)
        if self.reg is not None and self.reg.kind == L1 and self.reg.rho.shape != (problem.m,):
            raise InvalidArgumentError("rho_col length must equal the input dimension")
        if self.box is not None:
            lo, hi = (as_vector(b, "box", problem.m) for b in self.box)
            if np.any(lo > hi):
                raise InvalidArgumentError("box lower bound exceeds upper bound")
            object.__setattr__(self, "box", (lo, hi))

    @property
    def m(self):
        return self.H_hat.shape[1]

    @property
    def p(self):
        return self.H_hat.shape[0]

    @property
    def rho_gen(self):
        return self.reg.rho if self.reg is not None and self.reg.kind == L2 else 0.0

    def problem(self):
        return RobustProblem(self.R, self.Q, self.lam, self.H_hat)

    def with_eta(self, eta):
        return replace(self, eta=eta)


@dataclass(frozen=True)
class ControllerState:
    u: np.ndarray
    k: int = 0


def project_box(u, lo, hi):
    """Euclidean projection onto ``[lo, hi]`` (component-wise clamp)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise InvalidArgumentError("box lower bound exceeds upper bound")
    return np.minimum(np.maximum(np.asarray(u, dtype=float), lo), hi)


def _direction(state, y, r, cfg):
    u = as_vector(state.u, "u", cfg.m)
    y = as_vector(y, "y", cfg.p)
    r = as_vector(r, "r", cfg.p)
    return u, cfg.R @ u + cfg.lam * cfg.H_hat.T @ (cfg.Q @ (y - r))


def _finish(u_next, state, cfg, box):
    box = cfg.box if box is None else box
    if box is not None:
        u_next = project_box(u_next, *box)
    return ControllerState(u_next, state.k + 1)


def standard_step(state, y, r, cfg, box=None):
    """Plain gradient step driven by the measured output."""
    u, g = _direction(state, y, r, cfg)
    return _finish(u - 2.0 * cfg.eta * g, state, cfg, box)


def robust_l2_step(state, y, r, cfg, box=None):
    u, g = _direction(state, y, r, cfg)
    return _finish(u - 2.0 * cfg.eta * (g + cfg.rho_gen * u), state, cfg, box)


def robust_l1_step(state, y, r, cfg, box=None):
    """Proximal-gradient step: soft thresholding by ``eta * rho_col``, then the box."""
    u, g = _direction(state, y, r, cfg)
    v = u - 2.0 * cfg.eta * g
    return _finish(soft_threshold(v, cfg.eta * cfg.reg.rho), state, cfg, box)


_STEPS = {STANDARD: standard_step, ROBUST_L2: robust_l2_step, ROBUST_L1: robust_l1_step}


def controller_step(state, y, r, cfg, box=None):
    """Dispatch on ``cfg.variant``."""
    return _STEPS[cfg.variant](state, y, r, cfg, box)


def exact_feedback_map(u, cfg, H, d, r):
    """Controller update with the measurement replaced by ``H u + d``."""
    y = np.asarray(H) @ np.asarray(u, dtype=float) + np.asarray(d, dtype=float)
    return controller_step(ControllerState(np.asarray(u, dtype=float)), y, r, cfg).u


def make_config(variant, eta, R, Q, lam, H_hat, rho=None, box=None):
    """Build a config, wrapping a bare ``rho`` into the matching regularizer."""
    reg = None
    if variant == ROBUST_L2:
        reg = Regularizer(L2, 0.0 if rho is None else rho)
    elif variant == ROBUST_L1:
        m = as_matrix(H_hat, "H_hat").shape[1]
        rho = 0.0 if rho is None else rho
        reg = Regularizer(L1, np.broadcast_to(np.asarray(rho, dtype=float), (m,)))
    return ControllerConfig(variant, eta, R, Q, lam, H_hat, reg, box)
