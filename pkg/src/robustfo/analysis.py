"""Constants and checks for the closed-loop tracking (ISS-type) bound.

The coupled error ``w_k = (||u_k - u_k*||, ||x_k - x_ss,k||_P)`` obeys
``w_{k+1} <= G w_k + q_k`` element-wise with the 2x2 positive gain matrix
``G = [[alpha, eta L_T^y ||C|| / lambda_min(P)], [eta c2, c1]]``.  When the
spectral radius ``c_M`` of ``G`` is below one, ``||G^k|| <= r c_M^k`` and

    ||w_k|| <= r c_M^k ||w_0|| + r / (1 - c_M) ||sup_i q_i||.

Summing ``G^j q`` from ``j = 0`` gives the factor ``1 / (1 - c_M)``; the
variant with ``c_M / (1 - c_M)`` is kept as ``form="printed"`` for comparison.
"""

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .controllers import ROBUST_L1
from .errors import BoundInapplicableError, InvalidArgumentError
from .numerics import op_norm, solve_discrete_lyapunov, spectral_radius
from .problems import smoothness_constants

VIOLATION_TOL = 1e-9
TELESCOPED = "telescoped"
PRINTED = "printed"
POWER_SCAN = 10_000


@dataclass(frozen=True)
class TheoremConstants:
    eta: float
    gamma: float
    P: np.ndarray
    lambda_min_P: float
    lambda_max_P: float
    L_x_u: float
    L_x_d: float
    L_T_y: float
    L_Phi_u_prime: float
    mu_Phi: float
    L_Phi: float
    alpha: float
    c_bar_1: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    gain2x2: np.ndarray
    c_M: float
    r: float
    eta_star: float
    norm_C: float

    @property
    def r1(self):
        return self.r

    @property
    def r2(self):
        return self.r

    def as_dict(self):
        out = asdict(self)
        out["P"] = self.P.tolist()
        out["gain2x2"] = self.gain2x2.tolist()
        out["r1"] = self.r
        out["r2"] = self.r
        return out


class _Parts:
    """The step-size independent ingredients of the constant ledger."""

    def __init__(self, plant, cfg, Qbar):
        if plant.n == 0:
            raise InvalidArgumentError("bound analysis needs a plant with state")
        Qbar = np.eye(plant.n) if Qbar is None else np.asarray(Qbar, dtype=float)
        self.P = solve_discrete_lyapunov(plant.A, Qbar)
        wP = np.linalg.eigvalsh(self.P)
        self.lmin_P, self.lmax_P = float(wP[0]), float(wP[-1])
        self.gamma = float(np.linalg.eigvalsh(Qbar)[0]) / self.lmax_P
        resolvent = np.linalg.inv(np.eye(plant.n) - plant.A)
        self.L_x_u = op_norm(resolvent @ plant.B)
        self.L_x_d = op_norm(resolvent)
        self.norm_C = op_norm(plant.C)
        lam = cfg.lam
        self.lam = lam
        self.HtQ = op_norm(cfg.H_hat.T @ cfg.Q)
        self.L_T_y = 2.0 * lam * self.HtQ
        rho_gen = cfg.rho_gen
        problem = cfg.problem()
        self.L_Phi_u_prime = op_norm(2.0 * problem.hessian_half()
                                     + 2.0 * rho_gen * np.eye(cfg.m))
        self.mu, self.L = smoothness_constants(problem, rho_gen)
        self.c2 = self.lmax_P * self.L_x_u * self.L_Phi_u_prime
        self.c3 = 2.0 * lam * self.L_x_u * self.lmax_P * self.HtQ
        self.c4 = self.lmax_P * self.L_x_d
        if cfg.variant == ROBUST_L1:
            self.c5 = 2.0 * self.lmax_P * self.L_x_u * float(np.linalg.norm(cfg.reg.rho))
        else:
            self.c5 = 0.0

    @property
    def eta_upper(self):
        """Right end of the contraction interval ``(0, 2 mu / L^2)``."""
        return 2.0 * self.mu / self.L ** 2 if self.mu > 0 else 0.0

    def alpha(self, eta):
        return float(np.sqrt(max(1.0 - eta * (2.0 * self.mu - eta * self.L ** 2), 0.0)))

    def c1(self, eta):
        return (np.sqrt(1.0 - self.gamma) + 2.0 * eta * self.lam * self.L_x_u * self.HtQ
                * self.norm_C * self.lmax_P / self.lmin_P)

    def gain(self, eta):
        return np.array([
            [self.alpha(eta), eta * self.L_T_y * self.norm_C / self.lmin_P],
            [eta * self.c2, self.c1(eta)],
        ])

    def g(self, eta):
        a, c1 = self.alpha(eta), self.c1(eta)
        return (self.L_T_y * self.norm_C * self.c2 / self.lmin_P * eta ** 2
                + a + c1 - a * c1)


def step_size_function(plant, cfg, Qbar=None):
    """``g(eta)``; the gain matrix is a contraction iff ``g(eta) < 1`` on the
    contraction interval of the controller map."""
    return _Parts(plant, cfg, Qbar).g


def _max_step(parts, grid=2000):
    ub = parts.eta_upper
    if ub <= 0:
        return 0.0
    etas = ub * np.arange(1, grid + 1) / grid
    vals = np.array([parts.g(e) for e in etas])
    above = np.nonzero(vals >= 1.0)[0]
    hi = etas[above[0]] if above.size else ub
    lo = etas[above[0] - 1] if above.size and above[0] > 0 else 0.0
    if lo == 0.0:
        lo = hi
        while parts.g(lo) >= 1.0:
            lo *= 0.5
            if lo < 1e-300:
                return 0.0
    for _ in range(500):
        if hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        if parts.g(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return float(lo)


def max_step_size(plant, cfg, Qbar=None):
    """Largest step size below the first crossing of ``g(eta) = 1``.

    ``g`` need not be monotone, so the crossing is bracketed on a grid of the
    contraction interval and refined by bisection.
    """
    return _max_step(_Parts(plant, cfg, Qbar))


def power_bound_constant(G, c_M, scan=POWER_SCAN):
    """A constant ``r >= 1`` with ``||G^k|| <= r c_M^k`` for all ``k``.

    Uses the eigenvector condition number (valid for every ``k`` when ``G`` is
    diagonalizable) and never less than the explicit maximum over ``k <= scan``.
    """
    w, V = np.linalg.eig(G)
    r = 1.0
    if np.linalg.matrix_rank(V) == V.shape[0]:
        r = max(r, float(np.linalg.cond(V)))
    if c_M > 0:
        step = G / c_M
        powers = np.empty((scan,) + G.shape)
        Gk = np.eye(G.shape[0])
        for k in range(scan):
            Gk = Gk @ step
            powers[k] = Gk
        r = max(r, float(np.max(np.linalg.norm(powers, 2, axis=(1, 2)))))
    return r


def compute_constants(plant, cfg, Qbar=None, eta=None):
    """Every constant of the bound for controller ``cfg`` at step size ``eta``
    (``cfg.eta`` when omitted)."""
    parts = _Parts(plant, cfg, Qbar)
    eta = cfg.eta if eta is None else float(eta)
    if not eta > 0:
        raise InvalidArgumentError("eta must be positive")
    G = parts.gain(eta)
    c_M = spectral_radius(G)
    r = power_bound_constant(G, c_M) if c_M < 1 else np.inf
    return TheoremConstants(
        eta=eta, gamma=parts.gamma, P=parts.P, lambda_min_P=parts.lmin_P,
        lambda_max_P=parts.lmax_P, L_x_u=parts.L_x_u, L_x_d=parts.L_x_d,
        L_T_y=parts.L_T_y, L_Phi_u_prime=parts.L_Phi_u_prime, mu_Phi=parts.mu,
        L_Phi=parts.L, alpha=parts.alpha(eta), c_bar_1=parts.L_T_y, c1=parts.c1(eta),
        c2=parts.c2, c3=parts.c3, c4=parts.c4, c5=parts.c5, gain2x2=G, c_M=c_M, r=r,
        eta_star=_max_step(parts), norm_C=parts.norm_C,
    )


def iss_bound(constants, w0, q_sup, k, form=TELESCOPED):
    """Right-hand side of the tracking bound at step ``k``.

    ``form="telescoped"`` sums ``G^j q`` for ``j = 0 .. k-1``, giving the
    factor ``r / (1 - c_M)``.  ``form="printed"`` uses ``r c_M / (1 - c_M)``,
    which drops the ``j = 0`` term and can undercut the true error when
    ``c_M`` is small.
    """
    c = constants.c_M
    if not c < 1:
        raise BoundInapplicableError(f"c_M = {c:.6g} is not below 1")
    if form == TELESCOPED:
        gain = constants.r / (1.0 - c)
    elif form == PRINTED:
        gain = constants.r * c / (1.0 - c)
    else:
        raise InvalidArgumentError(f"unknown bound form {form!r}")
    return float(constants.r * c ** k * np.linalg.norm(w0) + gain * np.linalg.norm(q_sup))


def q_sequence(log, constants, H_true, H_hat):
    """Perturbation terms ``q_k`` for ``k = 0 .. len(log) - 2``.

    The disturbance increment uses the state disturbance ``d_x``, the quantity
    that moves the steady state ``x_ss``.
    """
    mismatch = op_norm(np.asarray(H_true) - np.asarray(H_hat))
    eta = constants.eta
    nu = np.linalg.norm(log.u[:-1], axis=1)
    du_star = np.linalg.norm(np.diff(log.u_star, axis=0), axis=1)
    dd = np.linalg.norm(np.diff(log.d_x, axis=0), axis=1) if log.d_x.shape[1] else 0.0
    q1 = eta * constants.c_bar_1 * mismatch * nu + du_star
    q2 = eta * constants.c3 * mismatch * nu + constants.c4 * dd + eta * constants.c5
    return np.column_stack([q1, q2 * np.ones_like(q1)])


@dataclass
class BoundReport:
    holds: bool
    applicable: bool
    lhs: np.ndarray
    rhs: np.ndarray
    first_violation: int = None
    reason: str = ""

    @property
    def margin(self):
        return self.rhs - self.lhs

    def summary(self):
        if not self.applicable:
            return f"bound-inapplicable: {self.reason}"
        if self.holds:
            return f"holds: min margin {np.min(self.margin):.6g} over {len(self.lhs)} steps"
        return f"violated at step {self.first_violation}"


def verify_bound(log, constants, H_true, H_hat, form=TELESCOPED):
    """Compare the logged errors against the bound at every step.

    The supremum of ``q`` runs over all available indices up to ``k``
    (``w_k`` only depends on ``q_0 .. q_{k-1}``, so this is conservative).
    """
    n = len(log)
    if log.diverged or log.err_x is None:
        return BoundReport(False, False, np.zeros(0), np.zeros(0),
                           reason="run diverged or has no tracking metrics")
    if not constants.c_M < 1 or constants.eta > constants.eta_star * (1 + 1e-12):
        return BoundReport(False, False, np.zeros(0), np.zeros(0),
                           reason=f"eta={constants.eta:.6g} exceeds eta*={constants.eta_star:.6g}"
                           f" (c_M={constants.c_M:.6g})")
    w = np.column_stack([log.err_u, log.err_x])
    lhs = np.linalg.norm(w, axis=1)
    q = q_sequence(log, constants, H_true, H_hat)
    q_run = np.maximum.accumulate(q, axis=0) if len(q) else np.zeros((0, 2))
    rhs = np.empty(n)
    for k in range(n):
        q_sup = q_run[min(k, len(q_run) - 1)] if len(q_run) else np.zeros(2)
        rhs[k] = iss_bound(constants, w[0], q_sup, k, form)
    bad = np.nonzero(lhs > rhs + VIOLATION_TOL)[0]
    first = int(bad[0]) if bad.size else None
    return BoundReport(first is None, True, lhs, rhs, first)


def write_bound_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "lhs", "rhs", "margin"])
        for k, (a, b) in enumerate(zip(report.lhs, report.rhs)):
            writer.writerow([k, format(a, ".17g"), format(b, ".17g"), format(b - a, ".17g")])
