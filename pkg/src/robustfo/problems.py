"""Objectives, regularized reformulations and offline solvers."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (ConvergenceError, DegenerateOptimumError, IllPosedError,
                     InvalidArgumentError)
from .numerics import as_matrix, as_vector
from .uncertainty import COL, GEN, UncertaintySet, compact_form, worst_case_value

L2 = "l2"
L1 = "l1"
PRACTICAL = "practical"
EXACT = "exact"


@dataclass(frozen=True)
class Regularizer:
    """``kind="l2"`` with scalar ``rho`` (ridge) or ``kind="l1"`` with vector ``rho`` (lasso)."""

    kind: str
    rho: object

    def __post_init__(self):
        if self.kind == L2:
            rho = float(self.rho)
            if not rho >= 0:
                raise InvalidArgumentError("rho_gen must be non-negative")
        elif self.kind == L1:
            rho = as_vector(self.rho, "rho_col").copy()
            if np.any(rho < 0):
                raise InvalidArgumentError("rho_col entries must be non-negative")
        else:
            raise InvalidArgumentError(f"unknown regularizer {self.kind!r}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class RobustProblem:
    """Weights, nominal sensitivity and (optionally) the uncertainty set.

    In ``practical`` mode controllers use a user-supplied constant
    regularizer; ``exact`` mode derives it from the uncertainty bound.
    """

    R: np.ndarray
    Q: np.ndarray
    lam: float
    H_hat: np.ndarray
    uset: UncertaintySet = None
    reg_mode: str = PRACTICAL

    def __post_init__(self):
        H_hat = as_matrix(self.H_hat, "H_hat")
        p, m = H_hat.shape
        R = as_matrix(self.R, "R")
        Q = as_matrix(self.Q, "Q")
        if R.shape != (m, m) or Q.shape != (p, p):
            raise InvalidArgumentError(
                f"R{R.shape} / Q{Q.shape} inconsistent with H_hat{H_hat.shape}")
        if self.lam < 0:
            raise InvalidArgumentError("lambda must be non-negative")
        if self.reg_mode not in (PRACTICAL, EXACT):
            raise InvalidArgumentError(f"unknown reg_mode {self.reg_mode!r}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "H_hat", H_hat)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def m(self):
        return self.H_hat.shape[1]

    @property
    def p(self):
        return self.H_hat.shape[0]

    def hessian_half(self):
        """``R + lam H_hat^T Q H_hat`` (half the Hessian of the smooth part)."""
        return self.R + self.lam * self.H_hat.T @ self.Q @ self.H_hat

    def linear_term(self, d, r):
        """``lam H_hat^T Q (d - r)``."""
        return self.lam * self.H_hat.T @ self.Q @ (np.asarray(d) - np.asarray(r))

    def compact(self, d, r):
        return compact_form(self.R, self.Q, self.lam, self.H_hat, d, r)

    def with_H(self, H):
        return RobustProblem(self.R, self.Q, self.lam, H, self.uset, self.reg_mode)


def smoothness_constants(problem, rho_gen=0.0):
    """Strong-convexity and smoothness constants ``(mu, L)`` of the smooth part."""
    w = np.linalg.eigvalsh(problem.hessian_half())
    return 2.0 * (w[0] + rho_gen), 2.0 * (w[-1] + rho_gen)


def nominal_objective(u, H, d, r, R, Q, lam):
    u = np.asarray(u, dtype=float)
    e = np.asarray(H) @ u + np.asarray(d) - np.asarray(r)
    return float(u @ np.asarray(R) @ u + lam * e @ np.asarray(Q) @ e)


def robust_objective(u, problem, d, r):
    """Inner maximum of the min-max objective, in closed form (squared)."""
    if problem.uset is None:
        raise InvalidArgumentError("robust_objective needs an uncertainty set")
    return worst_case_value(problem.compact(d, r), u, problem.uset) ** 2


def _smooth(u, problem, d, r):
    return nominal_objective(u, problem.H_hat, d, r, problem.R, problem.Q, problem.lam)


def grad_smooth(u, problem, d, r):
    """Gradient of ``||u||_R^2 + lam ||H_hat u + d - r||_Q^2``."""
    u = np.asarray(u, dtype=float)
    return 2.0 * (problem.hessian_half() @ u + problem.linear_term(d, r))


def phi_l2(u, problem, d, r, rho_gen):
    u = np.asarray(u, dtype=float)
    return _smooth(u, problem, d, r) + rho_gen * float(u @ u)


def grad_phi_l2(u, problem, d, r, rho_gen):
    return grad_smooth(u, problem, d, r) + 2.0 * rho_gen * np.asarray(u, dtype=float)


def phi_l1(u, problem, d, r, rho_col):
    u = np.asarray(u, dtype=float)
    rho_col = np.broadcast_to(np.asarray(rho_col, dtype=float), u.shape)
    return _smooth(u, problem, d, r) + float(rho_col @ np.abs(u))


def soft_threshold(v, tau):
    """Proximal map of ``tau^T |.|``: ``sign(v) * max(|v| - tau, 0)``."""
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise InvalidArgumentError("thresholds must be non-negative")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def solve_l2(problem, d, r, rho_gen=0.0):
    """Closed-form minimizer of the ridge-regularized objective."""
    G = problem.hessian_half() + rho_gen * np.eye(problem.m)
    w = np.linalg.eigvalsh(G)
    if w[0] <= 1e-14 * max(1.0, abs(w[-1])):
        raise IllPosedError("R + lam H^T Q H + rho I is not positive definite")
    return -np.linalg.solve(G, problem.linear_term(d, r))


def solve_l1(problem, d, r, rho_col, tol=1e-12, max_iter=200_000, u0=None):
    """Minimize the lasso-regularized objective by proximal gradient (step 1/L).

    Iterates until the prox-gradient fixed-point residual drops below ``tol``.
    Once the support looks settled, the KKT system restricted to it is solved
    directly and accepted if it passes the same residual test.
    """
    rho_col = np.broadcast_to(np.asarray(rho_col, dtype=float), (problem.m,))
    if np.any(rho_col < 0):
        raise InvalidArgumentError("rho_col entries must be non-negative")
    mu, L = smoothness_constants(problem)
    if mu <= 0:
        raise IllPosedError("smooth part is not strongly convex")
    step = 1.0 / L
    G2 = 2.0 * problem.hessian_half()
    b2 = 2.0 * problem.linear_term(d, r)
    tau = step * rho_col

    def prox_grad(u):
        v = u - step * (G2 @ u + b2)
        return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)

    def polish(u):
        support = u != 0
        if not support.any():
            return u
        S = np.ix_(support, support)
        w = np.zeros_like(u)
        w[support] = -np.linalg.solve(G2[S], b2[support] + rho_col[support] * np.sign(u[support]))
        return w

    u = np.zeros(problem.m) if u0 is None else np.array(u0, dtype=float)
    residual = np.inf
    for it in range(max_iter):
        u_next = prox_grad(u)
        residual = np.linalg.norm(u_next - u)
        u = u_next
        if residual < tol:
            return u
        if it % 25 == 24 and residual < 1e-6:
            cand = polish(u)
            if np.linalg.norm(prox_grad(cand) - cand) < tol:
                return cand
    raise ConvergenceError(f"proximal gradient did not reach tol={tol}", residual)


def _l2_condition(cf, u, rho_bound):
    nu = np.linalg.norm(u)
    if nu == 0:
        raise DegenerateOptimumError("regularized optimum is u = 0")
    res = np.linalg.norm(cf.residual(u))
    return rho_bound * (res if res > 0 else 1.0) / nu


def _l1_condition(cf, u, rho_bound):
    res = np.linalg.norm(cf.residual(u))
    return 2.0 * res * rho_bound if res > 0 else rho_bound.copy()


def exact_regularizer(problem, d, r, beta=0.5, max_iter=500, rtol=1e-10):
    """Regularizer whose reformulated optimum coincides with the min-max optimum.

    Solves the fixed point ``rho = condition(u*(rho))`` by damped iteration
    ``rho+ = (1 - beta) rho + beta condition(u*(rho))``.  If the damped
    iteration stalls, the scalar fixed point is bracketed and found by Brent's
    method instead.

    Returns
    -------
    Regularizer
        ``l2`` for a Frobenius-ball set, ``l1`` for a column-wise set.

    Raises
    ------
    DegenerateOptimumError
        For a Frobenius ball large enough that the min-max optimum is ``u = 0``.
    """
    uset = problem.uset
    if uset is None:
        raise InvalidArgumentError("exact_regularizer needs an uncertainty set")
    cf = problem.compact(d, r)
    if uset.kind == GEN:
        return Regularizer(L2, _exact_l2(problem, cf, d, r, uset.rho, beta, max_iter, rtol))
    if uset.kind == COL:
        return Regularizer(L1, _exact_l1(problem, cf, d, r, uset.rho, beta, max_iter, rtol))
    raise InvalidArgumentError(f"unsupported set {uset.kind!r}")


def _exact_l2(problem, cf, d, r, bound, beta, max_iter, rtol):
    if bound == 0:
        return 0.0
    eps = cf.eps
    neps = np.linalg.norm(eps)
    if neps == 0 or np.linalg.norm(cf.M.T @ eps) <= bound * neps:
        raise DegenerateOptimumError(
            "uncertainty bound dominates: the min-max optimum is u = 0")

    def cond(rho):
        return _l2_condition(cf, solve_l2(problem, d, r, rho), bound)

    rho = cond(0.0)
    for _ in range(max_iter):
        target = cond(rho)
        if abs(target - rho) <= rtol * max(rho, 1e-300):
            return target
        rho = (1 - beta) * rho + beta * target

    # rho - cond(rho) < 0 at 0 and > 0 for large rho when the optimum is nonzero
    hi = max(rho, 1.0)
    while hi - cond(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ConvergenceError("could not bracket the l2 regularizer")
    return brentq(lambda s: s - cond(s), 0.0, hi, xtol=1e-15, rtol=1e-14)


def _exact_l1(problem, cf, d, r, bound, beta, max_iter, rtol):
    neps = np.linalg.norm(cf.eps)
    if neps == 0 or not np.any(bound):
        return bound.copy() if neps == 0 else np.zeros_like(bound)

    # rho = 2 s bound with the scalar s = ||M u*(rho) + eps|| in [0, ||eps||]
    cache = {}

    def resid_norm(s):
        if s not in cache:
            u = solve_l1(problem, d, r, 2.0 * s * bound, tol=1e-14)
            cache[s] = np.linalg.norm(cf.residual(u))
        return cache[s]

    s = resid_norm(0.0)
    for _ in range(max_iter):
        target = resid_norm(s)
        if abs(target - s) <= rtol * max(s, 1e-300):
            return 2.0 * target * bound
        s = (1 - beta) * s + beta * target
    s = brentq(lambda t: t - resid_norm(t), 0.0, neps, xtol=1e-15, rtol=1e-14)
    return 2.0 * s * bound


def regularized_minimizer(problem, d, r, reg):
    """Minimizer of the objective regularized by ``reg`` (ridge or lasso)."""
    if reg is None:
        return solve_l2(problem, d, r, 0.0)
    if reg.kind == L2:
        return solve_l2(problem, d, r, reg.rho)
    return solve_l1(problem, d, r, reg.rho)


def robust_minimizer(problem, d, r):
    """Min-max optimum obtained through the exact regularizer."""
    reg = exact_regularizer(problem, d, r)
    return regularized_minimizer(problem, d, r, reg), reg


def l1_optimality_residual(u, problem, d, r, rho_col):
    """Prox-gradient fixed-point residual; zero exactly at the lasso optimum."""
    _, L = smoothness_constants(problem)
    step = 1.0 / L
    g = grad_smooth(u, problem, d, r)
    rho_col = np.broadcast_to(np.asarray(rho_col, dtype=float), np.shape(u))
    return float(np.linalg.norm(u - soft_threshold(u - step * g, step * rho_col)))
