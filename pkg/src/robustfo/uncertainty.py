"""Sensitivity uncertainty sets, the stacked least-squares form and worst cases.

The quadratic objective ``||u||_R^2 + lam ||(H_hat + Delta_H) u + d - r||_Q^2``
is rewritten as ``||(M + Delta_M) u + eps||^2`` with::

    M   = [R^{1/2}; lam^{1/2} Q^{1/2} H_hat]
    eps = [0; lam^{1/2} Q^{1/2} (d - r)]
    Delta_M = [0; lam^{1/2} Q^{1/2} Delta_H]

The output block of ``eps`` carries the same weight as the output block of
``M``; without it the two forms differ unless ``lam Q = I``.

Closed-form worst cases are taken over the *full* Frobenius / column-norm ball
of ``Delta_M``.  The structured set (top block pinned at zero) is generally
strictly smaller; :func:`structured_worst_case_value` quantifies the gap.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .numerics import as_matrix, as_vector, psd_sqrt

GEN = "gen"
COL = "col"


@dataclass(frozen=True)
class UncertaintySet:
    """Either a Frobenius ball (``kind="gen"``, scalar ``rho``) or per-column
    norm bounds (``kind="col"``, vector ``rho`` of length m)."""

    kind: str
    rho: object

    def __post_init__(self):
        if self.kind == GEN:
            rho = float(self.rho)
            if not rho >= 0:
                raise InvalidArgumentError("rho_gen must be non-negative")
        elif self.kind == COL:
            rho = as_vector(self.rho, "rho_col").copy()
            if np.any(rho < 0):
                raise InvalidArgumentError("rho_col entries must be non-negative")
            rho.setflags(write=False)
        else:
            raise InvalidArgumentError(f"unknown uncertainty set type {self.kind!r}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def gen(cls, rho):
        return cls(GEN, rho)

    @classmethod
    def col(cls, rho):
        return cls(COL, rho)

    def contains(self, delta_m, tol=1e-9):
        """Membership of a ``(m+p) x m`` matrix in the ball."""
        delta_m = np.asarray(delta_m, dtype=float)
        if self.kind == GEN:
            return bool(np.linalg.norm(delta_m, "fro") <= self.rho * (1 + tol) + tol)
        norms = np.linalg.norm(delta_m, axis=0)
        return bool(np.all(norms <= self.rho * (1 + tol) + tol))


@dataclass(frozen=True)
class CompactForm:
    M: np.ndarray
    eps: np.ndarray
    m: int
    p: int

    def residual(self, u):
        return self.M @ u + self.eps


def compact_form(R, Q, lam, H_hat, d, r):
    """Stack the weighted objective into ``M`` and ``eps``."""
    if lam < 0:
        raise InvalidArgumentError("lambda must be non-negative")
    H_hat = as_matrix(H_hat, "H_hat")
    p, m = H_hat.shape
    R = as_matrix(R, "R")
    Q = as_matrix(Q, "Q")
    if R.shape != (m, m) or Q.shape != (p, p):
        raise InvalidArgumentError(
            f"R{R.shape} / Q{Q.shape} inconsistent with H_hat{H_hat.shape}")
    d = as_vector(d, "d", p)
    r = as_vector(r, "r", p)
    W = np.sqrt(lam) * psd_sqrt(Q)
    M = np.vstack([psd_sqrt(R), W @ H_hat])
    eps = np.concatenate([np.zeros(m), W @ (d - r)])
    return CompactForm(M, eps, m, p)


def worst_case_value(cf, u, uset):
    """Supremum of ``||(M + Delta_M) u + eps||`` over the ball (non-squared)."""
    u = as_vector(u, "u", cf.m)
    base = np.linalg.norm(cf.residual(u))
    if uset.kind == GEN:
        return float(base + uset.rho * np.linalg.norm(u))
    return float(base + uset.rho @ np.abs(u))


def _unit_direction(v, size):
    nv = np.linalg.norm(v)
    if nv > 0:
        return v / nv
    e = np.zeros(size)
    e[0] = 1.0
    return e


def worst_case_maximizer(cf, u, uset, structured=False):
    """A ``Delta_M`` attaining :func:`worst_case_value`.

    With ``structured=True`` the top ``m`` rows are zero; this stays inside the
    image of ``Delta_H`` but attains only :func:`structured_worst_case_value`.
    """
    u = as_vector(u, "u", cf.m)
    rows = cf.m + cf.p
    res = cf.residual(u)
    if structured:
        direction = np.zeros(rows)
        direction[cf.m:] = _unit_direction(res[cf.m:], cf.p)
    else:
        direction = _unit_direction(res, rows)
    if uset.kind == GEN:
        nu = np.linalg.norm(u)
        if nu == 0:
            raise DegenerateInputError("maximizer over the Frobenius ball needs u != 0")
        return uset.rho * np.outer(direction, u / nu)
    return np.outer(direction, uset.rho * np.sign(u))


def structured_worst_case_value(cf, u, uset):
    """Supremum over ``Delta_M = [0; D]`` only (D ranging over the same ball).

    Equals ``sqrt(||R^{1/2} u||^2 + (||b|| + s(u))^2)`` where ``b`` is the
    output block of the residual and ``s(u)`` is ``rho ||u||`` or ``rho^T |u|``.
    Never larger than :func:`worst_case_value`; equal iff ``R^{1/2} u = 0`` or
    the perturbation term vanishes.
    """
    u = as_vector(u, "u", cf.m)
    res = cf.residual(u)
    top, bottom = res[:cf.m], res[cf.m:]
    spread = uset.rho * np.linalg.norm(u) if uset.kind == GEN else uset.rho @ np.abs(u)
    return float(np.hypot(np.linalg.norm(top), np.linalg.norm(bottom) + spread))




def sample_uncertainty(uset, m, p, boundary=False, seed=0, structured=True, size=None):
    """Random ``Delta_M`` inside (or on the boundary of) the set.

    ``structured=True`` keeps the top ``m`` rows at zero, as in the stacked
    form.  Pass ``size`` to draw a batch of shape ``(size, m+p, m)``.
    """
    rng = np.random.default_rng(seed)
    batch = 1 if size is None else int(size)
    rows = p if structured else m + p
    z = rng.standard_normal((batch, rows, m))
    if uset.kind == GEN:
        norms = np.linalg.norm(z.reshape(batch, -1), axis=1)
        norms[norms == 0] = 1.0
        z /= norms[:, None, None]
        radius = np.full(batch, uset.rho)
        if not boundary:
            radius = radius * rng.uniform(size=batch) ** (1.0 / (rows * m))
        z *= radius[:, None, None]
    else:
        if uset.rho.shape[0] != m:
            raise InvalidArgumentError("rho_col length must equal m")
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        z /= norms
        radius = np.broadcast_to(uset.rho, (batch, m)).copy()
        if not boundary:
            radius *= rng.uniform(size=(batch, m)) ** (1.0 / rows)
        z *= radius[:, None, :]
    if structured:
        z = np.concatenate([np.zeros((batch, m, m)), z], axis=1)
    return z[0] if size is None else z


def delta_h_from_delta_m(delta_m, Q, lam, m):
    """Recover ``Delta_H`` from the output block of a structured ``Delta_M``."""
    W = np.sqrt(lam) * psd_sqrt(as_matrix(Q, "Q"))
    return np.linalg.solve(W, np.asarray(delta_m)[m:])


def perturb_uniform(H, sigma, seed):
    """``H + sigma * Delta`` with ``Delta`` i.i.d. uniform on [-1, 1]."""
    if sigma < 0:
        raise InvalidArgumentError("sigma must be non-negative")
    H = as_matrix(H, "H")
    rng = np.random.default_rng(seed)
    return H + sigma * rng.uniform(-1.0, 1.0, size=H.shape)


def perturb_dirichlet(H, seed):
    """``H + Delta`` with ``||Delta||_F = 1``.

    Squared entries of ``Delta`` are one flat Dirichlet draw; signs are fair
    coin flips.
    """
    H = as_matrix(H, "H")
    if H.shape[0] != H.shape[1]:
        raise InvalidArgumentError("perturb_dirichlet expects a square H")
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(H.size))
    signs = rng.choice([-1.0, 1.0], size=H.size)
    delta = (signs * np.sqrt(weights)).reshape(H.shape)
    delta /= np.linalg.norm(delta, "fro")
    return H + delta
