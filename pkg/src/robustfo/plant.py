"""Discrete-time LTI plant, its steady-state maps and signal schedules."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UnstableSystemError
from .numerics import as_matrix, as_vector, spectral_radius

STABILITY_MARGIN = 1e-9


def _as_2d(M, rows=None, cols=None):
    M = np.array(M, dtype=float)
    if M.ndim == 0:
        return M.reshape(1, 1)
    if M.ndim == 1:
        return M.reshape(rows, -1) if rows is not None else M.reshape(-1, cols)
    return M


@dataclass(frozen=True)
class LtiPlant:
    """Plant ``x+ = A x + B u + d_x``, ``y = C x + d_y`` with spectral_radius(A) < 1."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    rho_A: float = field(init=False)

    def __post_init__(self):
        A = _as_2d(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidArgumentError(f"A must be square, got {A.shape}")
        B = _as_2d(self.B, rows=n)
        C = _as_2d(self.C, cols=n)
        if B.shape[0] != n or C.shape[1] != n:
            raise InvalidArgumentError(
                f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        if not all(np.all(np.isfinite(M)) for M in (A, B, C)):
            raise InvalidArgumentError("plant matrices must be finite")
        rho = spectral_radius(A) if n else 0.0
        if rho >= 1.0 - STABILITY_MARGIN:
            raise UnstableSystemError(f"spectral radius {rho:.6g} is not below 1")
        for name, val in (("A", A), ("B", B), ("C", C)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "rho_A", rho)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def resolvent(self):
        """``(I - A)^{-1}``."""
        return np.linalg.inv(np.eye(self.n) - self.A)


@dataclass
class PlantState:
    x: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class SignalSchedule:
    """Explicit per-step disturbance, noise and reference sequences.

    ``lo``/``hi`` are optional per-step input bounds of shape (K, m).
    """

    d_x: np.ndarray
    d_y: np.ndarray
    r: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        d_x = np.atleast_2d(np.asarray(self.d_x, dtype=float))
        d_y = np.atleast_2d(np.asarray(self.d_y, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        K = d_x.shape[0]
        if d_y.shape[0] != K or r.shape[0] != K:
            raise InvalidArgumentError("d_x, d_y and r must share the horizon length")
        if d_y.shape[1] != r.shape[1]:
            raise InvalidArgumentError("d_y and r must have the output dimension")
        object.__setattr__(self, "d_x", d_x)
        object.__setattr__(self, "d_y", d_y)
        object.__setattr__(self, "r", r)
        if (self.lo is None) != (self.hi is None):
            raise InvalidArgumentError("lo and hi must be given together")
        if self.lo is not None:
            lo = np.atleast_2d(np.asarray(self.lo, dtype=float))
            hi = np.atleast_2d(np.asarray(self.hi, dtype=float))
            if lo.shape != hi.shape or lo.shape[0] != K:
                raise InvalidArgumentError("box bounds must have shape (K, m)")
            if np.any(lo > hi):
                raise InvalidArgumentError("box lower bound exceeds upper bound")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)

    @property
    def horizon(self):
        return self.d_x.shape[0]

    def box(self, k):
        if self.lo is None:
            return None
        return self.lo[k], self.hi[k]

    @classmethod
    def constant(cls, K, d_x, d_y, r):
        d_x, d_y, r = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (d_x, d_y, r))
        return cls(np.tile(d_x, (K, 1)), np.tile(d_y, (K, 1)), np.tile(r, (K, 1)))


def step(plant, state, u, d_x, d_y):
    """Advance one step; ``y`` is read from the pre-update state."""
    u = as_vector(u, "u", plant.m)
    d_x = as_vector(d_x, "d_x", plant.n) if plant.n else np.zeros(0)
    d_y = as_vector(d_y, "d_y", plant.p)
    x = as_vector(state.x, "x", plant.n) if plant.n else np.zeros(0)
    y = plant.C @ x + d_y
    x_next = plant.A @ x + plant.B @ u + d_x
    return PlantState(x_next, state.k + 1), y


def sensitivity(plant):
    """Steady-state input-output gain ``C (I - A)^{-1} B``."""
    if plant.n == 0:
        return np.zeros((plant.p, plant.m))
    try:
        return plant.C @ np.linalg.solve(np.eye(plant.n) - plant.A, plant.B)
    except np.linalg.LinAlgError as exc:
        raise UnstableSystemError("I - A is singular") from exc


def aggregate_disturbance(plant, d_x, d_y):
    """Output offset ``C (I - A)^{-1} d_x + d_y`` seen at steady state."""
    d_y = as_vector(d_y, "d_y", plant.p)
    if plant.n == 0:
        return d_y.copy()
    d_x = as_vector(d_x, "d_x", plant.n)
    return plant.C @ np.linalg.solve(np.eye(plant.n) - plant.A, d_x) + d_y


def aggregate_disturbances(plant, signals):
    """Row-wise :func:`aggregate_disturbance` over a whole schedule."""
    if plant.n == 0:
        return signals.d_y.copy()
    X = np.linalg.solve(np.eye(plant.n) - plant.A, signals.d_x.T)
    return (plant.C @ X).T + signals.d_y


def steady_state_x(plant, u, d_x):
    u = as_vector(u, "u", plant.m)
    if plant.n == 0:
        return np.zeros(0)
    d_x = as_vector(d_x, "d_x", plant.n)
    return np.linalg.solve(np.eye(plant.n) - plant.A, plant.B @ u + d_x)


def steady_output(H, d, u):
    H = as_matrix(H, "H")
    u = as_vector(u, "u", H.shape[1])
    d = as_vector(d, "d", H.shape[0])
    return H @ u + d


def random_plant(n, m, p, rng, spectral_radius_max=0.9):
    """Random stable plant; ``A`` is rescaled to the requested spectral radius bound."""
    A = rng.standard_normal((n, n))
    rho = spectral_radius(A)
    target = rng.uniform(0.1, spectral_radius_max)
    if rho > 0:
        A *= target / rho
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    return LtiPlant(A, B, C)


def plant_with_sensitivity(H, A=None):
    """Plant with ``C = I`` whose sensitivity equals ``H`` (``B = (I - A) H``)."""
    H = as_matrix(H, "H")
    p = H.shape[0]
    A = np.zeros((p, p)) if A is None else as_matrix(A, "A")
    B = (np.eye(p) - A) @ H
    return LtiPlant(A, B, np.eye(p))


@dataclass(frozen=True)
class StaticPlant:
    """Memoryless plant ``y_k = H u_k + d_{y,k}`` (no state, no delay).

    Used for steady-state maps such as a linearized power flow.
    """

    H: np.ndarray

    def __post_init__(self):
        H = np.array(as_matrix(self.H, "H"))
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    n = 0

    @property
    def m(self):
        return self.H.shape[1]

    @property
    def p(self):
        return self.H.shape[0]
