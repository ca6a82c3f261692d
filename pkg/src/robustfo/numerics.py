"""Dense linear-algebra helpers used across the package."""

import numpy as np

from .errors import InvalidArgumentError, NotPSDError, UnstableSystemError

PSD_CLAMP = 1e-10


def as_matrix(M, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return M


def as_vector(v, name="vector", size=None):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise InvalidArgumentError(f"{name} must be 1-D, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise InvalidArgumentError(f"{name} has length {v.shape[0]}, expected {size}")
    return v


def _square(A, name):
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {A.shape}")
    return A


def spectral_radius(A):
    """Largest eigenvalue modulus of a square matrix."""
    A = _square(A, "A")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def solve_discrete_lyapunov(A, Qbar):
    """Solve ``A.T @ P @ A - P + Qbar = 0`` for ``P``.

    Uses the Kronecker form ``(I - A.T kron A.T) vec(P) = vec(Qbar)``, which is
    exact and cheap for the small systems handled here (n <= 32).

    Raises
    ------
    UnstableSystemError
        If the spectral radius of ``A`` is not below one.
    """
    A = _square(A, "A")
    Qbar = _square(Qbar, "Qbar")
    n = A.shape[0]
    if Qbar.shape[0] != n:
        raise InvalidArgumentError(f"Qbar shape {Qbar.shape} does not match A {A.shape}")
    if n == 0:
        return np.zeros((0, 0))
    if spectral_radius(A) >= 1.0:
        raise UnstableSystemError("Lyapunov equation needs spectral_radius(A) < 1")
    At = A.T
    lhs = np.eye(n * n) - np.kron(At, At)
    vecP = np.linalg.solve(lhs, Qbar.reshape(-1, order="F"))
    P = vecP.reshape((n, n), order="F")
    return 0.5 * (P + P.T)


def psd_sqrt(M):
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues in ``[-1e-10, 0)`` are treated as rounding and clamped to zero.
    """
    M = _square(M, "M")
    if M.size == 0:
        return M.copy()
    S = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(S)
    if w.min() < -PSD_CLAMP * max(1.0, np.abs(w).max()):
        raise NotPSDError(f"matrix has negative eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    root = (V * np.sqrt(w)) @ V.T
    return 0.5 * (root + root.T)


def weighted_norm(x, P):
    x = as_vector(x, "x")
    P = _square(P, "P")
    if P.shape[0] != x.shape[0]:
        raise InvalidArgumentError(f"x has length {x.shape[0]} but P is {P.shape}")
    return float(np.sqrt(max(x @ P @ x, 0.0)))


def sym_eig_extremes(M):
    """(lambda_min, lambda_max) of the symmetric part of ``M``."""
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(w[0]), float(w[-1])


def op_norm(M):
    """Spectral (operator 2-) norm; zero for empty matrices."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))
