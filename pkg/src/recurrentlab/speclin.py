"""Dense spectral linear algebra for small transverse blocks.

Matrix exponentials, stable/unstable splittings, finite and infinite
Gramians, the weighted Gramians behind the quadratic Lyapunov data, and a
symmetric positive-definite square root.  All routines are pure functions of
their inputs and return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .errors import (
    ConvergenceError,
    ConstraintError,
    DivergentIntegralError,
    HyperbolicityError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    OrthogonalityError,
)

__all__ = [
    "HyperbolicSplitting",
    "as_square",
    "mat_exp",
    "spectral_split",
    "finite_gramian",
    "infinite_gramian",
    "weighted_infinite_gramian",
    "pd_sqrt",
    "is_positive_definite",
    "MAX_EXP_NORM",
]

MAX_EXP_NORM = 1e4
GRAMIAN_RESIDUAL_TOL = 1e-10


def as_square(B: ArrayLike, name: str = "matrix", allow_empty: bool = False) -> NDArray:
    """Return ``B`` as a finite 2-D float array, checking it is square."""
    A = np.array(B, dtype=float, copy=True)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {A.shape}")
    if A.shape[0] == 0 and not allow_empty:
        raise InvalidArgumentError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return A


def _sym(A: NDArray) -> NDArray:
    return 0.5 * (A + A.T)


def _check_symmetric(A: NDArray, name: str, tol: float = 1e-12) -> None:
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > tol * scale:
        raise InvalidArgumentError(f"{name} must be symmetric")


def is_positive_definite(A: NDArray) -> bool:
    if A.size == 0:
        return True
    try:
        np.linalg.cholesky(_sym(A))
    except np.linalg.LinAlgError:
        return False
    return True


def mat_exp(B: ArrayLike, t: float = 1.0) -> NDArray:
    """e^{tB} by scaling and squaring (scipy's Pade-based ``expm``)."""
    A = as_square(B, "B", allow_empty=True)
    if not np.isfinite(t):
        raise InvalidArgumentError("t must be finite")
    if A.size == 0:
        return A.copy()
    tB = t * A
    if np.linalg.norm(tB, 1) > MAX_EXP_NORM:
        raise InvalidArgumentError(
            f"|tB| = {np.linalg.norm(tB, 1):.3g} exceeds the supported range {MAX_EXP_NORM:g}"
        )
    return sla.expm(tB)


@dataclass(frozen=True)
class HyperbolicSplitting:
    """Orthogonal block decomposition of a hyperbolic linear part.

    ``basis`` has the stable directions in its first ``stable_dim`` columns,
    so ``basis.T @ B @ basis`` is block diagonal ``diag(stable, unstable)``.
    """

    stable_block: NDArray
    unstable_block: NDArray
    basis: NDArray
    coupling: float = 0.0

    @property
    def stable_dim(self) -> int:
        return self.stable_block.shape[0]

    @property
    def unstable_dim(self) -> int:
        return self.unstable_block.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def stable_basis(self) -> NDArray:
        return self.basis[:, : self.stable_dim]

    @property
    def unstable_basis(self) -> NDArray:
        return self.basis[:, self.stable_dim :]

    def block_matrix(self) -> NDArray:
        return sla.block_diag(self.stable_block, self.unstable_block) if self.dim else np.zeros((0, 0))

    def reconstruct(self) -> NDArray:
        """B recovered from the blocks (exact up to the dropped coupling)."""
        return self.basis @ self.block_matrix() @ self.basis.T

    @property
    def trace_stable(self) -> float:
        return float(np.trace(self.stable_block)) if self.stable_dim else 0.0

    @property
    def trace_unstable(self) -> float:
        return float(np.trace(self.unstable_block)) if self.unstable_dim else 0.0


def _orient_columns(Z: NDArray) -> NDArray:
    # deterministic sign: largest-magnitude entry of each column positive
    Z = Z.copy()
    for j in range(Z.shape[1]):
        i = int(np.argmax(np.abs(Z[:, j])))
        if Z[i, j] < 0:
            Z[:, j] = -Z[:, j]
    return Z


def spectral_split(
    B: ArrayLike, floor: float = 1e-6, coupling_tol: float = 1e-8
) -> HyperbolicSplitting:
    """Split ``B`` into stable and unstable blocks in an orthonormal basis.

    The stable invariant subspace comes from an ordered real Schur form.  The
    unstable invariant subspace is orthogonal to it exactly when the
    off-diagonal Schur block vanishes, which is what ``coupling_tol`` tests
    (relative to ``max(1, |B|)``).
    """
    A = as_square(B, "B", allow_empty=True)
    n = A.shape[0]
    if n == 0:
        empty = np.zeros((0, 0))
        return HyperbolicSplitting(empty, empty.copy(), empty.copy())
    ev = np.linalg.eigvals(A)
    gap = float(np.min(np.abs(ev.real)))
    if gap < floor:
        raise HyperbolicityError(
            f"eigenvalue with |Re| = {gap:.3g} below hyperbolicity floor {floor:g}"
        )
    T, Z, ms = sla.schur(A, output="real", sort="lhp")
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    coupling = float(np.linalg.norm(T[:ms, ms:])) / scale if 0 < ms < n else 0.0
    if coupling > coupling_tol:
        raise OrthogonalityError(
            f"stable and unstable subspaces are not orthogonal (coupling {coupling:.3g})"
        )
    Zs = _orient_columns(Z[:, :ms])
    Zu = _orient_columns(Z[:, ms:])
    basis = np.hstack([Zs, Zu])
    Bs = Zs.T @ A @ Zs
    Bu = Zu.T @ A @ Zu
    return HyperbolicSplitting(Bs, Bu, basis, coupling)


def _lyap(F: NDArray, rhs: NDArray) -> NDArray:
    """Solve F X + X F^T = rhs (Bartels-Stewart) with one refinement step."""
    X = _sym(sla.solve_continuous_lyapunov(F, rhs))
    res = F @ X + X @ F.T - rhs
    if np.linalg.norm(res) > 1e-14 * max(1.0, np.linalg.norm(X)):
        X = X - _sym(sla.solve_continuous_lyapunov(F, res))
    return X


def _van_loan(B: NDArray, t: float) -> NDArray:
    # int_0^t e^{-sB} e^{-sB^T} ds via one block exponential
    n = B.shape[0]
    A = -B
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = A
    big[:n, n:] = np.eye(n)
    big[n:, n:] = -A.T
    F = sla.expm(t * big)
    return _sym(F[:n, n:] @ F[:n, :n].T)


def finite_gramian(B: ArrayLike, t: float) -> NDArray:
    """Q_t = int_0^t e^{-sB} e^{-sB^T} ds.

    Short horizons and mixed spectra use a Van Loan block exponential.  For
    long horizons with a one-signed spectrum the Lyapunov identity
    ``B Q_t + Q_t B^T = I - e^{-tB} e^{-tB^T}`` is used in a form that avoids
    cancellation.
    """
    A = as_square(B, "B", allow_empty=True)
    if not np.isfinite(t) or t < 0:
        raise InvalidArgumentError("t must be finite and nonnegative")
    n = A.shape[0]
    if t == 0 or n == 0:
        return np.zeros((n, n))
    if t * np.linalg.norm(A, 1) > MAX_EXP_NORM:
        raise InvalidArgumentError("t|B| exceeds the supported range")
    re = np.linalg.eigvals(A).real
    I = np.eye(n)
    if t * np.linalg.norm(A, 2) <= 1.0 or not (np.all(re > 0) or np.all(re < 0)):
        return _van_loan(A, t)
    if np.all(re > 0):
        Qinf = _lyap(-A, -I)
        E = sla.expm(-t * A)
        return _sym(Qinf - E @ Qinf @ E.T)
    M = _lyap(A, -I)
    F = sla.expm(t * A)
    G = M - F @ M @ F.T
    E = sla.expm(-t * A)
    return _sym(E @ G @ E.T)


def infinite_gramian(B: ArrayLike, tol: float = GRAMIAN_RESIDUAL_TOL) -> NDArray:
    """M = int_0^inf e^{tB} e^{tB^T} dt for a stable ``B``.

    Solves ``B M + M B^T = -I``; pass ``-B_u`` to get the unstable-side
    integral of e^{-tB_u} e^{-tB_u^T}.
    """
    A = as_square(B, "B")
    re = np.linalg.eigvals(A).real
    if np.any(re >= 0):
        raise DivergentIntegralError(
            f"spectrum must lie in Re < 0 (max Re = {re.max():.3g})"
        )
    n = A.shape[0]
    M = _lyap(A, -np.eye(n))
    resid = np.linalg.norm(A @ M + M @ A.T + np.eye(n)) / np.linalg.norm(M)
    if resid > tol:
        raise ConvergenceError(f"Lyapunov residual {resid:.3g} above {tol:g}")
    return M


def weighted_infinite_gramian(
    B_block: ArrayLike, Pi: ArrayLike, side: str, tol: float = GRAMIAN_RESIDUAL_TOL
) -> NDArray:
    """Quadratic Lyapunov block from a weight ``Pi``.

    side="stable":   A_s^{-1} = -int_0^inf e^{tB} Pi e^{tB^T} dt  (A_s < 0)
    side="unstable": A_u^{-1} =  int_0^inf e^{-tB} Pi e^{-tB^T} dt (A_u > 0)
    """
    B = as_square(B_block, "B_block")
    P = as_square(Pi, "Pi")
    if P.shape != B.shape:
        raise InvalidArgumentError("Pi and B_block must have the same shape")
    _check_symmetric(P, "Pi")
    n = B.shape[0]
    if not is_positive_definite(P - 2.0 * np.eye(n)):
        raise ConstraintError("Pi - 2I must be positive definite")
    re = np.linalg.eigvals(B).real
    if side == "stable":
        if np.any(re >= 0):
            raise DivergentIntegralError("stable block has eigenvalues with Re >= 0")
        W = _lyap(B, -P)
        sign = -1.0
    elif side == "unstable":
        if np.any(re <= 0):
            raise DivergentIntegralError("unstable block has eigenvalues with Re <= 0")
        W = _lyap(-B, -P)
        sign = 1.0
    else:
        raise InvalidArgumentError(f"side must be 'stable' or 'unstable', got {side!r}")
    A = _sym(sign * np.linalg.inv(W))
    resid = np.linalg.norm(sign * A @ W - np.eye(n)) / np.sqrt(n)
    if resid > tol:
        raise ConvergenceError(f"inverse relation residual {resid:.3g} above {tol:g}")
    return A


def pd_sqrt(M: ArrayLike) -> NDArray:
    """Unique symmetric positive-definite square root via ``eigh``."""
    A = as_square(M, "M", allow_empty=True)
    if A.size == 0:
        return A.copy()
    _check_symmetric(A, "M", tol=1e-10)
    w, V = np.linalg.eigh(_sym(A))
    if w[0] <= 0:
        raise NotPositiveDefiniteError(f"matrix is not positive definite (min eig {w[0]:.3g})")
    return _sym((V * np.sqrt(w)) @ V.T)
