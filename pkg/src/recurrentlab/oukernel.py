"""Ornstein-Uhlenbeck operator families and the Kolmogorov integral.

For a block with linear part B and Lyapunov block A:

    Q_t = int_0^t e^{-sB} e^{-sB^T} ds
    R_t = (Q_t^{-1} - 2A)^{1/2}
    P_t = R_t^{-1} Q_t^{-1} e^{-tB}
    U_t = e^{-tB^T} (Q_t^{-1} - Q_t^{-1} R_t^{-2} Q_t^{-1}) e^{-tB}

so that, with q = <Q^{-1}(e^{-tB}x - y), (e^{-tB}x - y)>/4 - <Ay, y>/2,

    q = <U x, x>/4 + |R y - P x|^2 / 4.

The Kolmogorov integral is the transition operator of dY = -BY dt + sqrt(2) dW,
T_t z(x) = E[z(Y_t) | Y_0 = x].  Stable blocks are handled through the bounded
Gramian G_t = int_0^t e^{sB} e^{sB^T} ds, so nothing overflows at long times.

All matrices live in the splitting basis (stable coordinates first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.hermite import hermgauss
from numpy.typing import ArrayLike, NDArray

from .errors import ConstraintError, InvalidArgumentError, QuadratureError
from .pressure import LyapunovData
from .speclin import HyperbolicSplitting, finite_gramian, infinite_gramian, is_positive_definite, mat_exp, pd_sqrt

__all__ = [
    "OUBlock",
    "OUOperatorFamily",
    "ou_operators",
    "q_direct",
    "q_decomposed",
    "kolmogorov_apply",
    "AsymptoticItem",
    "AsymptoticsReport",
    "asymptotics_suite",
    "stable_gaussian",
    "semigroup_deviation",
]


def _sym(X):
    return 0.5 * (X + X.T)


@dataclass(frozen=True)
class OUBlock:
    side: str
    t: float
    B: NDArray
    A: NDArray
    Q: NDArray
    Q_inv: NDArray
    logdet_Q: float
    R: NDArray
    R_inv: NDArray
    P: NDArray
    U: NDArray
    E: NDArray  # e^{-tB}
    Qinv_E: NDArray  # Q^{-1} e^{-tB}

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @property
    def P_alt(self) -> NDArray:
        """R^{-2} Q^{-1} e^{-tB}, the variant that appears in the long-time limits."""
        return self.R_inv @ self.R_inv @ self.Qinv_E


def _empty_block(side, t):
    z = np.zeros((0, 0))
    return OUBlock(side, t, z, z, z, z, 0.0, z, z, z, z, z, z)


def _block(side: str, B: NDArray, A: NDArray, t: float) -> OUBlock:
    m = B.shape[0]
    if m == 0:
        return _empty_block(side, t)
    if side == "stable":
        G = finite_gramian(-B, t)  # int_0^t e^{sB} e^{sB^T} ds, bounded
        Einv = mat_exp(B, t)
        Ginv = _sym(np.linalg.inv(G))
        with np.errstate(over="ignore", invalid="ignore"):
            E = mat_exp(B, -t)
            Q = _sym(E @ G @ E.T)
        Q_inv = _sym(Einv.T @ Ginv @ Einv)
        sign, ld = np.linalg.slogdet(G)
        logdet = float(ld - 2 * t * np.trace(B))
        Qinv_E = Einv.T @ Ginv
        EtQinvE = Ginv
    else:
        Q = finite_gramian(B, t)
        E = mat_exp(B, -t)
        Q_inv = _sym(np.linalg.inv(Q))
        sign, ld = np.linalg.slogdet(Q)
        logdet = float(ld)
        Qinv_E = Q_inv @ E
        EtQinvE = _sym(E.T @ Qinv_E)
    R2 = _sym(Q_inv - 2 * A)
    if not is_positive_definite(R2):
        raise ConstraintError(f"{side} block: Q_t^(-1) - 2A is not positive definite at t={t:g}")
    R = pd_sqrt(R2)
    R_inv = _sym(np.linalg.inv(R))
    P = R_inv @ Qinv_E
    U = _sym(EtQinvE - Qinv_E.T @ R_inv @ R_inv @ Qinv_E)
    return OUBlock(side, t, B, A, Q, Q_inv, logdet, R, R_inv, P, U, E, Qinv_E)


@dataclass(frozen=True)
class OUOperatorFamily:
    t: float
    stable: OUBlock
    unstable: OUBlock

    @property
    def blocks(self):
        return (self.stable, self.unstable)

    @property
    def dim(self) -> int:
        return self.stable.dim + self.unstable.dim

    def full(self, name: str) -> NDArray:
        parts = [getattr(b, name) for b in self.blocks if b.dim]
        return sla.block_diag(*parts) if parts else np.zeros((0, 0))

    @property
    def logdet_Q(self) -> float:
        return self.stable.logdet_Q + self.unstable.logdet_Q

    def sign_pattern(self, tol: float = 1e-12) -> dict:
        out = {}
        if self.stable.dim:
            ev = np.linalg.eigvalsh(self.stable.U)
            out["U_s_min_eig"] = float(ev.min())
            out["U_s_psd"] = bool(ev.min() >= -tol * max(1.0, abs(ev).max()))
        if self.unstable.dim:
            ev = np.linalg.eigvalsh(self.unstable.U)
            out["U_u_max_eig"] = float(ev.max())
            out["U_u_nsd"] = bool(ev.max() <= tol * max(1.0, abs(ev).max()))
        return out


def ou_operators(split: HyperbolicSplitting, lyap: LyapunovData, t: float) -> OUOperatorFamily:
    if not (np.isfinite(t) and t > 0):
        raise InvalidArgumentError("t must be positive")
    return OUOperatorFamily(
        float(t),
        _block("stable", split.stable_block, lyap.A_s, t),
        _block("unstable", split.unstable_block, lyap.A_u, t),
    )


def _split_points(fam: OUOperatorFamily, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ms = fam.stable.dim
    return x[:, :ms], x[:, ms:]


def q_direct(fam: OUOperatorFamily, x: ArrayLike, y: ArrayLike) -> NDArray:
    """q(x, y, t) expanded from its definition."""
    out = 0.0
    for blk, xb, yb in zip(fam.blocks, _split_points(fam, x), _split_points(fam, y)):
        if not blk.dim:
            continue
        d = xb @ blk.E.T - yb
        out = out + 0.25 * np.einsum("ni,ij,nj->n", d, blk.Q_inv, d) - 0.5 * np.einsum("ni,ij,nj->n", yb, blk.A, yb)
    return out


def q_decomposed(fam: OUOperatorFamily, x: ArrayLike, y: ArrayLike) -> NDArray:
    """<U x, x>/4 + |R y - P x|^2 / 4."""
    out = 0.0
    for blk, xb, yb in zip(fam.blocks, _split_points(fam, x), _split_points(fam, y)):
        if not blk.dim:
            continue
        r = yb @ blk.R.T - xb @ blk.P.T
        out = out + 0.25 * np.einsum("ni,ij,nj->n", xb, blk.U, xb) + 0.25 * np.sum(r * r, axis=1)
    return out


def _apply_degree(z, fam, x, degree):
    m = fam.dim
    u1, w1 = hermgauss(degree)
    if m == 0:
        return np.asarray(z(np.zeros((len(x), 0))), dtype=float)
    grids = np.meshgrid(*[u1] * m, indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack(np.meshgrid(*[w1] * m, indexing="ij"), axis=-1).reshape(-1, m), axis=1)
    R_inv = fam.full("R_inv")
    P = fam.full("P")
    Ufull = fam.full("U")
    A = fam.full("A")
    logdetR = float(np.linalg.slogdet(fam.full("R"))[1])
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        Y = (2 * U + P @ xi) @ R_inv.T
        wv = np.asarray(z(Y), dtype=float) * np.exp(-0.5 * np.einsum("ni,ij,nj->n", Y, A, Y))
        if not np.all(np.isfinite(wv)):
            raise InvalidArgumentError("integrand is not finite; z is outside the admissible growth class")
        logpre = -0.5 * m * math.log(math.pi) - 0.5 * fam.logdet_Q - logdetR - 0.25 * xi @ Ufull @ xi
        out[i] = math.exp(logpre) * float(W @ wv)
    return out


def kolmogorov_apply(
    z,
    split: HyperbolicSplitting,
    lyap: LyapunovData,
    t: float,
    x: ArrayLike,
    degree: int = 80,
    tol: float = 1e-8,
    check: bool = True,
) -> NDArray:
    """Evaluate T_t z at the points ``x`` (rows, splitting basis).

    ``z`` maps an (n, m) array of points to n values.  The integral is
    rewritten with the completed square |R y - P x|^2 and evaluated by
    tensor-product Gauss-Hermite quadrature; the result is compared against
    doubled degree and a QuadratureError is raised if they differ by more
    than ``tol`` (relative to the sup of the result).
    """
    fam = ou_operators(split, lyap, t)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != fam.dim:
        raise InvalidArgumentError(f"points must have {fam.dim} coordinates")
    val = _apply_degree(z, fam, x, degree)
    if check:
        fine = _apply_degree(z, fam, x, 2 * degree)
        scale = max(np.max(np.abs(fine)), 1e-300)
        err = float(np.max(np.abs(fine - val)) / scale)
        if err > tol:
            raise QuadratureError(f"Gauss-Hermite degree {degree} vs {2 * degree} differ by {err:.3g}")
        val = fine
    return val


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticItem:
    item: str
    block: str
    description: str
    deviation: float
    tolerance: float
    kind: str  # "relative" or "absolute"

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)


@dataclass(frozen=True)
class AsymptoticsReport:
    t_small: float
    t_large: float
    items: tuple[AsymptoticItem, ...]
    signs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def failures(self):
        return [i for i in self.items if not i.passed]

    def to_rows(self):
        return [
            {
                "item": i.item,
                "block": i.block,
                "description": i.description,
                "deviation": i.deviation,
                "tolerance": i.tolerance,
                "kind": i.kind,
                "passed": i.passed,
            }
            for i in self.items
        ]


def _rel(a, b):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _norm(a):
    return float(np.linalg.norm(np.atleast_1d(a)))


def asymptotics_suite(
    split: HyperbolicSplitting,
    lyap: LyapunovData,
    t_small: float = 1e-3,
    t_large: float = 50.0,
    tol_small: float = 1e-2,
    tol_large: float = 1e-6,
) -> AsymptoticsReport:
    """Short-time expansions at ``t_small`` and long-time limits at ``t_large``."""
    if not (0 < t_small < t_large):
        raise InvalidArgumentError("need 0 < t_small < t_large")
    items: list[AsymptoticItem] = []

    def add(item, block, desc, dev, tol, kind="relative"):
        items.append(AsymptoticItem(item, block, desc, float(dev), tol, kind))

    small = ou_operators(split, lyap, t_small)
    t = t_small
    for blk in small.blocks:
        if not blk.dim:
            continue
        s, B, A, m = blk.side, blk.B, blk.A, blk.dim
        I = np.eye(m)
        symB = 0.5 * (B + B.T)
        add("i1", s, "Q_t = t[I - t(B+B^T)/2] + O(t^3)", _rel(blk.Q, t * (I - t * symB)), tol_small)
        add("i2", s, "Q_t^-1 = I/t + (B+B^T)/2 + O(t)", _rel(blk.Q_inv, I / t + symB), tol_small)
        add("i3", s, "R_t^2 = I/t + (B+B^T)/2 - 2A + O(t)", _rel(blk.R @ blk.R, I / t + symB - 2 * A), tol_small)
        add("i4", s, "R_t^-1 = sqrt(t) I + O(t^1.5)", _rel(blk.R_inv, math.sqrt(t) * I), tol_small)
        add("i5", s, "U_t = -2A + O(t)", _rel(blk.U, -2 * A), tol_small)
        add("i6", s, "R_t^-2 Q_t^-1 e^{-tB} = I + O(t)", _rel(blk.P_alt, I), tol_small)
        add("i6", s, "sqrt(t) P_t = I + O(t)", _rel(math.sqrt(t) * blk.P, I), tol_small)
        add("i7", s, "det Q_t = t^m (1 + O(t))", abs(math.exp(blk.logdet_Q - m * math.log(t)) - 1.0), tol_small)

    large = ou_operators(split, lyap, t_large)
    t = t_large
    bs, bu = large.stable, large.unstable
    if bs.dim:
        Ms = lyap.M_s
        add("ii1", "stable", "|Q_t^-1| -> 0", _norm(bs.Q_inv), tol_large, "absolute")
        add("ii2", "stable", "R_t -> sqrt(-2A_s)", _rel(bs.R, pd_sqrt(-2 * bs.A)), tol_large)
        add("ii3", "stable", "|Q_t^-1 e^{-tB_s}| -> 0", _norm(bs.Qinv_E), tol_large, "absolute")
        add("ii3", "stable", "|P_t| -> 0", _norm(bs.P), tol_large, "absolute")
        add("ii3", "stable", "|R_t^-2 Q_t^-1 e^{-tB_s}| -> 0", _norm(bs.P_alt), tol_large, "absolute")
        add("ii3", "stable", "U_t -> M_s^-1", _rel(bs.U, np.linalg.inv(Ms)), tol_large)
        detQ_scaled = math.exp(bs.logdet_Q + 2 * t * np.trace(bs.B))
        add("iii", "stable", "e^{2t trB_s} det Q_t -> det M_s", _rel(detQ_scaled, np.linalg.det(Ms)), tol_large)
    if bu.dim:
        Qinf = infinite_gramian(-bu.B)
        add("ii1", "unstable", "Q_t -> Q_inf", _rel(bu.Q, Qinf), tol_large)
        add("ii2", "unstable", "R_t -> sqrt(Q_inf^-1 - 2A_u)", _rel(bu.R, pd_sqrt(np.linalg.inv(Qinf) - 2 * bu.A)), tol_large)
        add("ii4", "unstable", "|P_t| -> 0", _norm(bu.P), tol_large, "absolute")
        add("ii4", "unstable", "|U_t| -> 0", _norm(bu.U), tol_large, "absolute")
    signs = {"small": small.sign_pattern(), "large": large.sign_pattern()}
    return AsymptoticsReport(float(t_small), float(t_large), tuple(items), signs)


def stable_gaussian(lyap: LyapunovData):
    """z(x) = exp(-<M_s^{-1} x_s, x_s> / 4), constant in the unstable coordinates."""
    ms = lyap.split.stable_dim
    Minv = np.linalg.inv(lyap.M_s) if ms else np.zeros((0, 0))

    def z(Y):
        Ys = np.atleast_2d(Y)[:, :ms]
        return np.exp(-0.25 * np.einsum("ni,ij,nj->n", Ys, Minv, Ys))

    return z


def semigroup_deviation(
    split: HyperbolicSplitting,
    lyap: LyapunovData,
    t: float,
    points: ArrayLike | None = None,
    sign: float = 1.0,
    degree: int = 80,
) -> float:
    """sup |T_t z - exp(sign * t tr B_s) z| / sup |z| over sample points.

    ``sign=+1`` is the identity satisfied by the transition operator of
    dY = -BY dt + sqrt(2) dW; ``sign=-1`` is offered for comparison.
    """
    m = split.dim
    if points is None:
        g = np.linspace(-2.0, 2.0, 9)
        points = np.stack(np.meshgrid(*[g] * m, indexing="ij"), axis=-1).reshape(-1, m)
    x = np.atleast_2d(np.asarray(points, dtype=float))
    z = stable_gaussian(lyap)
    Tz = kolmogorov_apply(z, split, lyap, t, x, degree=degree)
    ref = math.exp(sign * t * split.trace_stable) * z(x)
    return float(np.max(np.abs(Tz - ref)) / np.max(np.abs(z(x))))
