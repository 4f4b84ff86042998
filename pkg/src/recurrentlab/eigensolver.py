"""Finite-difference principal eigenpairs of L = -eps lap + b . grad + c on periodic grids.

The grid has ``N_i`` points per axis with spacing ``1/N_i``.  When the cell
Peclet number |b| h / eps exceeds 2 the diffusion coefficient of each row is
replaced by the exponentially fitted value (|b| h / 2) coth(|b| h / 2 eps)
(Il'in / Allen-Southwell, which coincides with Scharfetter-Gummel for
constant coefficients); this keeps every row an M-matrix row with row sum c.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import map_coordinates
from scipy.special import logsumexp

from .errors import ConvergenceError, InvalidArgumentError, PositivityError, ResolutionError
from .model import FieldModel, RecurrentComponent, periodic_delta
from .profiles import BlowupProfile, TorusDensity, blowup_profile

__all__ = [
    "DiscreteOperator",
    "EigenPair",
    "WeightedMeasure",
    "StudyRow",
    "StudyResult",
    "BlowupComparison",
    "assemble",
    "discretize",
    "leading_eigenpair",
    "weighted_measure",
    "gauge_residual",
    "default_n_rule",
    "convergence_study",
    "blowup_extract",
    "subgrid_argmax",
    "extrapolate_limit",
    "STUDY_COLUMNS",
]

CENTRAL_PECLET = 2.0


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: sp.csr_matrix
    shape: tuple[int, ...]
    eps: float
    scheme: str
    peclet: float
    killing: NDArray  # c on the grid (flattened)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.shape)

    @property
    def cell_volume(self) -> float:
        return 1.0 / self.size


def _fitted_diffusion(b: NDArray, h: float, eps: float) -> NDArray:
    half = 0.5 * np.abs(b) * h
    pe = half / eps
    out = np.full(b.shape, float(eps))
    big = pe > 1e-8
    out[big] = half[big] / np.tanh(pe[big])
    # series for small arguments: eps (1 + pe^2 / 3)
    out[~big] = eps * (1.0 + pe[~big] ** 2 / 3.0)
    return out


def assemble(
    drift: NDArray,
    killing: NDArray,
    eps: float,
    scheme: str = "auto",
    peclet_cap: float | None = None,
) -> DiscreteOperator:
    """Assemble from grid values: ``drift`` has shape (*shape, dim), ``killing`` shape ``shape``."""
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    shape = tuple(killing.shape)
    dim = len(shape)
    if drift.shape != shape + (dim,):
        raise InvalidArgumentError("drift and killing grids do not match")
    if min(shape) < 4:
        raise InvalidArgumentError("need at least 4 points per axis")
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    peclet = max(float(np.max(np.abs(drift[..., i]))) / shape[i] / eps for i in range(dim))
    if scheme == "auto":
        scheme = "central" if peclet <= CENTRAL_PECLET else "fitted"
    if scheme not in ("central", "fitted"):
        raise InvalidArgumentError("scheme must be 'auto', 'central' or 'fitted'")
    if scheme == "central" and peclet_cap is not None and peclet > peclet_cap:
        raise ResolutionError(f"cell Peclet {peclet:.3g} exceeds cap {peclet_cap:g}; increase N")
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [killing.ravel().astype(float)]
    for i in range(dim):
        h = 1.0 / shape[i]
        b = drift[..., i].ravel()
        D = np.full(n, float(eps)) if scheme == "central" else _fitted_diffusion(b, h, eps)
        up = np.roll(idx, -1, axis=i).ravel()
        dn = np.roll(idx, 1, axis=i).ravel()
        rows += [idx.ravel()] * 3
        cols += [idx.ravel(), up, dn]
        vals += [2 * D / h**2, -D / h**2 + b / (2 * h), -D / h**2 - b / (2 * h)]
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    A.sum_duplicates()
    return DiscreteOperator(A, shape, float(eps), scheme, peclet, killing.ravel().astype(float))


def discretize(
    fld: FieldModel,
    eps: float,
    N: int | Sequence[int],
    scheme: str = "auto",
    peclet_cap: float | None = None,
) -> DiscreteOperator:
    shape = fld.grid_shape(N)
    if min(shape) < 16:
        raise InvalidArgumentError("N must be >= 16 per axis")
    X = fld.grid(shape)
    return assemble(fld.drift(X), fld.killing_at(X), eps, scheme, peclet_cap)


@dataclass(frozen=True)
class EigenPair:
    lam: float
    u: NDArray  # grid-shaped, positive, sum(u^2) * cell = 1
    residual: float
    iterations: int
    shift: float
    shape: tuple[int, ...]
    eps: float
    adjoint: bool = False

    @property
    def flat(self) -> NDArray:
        return self.u.ravel()


def leading_eigenpair(
    op: DiscreteOperator,
    tol: float = 1e-10,
    max_iter: int = 5000,
    margin: float = 1.0,
    adjoint: bool = False,
) -> EigenPair:
    """Shifted inverse iteration for the eigenvalue with positive eigenvector.

    The shift sits below min(c), a lower bound for the real parts of the
    spectrum (row sums equal c and off-diagonal entries are non-positive), so
    the shifted inverse is entrywise positive and the iteration converges to
    the principal pair.  ``tol`` applies to ||L u - lam u|| / ||u|| scaled by
    max(1, |lam|).
    """
    A = op.matrix.T.tocsr() if adjoint else op.matrix
    n = op.size
    sigma = float(op.killing.min()) - margin
    lu = spla.splu((A - sigma * sp.identity(n, format="csr")).tocsc())
    u = np.ones(n) / math.sqrt(n)
    lam = float(u @ (A @ u))
    res = float(np.linalg.norm(A @ u - lam * u))
    it = 0
    while res > tol * max(1.0, abs(lam)) and it < max_iter:
        it += 1
        w = lu.solve(u)
        u = w / np.linalg.norm(w)
        Au = A @ u
        lam = float(u @ Au)
        res = float(np.linalg.norm(Au - lam * u))
    if res > tol * max(1.0, abs(lam)):
        raise ConvergenceError(f"inverse iteration stalled at residual {res:.3g} after {it} steps")
    if u.sum() < 0:
        u = -u
    if u.min() <= 0:
        raise PositivityError(f"eigenvector is not strictly positive (min/max = {u.min() / u.max():.3g})")
    u = u / math.sqrt(np.sum(u * u) * op.cell_volume)
    return EigenPair(lam, u.reshape(op.shape), res, it, sigma, op.shape, op.eps, adjoint)


@dataclass(frozen=True)
class WeightedMeasure:
    weights: NDArray  # grid-shaped cell masses, total 1
    log_v: NDArray
    v: NDArray
    vbar: float
    log_vbar: float
    shape: tuple[int, ...]

    def mass_where(self, mask: NDArray) -> float:
        return float(np.sum(self.weights[mask]))

    def log_v_at(self, X: ArrayLike, order: int = 3) -> NDArray:
        """Periodic spline interpolation of log v at points X (..., dim)."""
        X = np.asarray(X, dtype=float)
        if len(self.shape) == 1 and (X.ndim == 0 or X.shape[-1] != 1):
            X = X[..., None]
        coords = [np.mod(X[..., i], 1.0).ravel() * n for i, n in enumerate(self.shape)]
        out = map_coordinates(self.log_v, coords, order=order, mode="grid-wrap")
        return out.reshape(X.shape[:-1])

    def v_at(self, X: ArrayLike, order: int = 3) -> NDArray:
        return np.exp(self.log_v_at(X, order))


def weighted_measure(pair: EigenPair, fld: FieldModel) -> WeightedMeasure:
    """Normalized u^2 exp(-L/eps) cell masses and v = exp(-L/2eps) u, in log space."""
    eps = pair.eps
    X = fld.grid(pair.shape)
    L = fld.lyap(X)
    log_u = np.log(pair.u)
    log_v = log_u - L / (2 * eps)
    logw = 2 * log_v
    logw = logw - logsumexp(logw)
    lvbar = float(log_v.max())
    vbar = math.exp(lvbar) if lvbar < 700 else math.inf
    return WeightedMeasure(np.exp(logw), log_v, np.exp(log_v), vbar, lvbar, pair.shape)




def gauge_residual(pair: EigenPair, fld: FieldModel, measure: WeightedMeasure | None = None) -> float:
    """Relative residual of the gauge-transformed equation applied to v.

    Checks -eps lap v + omega . grad v + (c - lap L / 2 + psi / eps) v = lam v
    with central differences; the value shrinks at the scheme's order.
    """
    measure = measure if measure is not None else weighted_measure(pair, fld)
    X = fld.grid(pair.shape)
    op = assemble(fld.omega(X), fld.gauge_potential(X, pair.eps), pair.eps, scheme="central")
    v = np.exp(measure.log_v - measure.log_vbar).ravel()
    r = op.matrix @ v - pair.lam * v
    return float(np.linalg.norm(r) / (np.linalg.norm(v) * max(1.0, abs(pair.lam))))


def default_n_rule(eps: float, dim: int = 1, scale: float = 16.0, cap: int = 1024, floor: int = 64) -> tuple[int, ...]:
    """N proportional to 1/sqrt(eps), rounded up to a power of two and capped."""
    n = scale / math.sqrt(eps)
    n = int(2 ** math.ceil(math.log2(max(n, floor))))
    return (min(n, cap),) * dim


def subgrid_argmax(log_v: NDArray) -> NDArray:
    """Argmax of a periodic grid function refined by a per-axis parabola through log values."""
    shape = log_v.shape
    i = np.unravel_index(int(np.argmax(log_v)), shape)
    pos = np.zeros(len(shape))
    for ax, n in enumerate(shape):
        def at(k):
            j = list(i)
            j[ax] = (i[ax] + k) % n
            return log_v[tuple(j)]

        lm, l0, lp = at(-1), at(0), at(1)
        den = lm - 2 * l0 + lp
        delta = 0.5 * (lm - lp) / den if den < 0 else 0.0
        pos[ax] = ((i[ax] + np.clip(delta, -0.5, 0.5)) / n) % 1.0
    return pos


STUDY_COLUMNS = ("epsilon", "lambda", "dmax")


@dataclass(frozen=True)
class StudyRow:
    eps: float
    lam: float
    dmax: float
    argmax: NDArray
    masses: dict[str, float]
    gammas: dict[str, float]
    shape: tuple[int, ...]
    scheme: str
    residual: float

    def as_dict(self, labels: Sequence[str]) -> dict:
        out = {"epsilon": self.eps, "lambda": self.lam, "dmax": self.dmax}
        out.update({f"mass_{lab}": self.masses[lab] for lab in labels})
        out.update({f"gamma_{lab}": self.gammas[lab] for lab in labels})
        return out


@dataclass(frozen=True)
class StudyResult:
    field_name: str
    labels: tuple[str, ...]
    rows: tuple[StudyRow, ...]
    slope: float
    lam_diffs: NDArray

    @property
    def columns(self) -> list[str]:
        return list(STUDY_COLUMNS) + [f"mass_{l}" for l in self.labels] + [f"gamma_{l}" for l in self.labels]

    def table(self) -> list[dict]:
        return [r.as_dict(self.labels) for r in self.rows]


def tube_masks(fld: FieldModel, shape, radius: float) -> dict[str, NDArray]:
    X = fld.grid(shape)
    return {c.label: c.distance(X) <= radius for c in fld.components}


def _study_row(fld, eps, shape, scheme, tube_factor, tol):
    op = discretize(fld, eps, shape, scheme=scheme)
    pair = leading_eigenpair(op, tol=tol)
    meas = weighted_measure(pair, fld)
    pos = subgrid_argmax(meas.log_v)
    dmax = float(fld.distance_to_recurrent(pos[None])[0])
    masses, gammas = {}, {}
    for lab, mask in tube_masks(fld, shape, tube_factor * math.sqrt(eps)).items():
        masses[lab] = meas.mass_where(mask)
        gammas[lab] = float(np.exp(meas.log_v[mask].max() - meas.log_vbar)) if mask.any() else 0.0
    return StudyRow(float(eps), pair.lam, dmax, pos, masses, gammas, tuple(shape), op.scheme, pair.residual)


def fit_slope(eps: ArrayLike, d: ArrayLike) -> float:
    """Least-squares slope of log d against log eps over positive d."""
    eps = np.asarray(eps, dtype=float)
    d = np.asarray(d, dtype=float)
    ok = d > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[ok]), np.log(d[ok]), 1)[0])


def convergence_study(
    fld: FieldModel,
    eps_list: Sequence[float],
    n_rule: Callable[[float], int | Sequence[int]] | None = None,
    scheme: str = "auto",
    tube_factor: float = 10.0,
    tol: float = 1e-10,
    threads: int = 1,
) -> StudyResult:
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidArgumentError("eps_list must be strictly decreasing")
    n_rule = n_rule or (lambda e: default_n_rule(e, fld.dim))
    jobs = [(fld, e, fld.grid_shape(n_rule(e)), scheme, tube_factor, tol) for e in eps_list]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(lambda a: _study_row(*a), jobs))
    else:
        rows = [_study_row(*a) for a in jobs]
    slope = fit_slope([r.eps for r in rows], [r.dmax for r in rows])
    lams = np.array([r.lam for r in rows])
    labels = tuple(c.label for c in fld.components)
    return StudyResult(fld.name, labels, tuple(rows), slope, np.abs(np.diff(lams)))


def extrapolate_limit(eps: ArrayLike, lams: ArrayLike, points: int = 3) -> float:
    """Intercept of a linear fit of lambda against eps over the smallest ``points`` values."""
    eps = np.asarray(eps, dtype=float)
    lams = np.asarray(lams, dtype=float)
    order = np.argsort(eps)[:points]
    if len(order) < 2:
        return float(lams[order[0]])
    return float(np.polyfit(eps[order], lams[order], 1)[1])


@dataclass(frozen=True)
class BlowupComparison:
    label: str
    charged: bool
    gamma: float
    rel_l2: float = float("nan")
    covariance_ratio: float = float("nan")
    notice: str = ""
    xi: NDArray | None = None
    theta: NDArray | None = None
    measured: NDArray | None = None
    predicted: NDArray | None = None


def blowup_extract(
    pair: EigenPair,
    fld: FieldModel,
    component: RecurrentComponent,
    measure: WeightedMeasure | None = None,
    profile: BlowupProfile | None = None,
    gamma_threshold: float = 0.1,
    tube_factor: float = 10.0,
    half_width: float = 4.0,
    n_xi: int = 161,
    n_theta: int = 64,
) -> BlowupComparison:
    """Compare w(xi, theta) = v(anchor + sqrt(eps) xi, theta) / vbar with the predicted profile.

    For a torus the comparison is v / vbar against the transport density
    on the eigen-grid.  ``covariance_ratio`` is the measured transverse
    covariance of w^2 (trace) over the Gaussian value trace((4 S)^-1).
    """
    eps = pair.eps
    meas = measure if measure is not None else weighted_measure(pair, fld)
    mask = component.distance(fld.grid(pair.shape)) <= tube_factor * math.sqrt(eps)
    gamma = float(np.exp(meas.log_v[mask].max() - meas.log_vbar)) if mask.any() else 0.0
    if gamma < gamma_threshold:
        return BlowupComparison(component.label, False, gamma, notice=f"component not charged (gamma={gamma:.3g})")
    profile = profile if profile is not None else blowup_profile(component)
    w_grid = np.exp(meas.log_v - meas.log_vbar)
    if component.kind == "torus":
        pred = profile.density(fld.grid(pair.shape)) if isinstance(profile.density, TorusDensity) else np.ones(pair.shape)
        rel = float(np.linalg.norm(w_grid - pred) / np.linalg.norm(pred))
        return BlowupComparison(component.label, True, gamma, rel, float("nan"), "", None, None, w_grid, pred)

    S = profile.S_coords
    m = S.shape[0]
    L = half_width / math.sqrt(float(np.linalg.eigvalsh(S).min()))
    n_per = n_xi if m == 1 else max(21, int(round(math.sqrt(n_xi * n_xi / 4))))
    axes = [np.linspace(-L, L, n_per)] * m
    XI = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    if component.kind == "cycle":
        theta = np.arange(n_theta) / n_theta * component.period
        tang = np.asarray(component.tangent, dtype=float)
        tang = tang / np.linalg.norm(tang)
    else:
        theta = np.zeros(1)
        tang = np.zeros(fld.dim)
    base = component.anchor + math.sqrt(eps) * XI @ component.frame.T
    pts = base[None, :, :] + (theta / component.period)[:, None, None] * tang
    measured = meas.v_at(pts.reshape(-1, fld.dim)).reshape(len(theta), -1) / meas.vbar
    trans = profile.transverse(XI)
    dens = profile.density(theta) if (component.kind == "cycle" and profile.density is not None) else np.ones(len(theta))
    predicted = dens[:, None] * trans[None, :]
    rel = float(np.linalg.norm(measured - predicted) / np.linalg.norm(predicted))
    w2 = np.mean(measured**2, axis=0)
    mass = w2.sum()
    mean = XI.T @ w2 / mass
    cov = (XI.T * w2) @ XI / mass - np.outer(mean, mean)
    cov_pred = np.linalg.inv(4 * S)
    ratio = float(np.trace(cov) / np.trace(cov_pred))
    return BlowupComparison(component.label, True, gamma, rel, ratio, "", XI, theta, measured, predicted)
