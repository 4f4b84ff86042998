"""Limit-measure densities and Gaussian blow-up profiles.

* cycle density: periodic solution of f' + (c - <c>) f = 0 with max f = 1
* torus density: solution of k . grad f + (c - mu) f = 0 by Fourier
  division, with mu the mean of c
* blow-up profile: exp(-<S x, x>) in the transverse variables, times the
  longitudinal density
* limit measure: squared-profile masses weighted by gamma^2, normalized
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .errors import ConstraintError, InvalidArgumentError, RationalityError, SmallDivisorError
from .model import KIND_RANK, DiophantineReport, RecurrentComponent, TrigSeries, diophantine_check
from .pressure import LyapunovData, lyapunov_for
from .speclin import is_positive_definite

__all__ = [
    "CycleDensity",
    "TorusDensity",
    "BlowupProfile",
    "Atom",
    "LimitMeasure",
    "cycle_density",
    "torus_density",
    "blowup_profile",
    "gaussian_mass",
    "assemble_limit_measure",
    "profile_operator_ratio",
    "profile_discrete_residual",
]

TWO_PI = 2.0 * math.pi
WEIGHT_NAMES = {"point": "c_P", "cycle": "a_Gamma", "torus": "b_T"}


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleDensity:
    period: float
    theta: NDArray
    f: NDArray
    c: NDArray
    mean: float
    log_coeffs: NDArray  # rfft coefficients of -int_0^theta (c - <c>), up to the max shift
    log_shift: float
    residual: float

    def __call__(self, theta: ArrayLike) -> NDArray:
        th = np.asarray(theta, dtype=float)
        N = len(self.theta)
        k = np.arange(len(self.log_coeffs))
        w = np.where((k == 0) | ((N % 2 == 0) & (k == N // 2)), 1.0, 2.0)
        ph = np.exp(2j * np.pi * np.multiply.outer(th / self.period, k))
        logf = (ph @ (w * self.log_coeffs)).real / N
        return np.exp(logf - self.log_shift)

    def l2_mass(self) -> float:
        """int_0^T f^2 dtheta (spectrally exact trapezoid)."""
        return float(np.mean(self.f**2) * self.period)

    def mass(self) -> float:
        return float(np.mean(self.f) * self.period)


def _spectral_derivative(v: NDArray, period: float) -> NDArray:
    N = len(v)
    V = np.fft.rfft(v)
    k = np.arange(len(V))
    ik = 2j * np.pi * k / period
    if N % 2 == 0:
        ik[-1] = 0.0
    return np.fft.irfft(ik * V, n=N)


def _periodic_samples(c: Any, T: float, N: int, tol: float) -> NDArray:
    if isinstance(c, TrigSeries):
        if c.dim != 1:
            raise InvalidArgumentError("cycle killing must be one-dimensional")
        return c(np.arange(N) / N)
    if callable(c):
        theta = np.arange(N) * (T / N)
        c0, cT = float(np.asarray(c(0.0))), float(np.asarray(c(T)))
        if abs(c0 - cT) > tol * max(1.0, abs(c0)):
            raise InvalidArgumentError(f"killing is not periodic: c(0)={c0:.6g}, c(T)={cT:.6g}")
        return np.asarray(c(theta), dtype=float).reshape(N)
    arr = np.asarray(c, dtype=float).ravel()
    if len(arr) == N + 1:
        if abs(arr[0] - arr[-1]) > tol * max(1.0, abs(arr[0])):
            raise InvalidArgumentError("killing samples are not periodic (endpoint mismatch)")
        return arr[:-1]
    if len(arr) == N:
        return arr
    raise InvalidArgumentError(f"expected {N} or {N + 1} killing samples, got {len(arr)}")


def cycle_density(c: Any, T: float = 1.0, N: int = 256, tol: float = 1e-10) -> CycleDensity:
    """Periodic density along a cycle of period ``T``.

    ``c`` is a callable on [0, T], a 1-D TrigSeries in period-one
    coordinates, or samples (N on [0, T), or N+1 including the endpoint).
    """
    if N < 8:
        raise InvalidArgumentError("N must be >= 8")
    if not (np.isfinite(T) and T > 0):
        raise InvalidArgumentError("period must be positive")
    cs = _periodic_samples(c, float(T), int(N), tol)
    if not np.all(np.isfinite(cs)):
        raise InvalidArgumentError("killing samples must be finite")
    C = np.fft.rfft(cs)
    mean = float(C[0].real / N)
    k = np.arange(len(C))
    ik = 2j * np.pi * k / T
    F = np.zeros_like(C)
    nz = k > 0
    if N % 2 == 0:
        nz[-1] = False
    F[nz] = -C[nz] / ik[nz]
    logf = np.fft.irfft(F, n=N)
    shift = float(logf.max())
    f = np.exp(logf - shift)
    theta = np.arange(N) * (T / N)
    resid = float(np.max(np.abs(_spectral_derivative(f, T) + (cs - mean) * f)))
    return CycleDensity(float(T), theta, f, cs, mean, F, shift, resid)


# ---------------------------------------------------------------------------
# tori
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusDensity:
    k: tuple[float, float]
    M: int
    h_table: NDArray  # coefficients of exp(2 pi i m.theta), index m + M
    N: int
    f: NDArray  # samples on the N x N grid
    c: NDArray
    mu: float
    h_shift: float
    residual: float
    diophantine: DiophantineReport

    def log_density(self, theta: ArrayLike) -> NDArray:
        th = np.asarray(theta, dtype=float)
        idx = np.argwhere(np.abs(self.h_table) > 0)
        if not len(idx):
            return np.zeros(th.shape[:-1])
        m = idx - self.M
        coef = self.h_table[idx[:, 0], idx[:, 1]]
        ph = TWO_PI * th @ m.T.astype(float)
        return (np.exp(1j * ph) @ coef).real - self.h_shift

    def __call__(self, theta: ArrayLike) -> NDArray:
        return np.exp(self.log_density(theta))

    def l2_mass(self) -> float:
        return float(np.mean(self.f**2))

    def mass(self) -> float:
        return float(np.mean(self.f))


def _table_from(c: Any, M: int) -> NDArray:
    if isinstance(c, TrigSeries):
        if c.dim != 2:
            raise InvalidArgumentError("torus killing must be two-dimensional")
        if c.max_mode > M:
            raise InvalidArgumentError(f"killing has modes beyond truncation {M}")
        return c.table(M)
    T = np.asarray(c, dtype=complex)
    if T.shape != (2 * M + 1, 2 * M + 1):
        raise InvalidArgumentError(f"Fourier table must have shape {(2 * M + 1,) * 2}")
    return T


def torus_density(
    c_coeffs: Any,
    k1: float,
    k2: float,
    M: int = 64,
    N: int | None = None,
    floor: float = 1e-12,
    diophantine_C: float = 1e-6,
) -> TorusDensity:
    """Density of the transport equation on the torus with frequencies (k1, k2).

    Fourier division uses period-one coordinates, so mode m is divided by
    2 pi i (m . k).
    """
    M = int(M)
    table = _table_from(c_coeffs, M)
    if np.max(np.abs(table - np.conj(table[::-1, ::-1]))) > 1e-12 * max(1.0, np.max(np.abs(table))):
        raise InvalidArgumentError("killing coefficients are not Hermitian (c must be real)")
    rep = diophantine_check(k1, k2, M, alpha=1.0, C=diophantine_C)
    if not rep.passed:
        raise RationalityError(f"Diophantine check fails at cutoff {M}: min {rep.min_divisor:.3g} at {rep.worst_pair}")
    r = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    div = TWO_PI * (m1 * float(k1) + m2 * float(k2))
    active = (np.abs(table) > 0) & ((m1 != 0) | (m2 != 0))
    small = active & (np.abs(div) < floor)
    if np.any(small):
        i, j = np.argwhere(small)[0]
        mode = (int(m1[i, j]), int(m2[i, j]))
        raise SmallDivisorError(f"divisor below floor at mode {mode}", mode)
    H = np.zeros_like(table)
    H[active] = -table[active] / (1j * div[active])
    mu = float(table[M, M].real)
    if N is None:
        N = max(64, 4 * M)
    if N < 2 * M + 1:
        raise InvalidArgumentError("grid too small for the truncation")
    grid_h = np.zeros((N, N), dtype=complex)
    grid_c = np.zeros((N, N), dtype=complex)
    grid_h[m1 % N, m2 % N] = H
    grid_c[m1 % N, m2 % N] = table
    h = np.fft.ifft2(grid_h).real * N * N
    cs = np.fft.ifft2(grid_c).real * N * N
    shift = float(h.max())
    f = np.exp(h - shift)
    kk = np.rint(np.fft.fftfreq(N) * N)
    if N % 2 == 0:
        kk[N // 2] = 0.0
    K1, K2 = np.meshgrid(kk, kk, indexing="ij")
    transport = np.fft.ifft2(TWO_PI * 1j * (K1 * k1 + K2 * k2) * np.fft.fft2(f)).real
    resid = float(np.max(np.abs(transport + (cs - mu) * f)))
    return TorusDensity((float(k1), float(k2)), M, H, N, f, cs, mu, shift, resid, rep)


# ---------------------------------------------------------------------------
# blow-up profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupProfile:
    """exp(-<S x, x>) times a longitudinal density.

    ``S`` is given in the splitting basis (stable coordinates first);
    ``S_coords`` in the component's own transverse coordinates.
    """

    component: RecurrentComponent
    S: NDArray
    S_coords: NDArray
    eigenvalue: float
    density: CycleDensity | TorusDensity | None = None

    def transverse(self, x: ArrayLike, basis: str = "coords") -> NDArray:
        x = np.asarray(x, dtype=float)
        S = self.S_coords if basis == "coords" else self.S
        if S.size == 0:
            return np.ones(x.shape[:-1]) if x.ndim else np.ones(())
        return np.exp(-np.einsum("...i,ij,...j->...", x, S, x))

    def __call__(self, x: ArrayLike, theta: ArrayLike | None = None) -> NDArray:
        z = self.transverse(x)
        if self.density is None or theta is None:
            return z
        return z * self.density(theta)

    def transverse_mass(self, power: int = 2) -> float:
        return gaussian_mass(self.S, power) if self.S.size else 1.0

    def longitudinal_mass(self) -> float:
        return 1.0 if self.density is None else self.density.l2_mass()


def blowup_profile(
    comp: RecurrentComponent,
    lyap: LyapunovData | None = None,
    density: CycleDensity | TorusDensity | None = None,
    N: int = 256,
    M: int = 64,
) -> BlowupProfile:
    lyap = lyap if lyap is not None else lyapunov_for(comp)
    split = lyap.split
    if split.dim != comp.transverse_dim:
        raise InvalidArgumentError("component and Lyapunov data use different splittings")
    blocks = []
    if split.stable_dim:
        Ss = lyap.stable_decay_form
        if not is_positive_definite(Ss):
            raise ConstraintError("stable block of S is not positive definite (weight Pi too small)")
        blocks.append(Ss)
    if split.unstable_dim:
        blocks.append(0.5 * lyap.A_u)
    S = sla.block_diag(*blocks) if blocks else np.zeros((0, 0))
    S = 0.5 * (S + S.T)
    S_coords = split.basis @ S @ split.basis.T if S.size else S
    if density is None:
        if comp.kind == "cycle":
            density = cycle_density(comp.killing, comp.period, N)
        elif comp.kind == "torus":
            density = torus_density(comp.killing, comp.k[0], comp.k[1], M=max(M, comp.killing.max_mode))
    lam = comp.mean_killing - split.trace_stable
    return BlowupProfile(comp, S, S_coords, float(lam), density)


def profile_operator_ratio(profile: BlowupProfile, lyap: LyapunovData, x: ArrayLike, c: float | None = None) -> NDArray:
    """(blow-up operator applied to the transverse Gaussian) / Gaussian,
    with exact derivatives, at points ``x`` in the splitting basis.

    Operator: -lap + <(B - 2A) x, grad> + c - tr A + <psi2 x, x>.  For cycles
    and tori, the longitudinal part contributes <c> (the density equation),
    so pass ``c`` as the mean killing.  The result is constant and equal to
    the profile eigenvalue when the construction is right.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S = profile.S
    B = lyap.split.block_matrix()
    A = lyap.A
    c = profile.component.mean_killing if c is None else c
    if S.size == 0:
        return np.full(x.shape[0], c)
    Sx = x @ S.T
    drift = x @ (B - 2 * A).T
    lap_over = 4 * np.sum(Sx * Sx, axis=1) - 2 * np.trace(S)
    grad_term = -2 * np.sum(drift * Sx, axis=1)
    pot = c - np.trace(A) + np.einsum("ni,ij,nj->n", x, lyap.psi2, x)
    return -lap_over + grad_term + pot


def profile_discrete_residual(
    profile: BlowupProfile, lyap: LyapunovData, h: float, half_width: float = 3.0, n_theta: int | None = None
) -> tuple[float, float]:
    """Finite-difference residual of the blow-up equation for the profile.

    Central second-order differences on the box [-half_width, half_width]^m
    (and a periodic theta grid with spacing about h/4 for cycles, refined with h).
    Returns (sup residual over interior nodes, Rayleigh eigenvalue estimate).
    """
    comp = profile.component
    S = profile.S
    m = S.shape[0]
    B = lyap.split.block_matrix()
    A = lyap.A
    drift_mat = B - 2 * A
    n = int(round(2 * half_width / h)) + 1
    axis = np.linspace(-half_width, half_width, n)
    hh = axis[1] - axis[0]
    grids = np.meshgrid(*[axis] * m, indexing="ij")
    X = np.stack(grids, axis=-1)
    z = np.exp(-np.einsum("...i,ij,...j->...", X, S, X))
    core = tuple(slice(1, -1) for _ in range(m))

    def transverse_apply(u):
        # u has the transverse axes first (plus optional trailing theta axis)
        out = np.zeros_like(u[core])
        for i in range(m):
            up = [slice(1, -1)] * m
            dn = [slice(1, -1)] * m
            up[i] = slice(2, None)
            dn[i] = slice(None, -2)
            d2 = (u[tuple(up)] - 2 * u[core] + u[tuple(dn)]) / hh**2
            d1 = (u[tuple(up)] - u[tuple(dn)]) / (2 * hh)
            coef = np.einsum("...j,j->...", X[core], drift_mat[i])
            if u.ndim > m:
                coef = coef[..., None]
            out += -d2 + coef * d1
        pot = -np.trace(A) + np.einsum("...i,ij,...j->...", X[core], lyap.psi2, X[core])
        if u.ndim > m:
            pot = pot[..., None]
        return out + pot * u[core]

    if comp.kind == "cycle":
        T = comp.period
        nt = n_theta or max(8, int(round(4 * T / h)))
        theta = np.arange(nt) * (T / nt)
        ht = T / nt
        cth = comp.killing_along(theta)
        dens = cycle_density(comp.killing, T, nt)
        f = dens.f
        w = z[..., None] * f
        Lw = transverse_apply(w)
        dtheta = (np.roll(w, -1, axis=-1) - np.roll(w, 1, axis=-1))[core] / (2 * ht)
        Lw = Lw + dtheta + cth * w[core]
        wc = w[core]
    else:
        cval = comp.mean_killing
        wc = z[core]
        Lw = transverse_apply(z) + cval * wc
    lam = float(np.sum(Lw * wc) / np.sum(wc * wc))
    resid = float(np.max(np.abs(Lw - profile.eigenvalue * wc)))
    return resid, lam


def gaussian_mass(S: ArrayLike, power: int = 1) -> float:
    """int exp(-power <S x, x>) dx = pi^{m/2} / sqrt(det(power S))."""
    if power not in (1, 2):
        raise InvalidArgumentError("power must be 1 or 2")
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    m = S.shape[0]
    if m == 0:
        return 1.0
    if not is_positive_definite(S) or np.max(np.abs(S - S.T)) > 1e-10 * max(1.0, np.max(np.abs(S))):
        raise ConstraintError("S must be symmetric positive definite")
    return float(math.pi ** (m / 2) / math.sqrt(np.linalg.det(power * S)))


# ---------------------------------------------------------------------------
# limit measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    component: RecurrentComponent
    weight: float
    gamma: float
    profile: BlowupProfile | None
    transverse_mass: float
    longitudinal_mass: float

    @property
    def name(self) -> str:
        return WEIGHT_NAMES[self.component.kind]


@dataclass(frozen=True)
class LimitMeasure:
    atoms: tuple[Atom, ...]
    normalizer: float

    @property
    def weights(self) -> dict[str, float]:
        return {a.component.label: a.weight for a in self.atoms}

    def total(self) -> float:
        return float(sum(a.weight for a in self.atoms))

    def support_ok(self) -> bool:
        kinds = {a.component.kind for a in self.atoms if a.weight > 0}
        return len(kinds) <= 1

    def integrate(self, h: Callable[[NDArray], NDArray], n: int = 512) -> float:
        """Integrate a test function on the manifold against the measure.

        Each atom carries the normalized squared density along its component.
        """
        total = 0.0
        for a in self.atoms:
            comp = a.component
            if a.weight == 0:
                continue
            if comp.kind == "point":
                if comp.anchor is None:
                    raise InvalidArgumentError(f"point {comp.label!r} has no anchor")
                val = float(np.asarray(h(comp.anchor[None, :]))[0])
            elif comp.kind == "cycle":
                if comp.anchor is None or comp.tangent is None:
                    raise InvalidArgumentError(f"cycle {comp.label!r} has no embedding")
                s = np.arange(n) / n
                dens = a.profile.density if a.profile is not None and a.profile.density is not None else cycle_density(comp.killing, comp.period, n)
                f2 = dens(s * comp.period) ** 2
                pts = comp.anchor + s[:, None] * comp.tangent
                val = float(np.sum(np.asarray(h(pts)) * f2) / np.sum(f2))
            else:
                s = np.arange(n) / n
                S1, S2 = np.meshgrid(s, s, indexing="ij")
                pts = np.stack([S1, S2], axis=-1)
                dens = a.profile.density if a.profile is not None and a.profile.density is not None else torus_density(comp.killing, *comp.k)
                f2 = dens(pts) ** 2
                val = float(np.sum(np.asarray(h(pts)) * f2) / np.sum(f2))
            total += a.weight * val
        return total


def assemble_limit_measure(
    eligible: Sequence[RecurrentComponent],
    gamma: Mapping[str, float] | Sequence[float],
    profiles: Mapping[str, BlowupProfile] | Sequence[BlowupProfile] | None = None,
) -> LimitMeasure:
    """Weights gamma_S^2 * int z_S^2 * int f_S^2, normalized to sum to one."""
    eligible = list(eligible)
    if not eligible:
        raise InvalidArgumentError("no eligible components")
    kinds = {c.kind for c in eligible}
    if len(kinds) > 1:
        raise ConstraintError(f"mixed component kinds after selection: {sorted(kinds, key=KIND_RANK.get)}")
    labels = [c.label for c in eligible]
    if isinstance(gamma, Mapping):
        g = [float(gamma[lab]) for lab in labels]
    else:
        g = [float(x) for x in gamma]
    if len(g) != len(eligible):
        raise InvalidArgumentError("one modulating coefficient per component is required")
    if any(x < 0 or not np.isfinite(x) for x in g) or not any(x > 0 for x in g):
        raise InvalidArgumentError("modulating coefficients must be >= 0 with at least one positive")
    if profiles is None:
        profs = [blowup_profile(c) for c in eligible]
    elif isinstance(profiles, Mapping):
        profs = [profiles[lab] if lab in profiles else blowup_profile(c) for lab, c in zip(labels, eligible)]
    else:
        profs = list(profiles)
    raw = []
    for c, gi, p in zip(eligible, g, profs):
        tm = p.transverse_mass(2)
        lm = p.longitudinal_mass()
        raw.append((gi * gi * tm * lm, tm, lm))
    total = sum(r[0] for r in raw)
    C = 1.0 / total
    atoms = tuple(
        Atom(c, r[0] * C, gi, p, r[1], r[2]) for c, gi, p, r in zip(eligible, g, profs, raw)
    )
    # exact renormalization so the weights sum to one up to a single rounding
    s = sum(a.weight for a in atoms)
    if abs(s - 1.0) > 1e-15:
        atoms = tuple(Atom(a.component, a.weight / s, a.gamma, a.profile, a.transverse_mass, a.longitudinal_mass) for a in atoms)
    return LimitMeasure(atoms, C)
