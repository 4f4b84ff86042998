"""Recurrent components and benchmark drift fields on the circle and 2-torus.

Every benchmark field is a product of one-dimensional axis profiles, so the
drift, the quadratic Lyapunov function and the potential
``psi = (|grad L|^2 + 2 <grad L, omega>) / 4`` all have closed forms.
Coordinates are period-one on every axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConstraintError, InvalidArgumentError, RationalityError
from .speclin import HyperbolicSplitting, as_square, spectral_split

__all__ = [
    "TrigSeries",
    "RecurrentComponent",
    "DiophantineReport",
    "FieldModel",
    "SineAxis",
    "ConstantAxis",
    "build_component",
    "diophantine_check",
    "benchmark_field",
    "CATALOG",
    "GOLDEN",
    "periodic_delta",
]

TWO_PI = 2.0 * math.pi
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
DEFAULT_PI_WEIGHT = 4.0


def periodic_delta(d: NDArray) -> NDArray:
    """Wrap coordinate differences into [-1/2, 1/2)."""
    return d - np.floor(d + 0.5)


# ---------------------------------------------------------------------------
# trigonometric series for the killing rate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigSeries:
    """Real trigonometric polynomial in period-one coordinates.

    value(theta) = const + sum_j a_j cos(2 pi n_j . theta) + b_j sin(2 pi n_j . theta)
    """

    dim: int
    const: float = 0.0
    modes: NDArray = field(default_factory=lambda: np.zeros((0, 1), dtype=int))
    cos: NDArray = field(default_factory=lambda: np.zeros(0))
    sin: NDArray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=int).reshape(-1, self.dim)
        a = np.asarray(self.cos, dtype=float).reshape(-1)
        b = np.asarray(self.sin, dtype=float).reshape(-1)
        if not (len(modes) == len(a) == len(b)):
            raise InvalidArgumentError("modes, cos and sin must have equal length")
        if not (np.isfinite(self.const) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError("killing coefficients must be finite")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "cos", a)
        object.__setattr__(self, "sin", b)
        object.__setattr__(self, "const", float(self.const))

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value: float, dim: int) -> "TrigSeries":
        return cls(dim, value)

    @classmethod
    def from_spec(cls, spec: Any, dim: int) -> "TrigSeries":
        """Build from a number, a TrigSeries, or a mapping
        ``{"const": c0, "modes": [{"n": [..], "cos": a, "sin": b}, ...]}``."""
        if isinstance(spec, TrigSeries):
            if spec.dim != dim:
                raise InvalidArgumentError(f"killing series has dim {spec.dim}, expected {dim}")
            return spec
        if spec is None:
            return cls(dim, 0.0)
        if isinstance(spec, (int, float, np.floating, np.integer)):
            return cls(dim, float(spec))
        if isinstance(spec, Mapping):
            unknown = set(spec) - {"const", "modes"}
            if unknown:
                raise InvalidArgumentError(f"unknown killing keys: {sorted(unknown)}")
            modes, a, b = [], [], []
            for m in spec.get("modes", []) or []:
                bad = set(m) - {"n", "cos", "sin"}
                if bad:
                    raise InvalidArgumentError(f"unknown mode keys: {sorted(bad)}")
                n = np.atleast_1d(np.asarray(m["n"], dtype=int))
                if n.shape != (dim,):
                    raise InvalidArgumentError(f"mode index {list(n)} must have {dim} entries")
                modes.append(n)
                a.append(float(m.get("cos", 0.0)))
                b.append(float(m.get("sin", 0.0)))
            return cls(dim, float(spec.get("const", 0.0)), np.array(modes, dtype=int).reshape(-1, dim), a, b)
        raise InvalidArgumentError(f"cannot interpret killing specification {spec!r}")

    @classmethod
    def from_samples(cls, values: ArrayLike, drop: float = 1e-14) -> "TrigSeries":
        """Interpolating series through samples on the uniform period-one grid."""
        v = np.asarray(values, dtype=float)
        dim = v.ndim
        N = v.shape
        F = np.fft.fftn(v) / v.size
        freqs = [np.rint(np.fft.fftfreq(n) * n).astype(int) for n in N]
        scale = max(np.max(np.abs(F)), 1e-300)
        seen = set()
        const = 0.0
        modes, a, b = [], [], []
        for idx in np.ndindex(*N):
            if idx in seen:
                continue
            partner = tuple((-i) % n for i, n in zip(idx, N))
            seen.add(idx)
            seen.add(partner)
            c = F[idx]
            m = np.array([freqs[k][idx[k]] for k in range(dim)])
            if not np.any(m):
                const = float(c.real)
                continue
            if abs(c) <= drop * scale:
                continue
            modes.append(m)
            if partner == idx:
                a.append(float(c.real))
                b.append(0.0)
            else:
                a.append(float(2 * c.real))
                b.append(float(-2 * c.imag))
        return cls(dim, const, np.array(modes, dtype=int).reshape(-1, dim), a, b)

    @classmethod
    def from_callable(cls, func: Callable[[NDArray], NDArray], dim: int, modes: int = 64) -> "TrigSeries":
        n = 2 * modes
        axes = np.meshgrid(*[np.arange(n) / n] * dim, indexing="ij")
        pts = np.stack(axes, axis=-1)
        return cls.from_samples(np.asarray(func(pts), dtype=float).reshape((n,) * dim))

    # evaluation ----------------------------------------------------------
    def _phase(self, theta: NDArray) -> NDArray:
        th = np.asarray(theta, dtype=float)
        if self.dim == 1 and (th.ndim == 0 or th.shape[-1] != 1):
            th = th[..., None]
        return TWO_PI * th @ self.modes.T.astype(float)

    def __call__(self, theta: ArrayLike) -> NDArray:
        ph = self._phase(np.asarray(theta))
        return self.const + np.cos(ph) @ self.cos + np.sin(ph) @ self.sin

    def grad(self, theta: ArrayLike) -> NDArray:
        ph = self._phase(np.asarray(theta))
        w = -np.sin(ph) * self.cos + np.cos(ph) * self.sin
        return TWO_PI * w @ self.modes.astype(float)

    def laplacian(self, theta: ArrayLike) -> NDArray:
        ph = self._phase(np.asarray(theta))
        k2 = (TWO_PI**2) * np.sum(self.modes.astype(float) ** 2, axis=1)
        return -(np.cos(ph) * self.cos + np.sin(ph) * self.sin) @ k2

    @property
    def mean(self) -> float:
        return self.const

    @property
    def max_mode(self) -> int:
        return int(np.max(np.abs(self.modes))) if len(self.modes) else 0

    def shifted(self, kappa: float) -> "TrigSeries":
        return TrigSeries(self.dim, self.const + kappa, self.modes, self.cos, self.sin)

    def scaled(self, factor: float) -> "TrigSeries":
        return TrigSeries(self.dim, self.const * factor, self.modes, self.cos * factor, self.sin * factor)

    def sample(self, N: int | Sequence[int]) -> NDArray:
        Ns = (N,) * self.dim if np.isscalar(N) else tuple(N)
        axes = np.meshgrid(*[np.arange(n) / n for n in Ns], indexing="ij")
        return self(np.stack(axes, axis=-1))

    def table(self, M: int) -> NDArray:
        """Complex coefficients c_m of exp(2 pi i m.theta), indexed by m + M."""
        shape = (2 * M + 1,) * self.dim
        T = np.zeros(shape, dtype=complex)
        T[(M,) * self.dim] += self.const
        for n, a, b in zip(self.modes, self.cos, self.sin):
            if np.max(np.abs(n)) > M:
                continue
            plus = tuple(M + n)
            minus = tuple(M - n)
            T[plus] += 0.5 * (a - 1j * b)
            T[minus] += 0.5 * (a + 1j * b)
        return T

    def restrict(self, origin: ArrayLike, direction: ArrayLike) -> "TrigSeries":
        """1-D series of s -> value(origin + s * direction), integer direction."""
        d = np.asarray(direction, dtype=float)
        if not np.allclose(d, np.rint(d)):
            raise InvalidArgumentError("restriction direction must be an integer vector")
        d = np.rint(d).astype(int)
        o = np.asarray(origin, dtype=float)
        const = self.const
        agg: dict[int, complex] = {}
        for n, a, b in zip(self.modes, self.cos, self.sin):
            k = int(n @ d)
            ph = TWO_PI * float(n @ o)
            # a cos(ph + 2 pi k s) + b sin(ph + 2 pi k s)
            ac = a * math.cos(ph) + b * math.sin(ph)
            bc = -a * math.sin(ph) + b * math.cos(ph)
            if k == 0:
                const += ac
                continue
            if k < 0:
                k, bc = -k, -bc
            agg[k] = agg.get(k, 0j) + complex(ac, bc)
        ks = sorted(agg)
        return TrigSeries(1, const, np.array(ks, dtype=int).reshape(-1, 1),
                          [agg[k].real for k in ks], [agg[k].imag for k in ks])

    def to_spec(self) -> dict:
        return {
            "const": self.const,
            "modes": [
                {"n": [int(x) for x in n], "cos": float(a), "sin": float(b)}
                for n, a, b in zip(self.modes, self.cos, self.sin)
            ],
        }


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------

KINDS = ("point", "cycle", "torus")
KIND_RANK = {"point": 0, "cycle": 1, "torus": 2}


@dataclass(frozen=True)
class RecurrentComponent:
    """A hyperbolic point, cycle, or irrational 2-torus.

    ``frame`` maps transverse coordinates to ambient offsets from ``anchor``;
    ``transverse_B`` is expressed in those transverse coordinates.
    """

    kind: str
    label: str
    transverse_B: NDArray
    split: HyperbolicSplitting
    pi_s: NDArray
    pi_u: NDArray
    point_value: float = 0.0
    killing: TrigSeries | None = None
    period: float = 1.0
    k: tuple[float, float] | None = None
    anchor: NDArray | None = None
    frame: NDArray | None = None
    tangent: NDArray | None = None

    @property
    def transverse_dim(self) -> int:
        return self.transverse_B.shape[0]

    @property
    def mean_killing(self) -> float:
        """R: c(P), the time average along a cycle, or the torus mean."""
        if self.kind == "point":
            return float(self.point_value)
        return float(self.killing.mean)

    def killing_along(self, theta: ArrayLike) -> NDArray:
        """c(theta) along a cycle, theta in [0, period)."""
        if self.kind != "cycle":
            raise InvalidArgumentError("killing_along is defined for cycles")
        return self.killing(np.asarray(theta, dtype=float) / self.period)

    def with_killing_shift(self, kappa: float) -> "RecurrentComponent":
        from dataclasses import replace

        if self.kind == "point":
            return replace(self, point_value=self.point_value + kappa)
        return replace(self, killing=self.killing.shifted(kappa))

    def distance(self, X: ArrayLike) -> NDArray:
        """Periodic distance from ambient points to the component set."""
        X = np.asarray(X, dtype=float)
        if self.kind == "torus":
            return np.zeros(X.shape[:-1])
        if self.anchor is None:
            raise InvalidArgumentError(f"component {self.label!r} has no anchor")
        d = periodic_delta(X - self.anchor)
        if self.kind == "point":
            return np.linalg.norm(d, axis=-1)
        t = self.tangent / np.linalg.norm(self.tangent)
        along = d @ t
        return np.linalg.norm(d - along[..., None] * t, axis=-1)

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "label": self.label,
            "B": self.transverse_B.tolist(),
            "stable_dim": self.split.stable_dim,
            "unstable_dim": self.split.unstable_dim,
            "R": self.mean_killing,
        }
        if self.kind == "cycle":
            out["period"] = self.period
        if self.kind == "torus":
            out["k"] = list(self.k)
        return out


def _pi_block(value: Any, n: int, name: str) -> NDArray:
    if n == 0:
        return np.zeros((0, 0))
    if value is None:
        value = DEFAULT_PI_WEIGHT
    if np.isscalar(value):
        P = float(value) * np.eye(n)
    else:
        P = as_square(value, name)
        if P.shape != (n, n):
            raise InvalidArgumentError(f"{name} must be {n}x{n}")
    return P


def build_component(
    kind: str,
    B: ArrayLike | None = None,
    c: Any = 0.0,
    label: str | None = None,
    *,
    period: float = 1.0,
    k: Sequence[float] | None = None,
    pi_s: Any = None,
    pi_u: Any = None,
    anchor: ArrayLike | None = None,
    frame: ArrayLike | None = None,
    tangent: ArrayLike | None = None,
    floor: float = 1e-6,
    coupling_tol: float = 1e-8,
    diophantine_cutoff: int = 64,
    diophantine_C: float = 1e-6,
) -> RecurrentComponent:
    """Validate a component description and cache its hyperbolic splitting.

    ``pi_s``/``pi_u`` are the Lyapunov weights (scalar multiples of the
    identity or full matrices; default 4).
    """
    kind = str(kind).lower()
    if kind not in KINDS:
        raise InvalidArgumentError(f"unknown component kind {kind!r}")
    label = label or kind
    if B is None:
        if kind != "torus":
            raise InvalidArgumentError(f"component {label!r} needs a transverse matrix B")
        Bm = np.zeros((0, 0))
    else:
        Bm = as_square(B, f"B of {label!r}", allow_empty=True)
    if kind == "torus" and Bm.size:
        raise InvalidArgumentError("torus components on T^2 have no transverse directions")
    if kind != "torus" and Bm.size == 0:
        raise InvalidArgumentError(f"{kind} component {label!r} needs a nonempty B")
    try:
        split = spectral_split(Bm, floor=floor, coupling_tol=coupling_tol)
    except Exception as exc:  # re-raise with the component name attached
        raise type(exc)(f"component {label!r}: {exc}") from exc
    Ps = _pi_block(pi_s, split.stable_dim, "pi_s")
    Pu = _pi_block(pi_u, split.unstable_dim, "pi_u")

    extra: dict[str, Any] = {}
    if kind == "point":
        if isinstance(c, TrigSeries):
            raise InvalidArgumentError("point killing must be a scalar")
        extra["point_value"] = float(c)
    elif kind == "cycle":
        if not (np.isfinite(period) and period > 0):
            raise InvalidArgumentError("cycle period must be positive")
        if callable(c) and not isinstance(c, TrigSeries):
            per = float(period)
            series = TrigSeries.from_callable(lambda s: c(per * s[..., 0]), 1)
            if abs(float(c(0.0)) - float(c(per))) > 1e-10 * max(1.0, abs(float(c(0.0)))):
                raise InvalidArgumentError(f"killing on cycle {label!r} is not periodic")
        else:
            series = TrigSeries.from_spec(c, 1)
        extra["killing"] = series
        extra["period"] = float(period)
    else:
        if k is None or len(k) != 2:
            raise InvalidArgumentError("torus components need frequencies k=(k1, k2)")
        k1, k2 = float(k[0]), float(k[1])
        rep0 = diophantine_check(k1, k2, diophantine_cutoff, alpha=0.0, C=0.0)
        if rep0.min_divisor <= 1e-12 * math.hypot(k1, k2):
            raise RationalityError(
                f"torus {label!r}: frequencies ({k1}, {k2}) are rationally dependent; "
                f"m={rep0.worst_pair} annihilates"
            )
        rep = diophantine_check(k1, k2, diophantine_cutoff, alpha=1.0, C=diophantine_C)
        if not rep.passed:
            raise RationalityError(
                f"torus {label!r}: Diophantine check failed (min {rep.min_divisor:.3g} at {rep.worst_pair})"
            )
        if callable(c) and not isinstance(c, TrigSeries):
            series = TrigSeries.from_callable(c, 2)
        else:
            series = TrigSeries.from_spec(c, 2)
        extra["killing"] = series
        extra["k"] = (k1, k2)
    if anchor is not None:
        extra["anchor"] = np.atleast_1d(np.asarray(anchor, dtype=float))
    if frame is not None:
        extra["frame"] = np.atleast_2d(np.asarray(frame, dtype=float))
    if tangent is not None:
        extra["tangent"] = np.atleast_1d(np.asarray(tangent, dtype=float))
    return RecurrentComponent(kind=kind, label=label, transverse_B=Bm, split=split, pi_s=Ps, pi_u=Pu, **extra)


# ---------------------------------------------------------------------------
# small divisors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiophantineReport:
    min_divisor: float
    worst_pair: tuple[int, int]
    passed: bool
    alpha: float
    C: float
    cutoff: int
    table: NDArray | None = None  # rows (m1, m2, |m.k|, quantity)


def _canonical(m1: int, m2: int) -> tuple[int, int]:
    if m1 < 0 or (m1 == 0 and m2 < 0):
        return (-m1, -m2)
    return (m1, m2)


def diophantine_check(
    k1: float, k2: float, M: int, alpha: float = 1.0, C: float = 1e-6, include_table: bool = False
) -> DiophantineReport:
    """Scan 0 < m1^2 + m2^2 <= M^2 for min |m.k| (m1^2 + m2^2)^alpha."""
    if int(M) < 1:
        raise InvalidArgumentError("cutoff M must be >= 1")
    if not (np.isfinite(k1) and np.isfinite(k2)) or k1 * k1 + k2 * k2 == 0:
        raise InvalidArgumentError("frequencies must be finite and not both zero")
    M = int(M)
    r = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    m1, m2 = m1.ravel(), m2.ravel()
    r2 = m1 * m1 + m2 * m2
    keep = (r2 > 0) & (r2 <= M * M)
    m1, m2, r2 = m1[keep], m2[keep], r2[keep]
    div = np.abs(m1 * float(k1) + m2 * float(k2))
    q = div * r2.astype(float) ** alpha
    qmin = float(q.min())
    cand = np.flatnonzero(q == qmin)
    best = cand[np.lexsort((m2[cand], m1[cand], r2[cand]))[0]]
    worst = _canonical(int(m1[best]), int(m2[best]))
    table = np.column_stack([m1, m2, div, q]) if include_table else None
    return DiophantineReport(qmin, worst, bool(qmin >= C), float(alpha), float(C), M, table)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SineAxis:
    """Axis drift sigma*sin(2 pi x) with a blended quadratic Lyapunov term.

    grad L = r(x) * drift with r = r0 + (rh - r0)(1 - cos 2 pi x)/2, so the
    Lyapunov Hessian at x = 0 and x = 1/2 equals r times the linearization
    there.  r = 4 / Pi reproduces the weighted-Gramian data of a scalar block.
    The axis potential is r(2 - r) sin^2(2 pi x) / 4 >= 0.
    """

    sigma: float
    r0: float
    rh: float

    def _r(self, x):
        return self.r0 + (self.rh - self.r0) * 0.5 * (1 - np.cos(TWO_PI * x))

    def _r_d(self, x):
        return (self.rh - self.r0) * math.pi * np.sin(TWO_PI * x)

    def drift(self, x):
        return self.sigma * np.sin(TWO_PI * x)

    def drift_d(self, x):
        return self.sigma * TWO_PI * np.cos(TWO_PI * x)

    def lyap(self, x):
        d = self.rh - self.r0
        F = (self.r0 + d / 2) * (1 - np.cos(TWO_PI * x)) / TWO_PI - (d / 2) * np.sin(TWO_PI * x) ** 2 / (4 * math.pi)
        top = (self.r0 + d / 2) / math.pi
        return F if self.sigma > 0 else top - F

    def lyap_d(self, x):
        return self._r(x) * self.drift(x)

    def lyap_dd(self, x):
        return self._r_d(x) * self.drift(x) + self._r(x) * self.drift_d(x)

    def terms(self, x):
        """(drift, lyap_d, lyap_dd) sharing one sine and cosine evaluation."""
        s, co = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        d = self.rh - self.r0
        r = self.r0 + d * 0.5 * (1 - co)
        b = self.sigma * s
        return b, r * b, d * math.pi * s * b + r * self.sigma * TWO_PI * co


@dataclass(frozen=True)
class ConstantAxis:
    speed: float

    def drift(self, x):
        return np.full(np.shape(x), float(self.speed))

    def drift_d(self, x):
        return np.zeros(np.shape(x))

    def lyap(self, x):
        return np.zeros(np.shape(x))

    def lyap_d(self, x):
        return np.zeros(np.shape(x))

    def lyap_dd(self, x):
        return np.zeros(np.shape(x))

    def terms(self, x):
        z = np.zeros(np.shape(x))
        return z + self.speed, z, z


@dataclass(frozen=True)
class FieldModel:
    """Separable drift field b = omega + grad L on a flat period-one manifold.

    Point arrays have the coordinate on the last axis.  ``lyap_laplacian``
    returns sum_i d^2 L / dx_i^2 (the analyst's Laplacian).
    """

    name: str
    axes: tuple
    killing: TrigSeries
    components: tuple[RecurrentComponent, ...]
    params: dict

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def manifold(self) -> str:
        return "circle" if self.dim == 1 else "torus2"

    @property
    def periodic(self) -> bool:
        return True

    def _coords(self, X):
        X = np.asarray(X, dtype=float)
        if self.dim == 1 and (X.ndim == 0 or X.shape[-1] != 1):
            X = X[..., None]
        return X

    def _per_axis(self, X, method):
        X = self._coords(X)
        return np.stack([getattr(a, method)(X[..., i]) for i, a in enumerate(self.axes)], axis=-1)

    def drift(self, X):
        return self._per_axis(X, "drift")

    def drift_jac(self, X):
        d = self._per_axis(X, "drift_d")
        return d[..., :, None] * np.eye(self.dim)

    def lyap(self, X):
        return np.sum(self._per_axis(X, "lyap"), axis=-1)

    def lyap_grad(self, X):
        return self._per_axis(X, "lyap_d")

    def lyap_hess(self, X):
        d = self._per_axis(X, "lyap_dd")
        return d[..., :, None] * np.eye(self.dim)

    def lyap_laplacian(self, X):
        return np.sum(self._per_axis(X, "lyap_dd"), axis=-1)

    def omega(self, X):
        return self.drift(X) - self.lyap_grad(X)

    def omega_jac(self, X):
        return self.drift_jac(X) - self.lyap_hess(X)

    def psi(self, X):
        g = self.lyap_grad(X)
        om = self.omega(X)
        return 0.25 * (np.sum(g * g, axis=-1) + 2 * np.sum(g * om, axis=-1))

    def psi_grad(self, X):
        g = self.lyap_grad(X)
        om = self.omega(X)
        H = self.lyap_hess(X)
        J = self.omega_jac(X)
        # grad of (g.g + 2 g.om)/4 = (H g + H om + J^T g)/2
        Hg = np.einsum("...ij,...j->...i", H, g)
        Hom = np.einsum("...ij,...j->...i", H, om)
        Jg = np.einsum("...ji,...j->...i", J, g)
        return 0.5 * (Hg + Hom + Jg)

    def killing_at(self, X):
        return self.killing(self._coords(X))

    def omega_and_potential(self, X, eps: float):
        """(omega, c_eps / eps) in one pass; used by path simulation."""
        X = self._coords(X)
        parts = [a.terms(X[..., i]) for i, a in enumerate(self.axes)]
        b = np.stack([p[0] for p in parts], axis=-1)
        g = np.stack([p[1] for p in parts], axis=-1)
        lap = sum(p[2] for p in parts)
        om = b - g
        psi = 0.25 * (np.sum(g * g, axis=-1) + 2 * np.sum(g * om, axis=-1))
        return om, self.killing(X) - 0.5 * lap + psi / eps

    def gauge_potential(self, X, eps: float):
        """c + (analyst Laplacian sign flipped) L / 2 + psi / eps, i.e. c_eps / eps."""
        return self.killing_at(X) - 0.5 * self.lyap_laplacian(X) + self.psi(X) / eps

    def grid_shape(self, N: int | Sequence[int]) -> tuple[int, ...]:
        if np.isscalar(N):
            return (int(N),) * self.dim
        Ns = tuple(int(n) for n in N)
        if len(Ns) != self.dim:
            raise InvalidArgumentError(f"grid needs {self.dim} sizes")
        return Ns

    def grid(self, N: int | Sequence[int]) -> NDArray:
        """Grid points with shape (*shape, dim)."""
        Ns = self.grid_shape(N)
        axes = np.meshgrid(*[np.arange(n) / n for n in Ns], indexing="ij")
        return np.stack(axes, axis=-1)

    def component(self, label: str) -> RecurrentComponent:
        for comp in self.components:
            if comp.label == label:
                return comp
        raise InvalidArgumentError(f"no component labelled {label!r}")

    def distance_to_recurrent(self, X) -> NDArray:
        X = self._coords(X)
        return np.min(np.stack([c.distance(X) for c in self.components]), axis=0)

    def with_killing(self, killing: Any) -> "FieldModel":
        return benchmark_field(self.name, {**self.params, "killing": killing})

    def check_potential(self, N: int = 64, tol: float = 1e-10) -> None:
        """Psi >= -tol, and its zero set sits within one cell of the components."""
        X = self.grid(N)
        P = self.psi(X)
        if P.min() < -tol:
            raise ConstraintError(f"{self.name}: psi has negative value {P.min():.3g}")
        h = 1.0 / min(self.grid_shape(N))
        zeros = X[P <= tol]
        if len(zeros) and np.max(self.distance_to_recurrent(zeros)) > h * (1 + 1e-9):
            raise ConstraintError(f"{self.name}: psi vanishes away from the declared components")
        for comp in self.components:
            if comp.kind != "torus" and len(zeros) and np.min(comp.distance(zeros)) > h:
                raise ConstraintError(f"{self.name}: psi does not vanish on {comp.label!r}")
            if comp.kind != "torus" and not len(zeros):
                raise ConstraintError(f"{self.name}: psi has no zeros on the grid")


def _weights(params: Mapping) -> tuple[float, float]:
    ps = float(params.get("pi_stable", DEFAULT_PI_WEIGHT))
    pu = float(params.get("pi_unstable", DEFAULT_PI_WEIGHT))
    if ps <= 2 or pu <= 2:
        raise InvalidArgumentError("Lyapunov weights pi_stable, pi_unstable must exceed 2")
    return ps, pu


def _circle_sink_source(params):
    ps, pu = _weights(params)
    killing = TrigSeries.from_spec(params.get("killing", 0.0), 1)
    # b = sin(2 pi x): source at 0, sink at 1/2
    axis = SineAxis(1.0, 4.0 / pu, 4.0 / ps)
    comps = (
        build_component("point", [[TWO_PI]], float(killing(0.0)), "source",
                        pi_u=pu, anchor=[0.0], frame=[[1.0]]),
        build_component("point", [[-TWO_PI]], float(killing(0.5)), "sink",
                        pi_s=ps, anchor=[0.5], frame=[[1.0]]),
    )
    return (axis,), killing, comps


def _torus_shear_cycles(params):
    ps, pu = _weights(params)
    killing = TrigSeries.from_spec(params.get("killing", 0.0), 2)
    axis_x = SineAxis(-1.0, 4.0 / ps, 4.0 / pu)
    comps = (
        build_component("cycle", [[-TWO_PI]], killing.restrict([0.0, 0.0], [0, 1]), "stable_cycle",
                        period=1.0, pi_s=ps, anchor=[0.0, 0.0], frame=[[1.0], [0.0]], tangent=[0.0, 1.0]),
        build_component("cycle", [[TWO_PI]], killing.restrict([0.5, 0.0], [0, 1]), "unstable_cycle",
                        period=1.0, pi_u=pu, anchor=[0.5, 0.0], frame=[[1.0], [0.0]], tangent=[0.0, 1.0]),
    )
    return (axis_x, ConstantAxis(1.0)), killing, comps


def _torus_irrational_flow(params):
    k = params.get("k", (1.0, GOLDEN))
    if len(k) != 2:
        raise InvalidArgumentError("k must have two entries")
    k1, k2 = float(k[0]), float(k[1])
    killing = TrigSeries.from_spec(params.get("killing", 0.0), 2)
    comps = (build_component("torus", None, killing, "torus", k=(k1, k2)),)
    return (ConstantAxis(k1), ConstantAxis(k2)), killing, comps


def _torus_gradient_points(params):
    ps, pu = _weights(params)
    killing = TrigSeries.from_spec(params.get("killing", 0.0), 2)
    ax = SineAxis(-1.0, 4.0 / ps, 4.0 / pu)
    comps = []
    for x0 in (0.0, 0.5):
        for y0 in (0.0, 0.5):
            B = np.diag([-TWO_PI if x0 == 0 else TWO_PI, -TWO_PI if y0 == 0 else TWO_PI])
            label = {(0.0, 0.0): "sink", (0.5, 0.5): "source", (0.0, 0.5): "saddle_x", (0.5, 0.0): "saddle_y"}[(x0, y0)]
            comps.append(build_component("point", B, float(killing([x0, y0])), label,
                                         pi_s=ps, pi_u=pu, anchor=[x0, y0], frame=np.eye(2)))
    return (ax, ax), killing, tuple(comps)


CATALOG = {
    "circle_sink_source": _circle_sink_source,
    "torus_shear_cycles": _torus_shear_cycles,
    "torus_irrational_flow": _torus_irrational_flow,
    "torus_gradient_points": _torus_gradient_points,
}

_PARAM_KEYS = {
    "circle_sink_source": {"killing", "pi_stable", "pi_unstable"},
    "torus_shear_cycles": {"killing", "pi_stable", "pi_unstable"},
    "torus_irrational_flow": {"killing", "k"},
    "torus_gradient_points": {"killing", "pi_stable", "pi_unstable"},
}


def benchmark_field(name: str, params: Mapping | None = None, check_grid: int = 64) -> FieldModel:
    """Instantiate a catalog field; Psi >= 0 is verified on a grid."""
    if name not in CATALOG:
        raise InvalidArgumentError(f"unknown benchmark {name!r}; choose from {sorted(CATALOG)}")
    params = dict(params or {})
    bad = set(params) - _PARAM_KEYS[name]
    if bad:
        raise InvalidArgumentError(f"unknown parameters for {name}: {sorted(bad)}")
    axes, killing, comps = CATALOG[name](params)
    model = FieldModel(name, tuple(axes), killing, tuple(comps), params)
    model.check_potential(check_grid)
    return model
