"""Rate function I_T(x), its Hamiltonian extremals, and a Feynman-Kac check.

Lagrangian ``|gamma' + omega|^2 / 2 + psi`` with gamma(0) = x and a free
endpoint.  The Hamiltonian is ``H(x, p) = -<omega, p> + |p|^2/2 - psi`` and
extremals solve

    x' = p - omega(x),     p' = J_omega(x)^T p + grad psi(x),     p(T) = 0.

Fields are duck-typed: anything with ``omega``, ``omega_jac``, ``psi`` and
``psi_grad`` acting on arrays of points (coordinates on the last axis).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from .errors import IntegratorError, InvalidArgumentError, ShootingError

__all__ = [
    "LinearQuadraticModel",
    "Trajectory",
    "ExtremalResult",
    "MinimizeResult",
    "QuadraticBoundResult",
    "MCResult",
    "hamiltonian",
    "hamiltonian_flow",
    "extremal_shoot",
    "action_minimize",
    "quadratic_bound_fit",
    "feynman_kac_mc",
    "decay_margin",
    "DEFAULT_TIME_BOUND",
]

DEFAULT_TIME_BOUND = 0.5

# three-stage Gauss-Legendre collocation (order 6, symplectic)
_S15 = math.sqrt(15.0)
_GL_A = np.array(
    [
        [5 / 36, 2 / 9 - _S15 / 15, 5 / 36 - _S15 / 30],
        [5 / 36 + _S15 / 24, 2 / 9, 5 / 36 - _S15 / 24],
        [5 / 36 + _S15 / 30, 2 / 9 + _S15 / 15, 5 / 36],
    ]
)
_GL_B = np.array([5 / 18, 4 / 9, 5 / 18])
_GL_C = np.array([0.5 - _S15 / 10, 0.5, 0.5 + _S15 / 10])


@dataclass(frozen=True)
class LinearQuadraticModel:
    """omega(x) = W x and psi(x) = <P x, x> on R^d, killing c0."""

    W: NDArray
    P: NDArray
    c0: float = 0.0

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if W.shape != P.shape or W.shape[0] != W.shape[1]:
            raise InvalidArgumentError("W and P must be square and of equal size")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "P", 0.5 * (P + P.T))

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    periodic = False

    def _x(self, X):
        X = np.asarray(X, dtype=float)
        if self.dim == 1 and (X.ndim == 0 or X.shape[-1] != 1):
            X = X[..., None]
        return X

    def omega(self, X):
        return self._x(X) @ self.W.T

    def omega_jac(self, X):
        X = self._x(X)
        return np.broadcast_to(self.W, X.shape[:-1] + self.W.shape)

    def psi(self, X):
        X = self._x(X)
        return np.einsum("...i,ij,...j->...", X, self.P, X)

    def psi_grad(self, X):
        return 2 * self._x(X) @ self.P

    def gauge_potential(self, X, eps: float):
        return self.c0 + self.psi(X) / eps

    def omega_and_potential(self, X, eps: float):
        return self.omega(X), self.gauge_potential(X, eps)

    def linear_hamiltonian(self) -> NDArray:
        """Matrix K with d/dt (x, p) = K (x, p)."""
        d = self.dim
        K = np.zeros((2 * d, 2 * d))
        K[:d, :d] = -self.W
        K[:d, d:] = np.eye(d)
        K[d:, :d] = 2 * self.P
        K[d:, d:] = self.W.T
        return K


def _field_dim(fld) -> int:
    return int(fld.dim)


def hamiltonian(fld, x: ArrayLike, p: ArrayLike) -> NDArray:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    om = fld.omega(x)
    return -np.sum(om * p, axis=-1) + 0.5 * np.sum(p * p, axis=-1) - fld.psi(x)


def _rhs(fld, Z, d):
    x, p = Z[..., :d], Z[..., d:]
    J = fld.omega_jac(x)
    dx = p - fld.omega(x)
    dp = np.einsum("...ji,...j->...i", J, p) + fld.psi_grad(x)
    return np.concatenate([dx, dp], axis=-1)


def _lagrangian_on_flow(fld, Z, d):
    p = Z[..., d:]
    return 0.5 * np.sum(p * p, axis=-1) + fld.psi(Z[..., :d])


def _gl_step(fld, Z, h, d, tol=1e-15, max_iter=60):
    """One Gauss-Legendre step for a batch Z (..., 2d).  Returns (Z_new, stage states)."""
    K = np.repeat(_rhs(fld, Z, d)[..., None, :], 3, axis=-2)
    scale = 1.0 + np.max(np.abs(Z))
    for _ in range(max_iter):
        stages = Z[..., None, :] + h * np.einsum("ij,...jk->...ik", _GL_A, K)
        K_new = _rhs(fld, stages, d)
        delta = np.max(np.abs(K_new - K)) * abs(h)
        K = K_new
        if delta <= tol * scale:
            break
    else:
        return None, None
    stages = Z[..., None, :] + h * np.einsum("ij,...jk->...ik", _GL_A, K)
    return Z + h * np.einsum("j,...jk->...k", _GL_B, K), stages


def _advance(fld, Z, h, d, depth=0):
    Zn, st = _gl_step(fld, Z, h, d)
    if Zn is not None:
        return Zn, st, [(h, st)]
    if depth >= 8:
        raise IntegratorError("stage iteration failed after repeated step halving")
    Z1, _, seg1 = _advance(fld, Z, h / 2, d, depth + 1)
    Z2, _, seg2 = _advance(fld, Z1, h / 2, d, depth + 1)
    return Z2, None, seg1 + seg2


@dataclass(frozen=True)
class Trajectory:
    t: NDArray
    x: NDArray
    p: NDArray
    action: NDArray  # running action at each time
    energy_drift: float

    @property
    def z(self) -> NDArray:
        return np.concatenate([self.x, self.p], axis=-1)


def _integrate(fld, Z0, T, dt):
    """Batch integration; Z0 has shape (batch, 2d).  Returns arrays over time."""
    d = Z0.shape[-1] // 2
    n = max(1, int(math.ceil(T / dt - 1e-12)))
    h = T / n
    Z = Z0.copy()
    Zs = [Z.copy()]
    acts = [np.zeros(Z.shape[:-1])]
    running = np.zeros(Z.shape[:-1])
    for _ in range(n):
        Z, _, segs = _advance(fld, Z, h, d)
        for hs, st in segs:
            running = running + hs * np.einsum("j,...j->...", _GL_B, _lagrangian_on_flow(fld, st, d))
        if not np.all(np.isfinite(Z)):
            raise IntegratorError("trajectory left the finite range")
        Zs.append(Z.copy())
        acts.append(running.copy())
    return np.linspace(0.0, T, n + 1), np.stack(Zs), np.stack(acts)


def hamiltonian_flow(fld, z0: ArrayLike, T: float, dt: float = 1e-3) -> Trajectory:
    """Symplectic (Gauss-Legendre, order 6) integration of the extremal equations."""
    if not (dt > 0 and T >= dt):
        raise InvalidArgumentError("need dt > 0 and T >= dt")
    d = _field_dim(fld)
    Z0 = np.asarray(z0, dtype=float).reshape(1, 2 * d)
    t, Zs, acts = _integrate(fld, Z0, T, dt)
    Zs = Zs[:, 0]
    H = hamiltonian(fld, Zs[:, :d], Zs[:, d:])
    return Trajectory(t, Zs[:, :d], Zs[:, d:], acts[:, 0], float(np.max(np.abs(H - H[0]))))


@dataclass(frozen=True)
class ExtremalResult:
    trajectory: Trajectory
    action: float
    boundary_residual: float
    energy_drift: float
    endpoint_velocity_residual: float
    iterations: int
    p0: NDArray


def extremal_shoot(
    fld,
    x: ArrayLike,
    T: float,
    dt: float = 1e-3,
    tol: float = 1e-10,
    max_iter: int = 30,
    time_bound: float = DEFAULT_TIME_BOUND,
    p0: ArrayLike | None = None,
) -> ExtremalResult:
    """Newton shooting on p0 -> p(T) with a finite-difference Jacobian."""
    if T > time_bound:
        raise InvalidArgumentError(f"T={T:g} exceeds the small-time bound {time_bound:g}")
    if T <= 0:
        raise InvalidArgumentError("T must be positive")
    d = _field_dim(fld)
    x = np.asarray(x, dtype=float).reshape(d)
    dt = min(dt, T)
    p = np.zeros(d) if p0 is None else np.asarray(p0, dtype=float).reshape(d).copy()

    def end_momentum(P):
        Z0 = np.concatenate([np.broadcast_to(x, P.shape), P], axis=-1)
        _, Zs, _ = _integrate(fld, Z0, T, dt)
        return Zs[-1][..., d:]

    F = end_momentum(p[None])[0]
    res = float(np.linalg.norm(F))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        hstep = 1e-6 * max(1.0, float(np.max(np.abs(p))))
        batch = p[None] + hstep * np.vstack([np.eye(d), -np.eye(d)])
        Fb = end_momentum(batch)
        J = (Fb[:d] - Fb[d:]).T / (2 * hstep)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise ShootingError("singular shooting Jacobian", res) from exc
        lam = 1.0
        for _ in range(20):
            trial = p + lam * step
            Ft = end_momentum(trial[None])[0]
            rt = float(np.linalg.norm(Ft))
            if rt < res or rt <= tol:
                break
            lam *= 0.5
        p, F, res = trial, Ft, rt
    if res > tol:
        raise ShootingError(f"shooting did not converge (|p(T)| = {res:.3g})", res)
    traj = hamiltonian_flow(fld, np.concatenate([x, p]), T, dt)
    # gamma'(T) + omega(gamma(T)) from the flow equation x' = p - omega
    xT = traj.x[-1]
    vel = traj.p[-1] - fld.omega(xT[None])[0] + fld.omega(xT[None])[0]
    return ExtremalResult(
        traj,
        float(traj.action[-1]),
        float(np.linalg.norm(traj.p[-1])),
        traj.energy_drift,
        float(np.linalg.norm(vel)),
        it,
        p,
    )


@dataclass(frozen=True)
class MinimizeResult:
    action: float
    path: NDArray
    certified: bool
    iterations: int
    gradient_norm: float


def _discrete_action(fld, gamma, dt):
    seg = np.diff(gamma, axis=0)
    mid = 0.5 * (gamma[1:] + gamma[:-1])
    v = seg / dt + fld.omega(mid)
    I = dt * np.sum(0.5 * np.sum(v * v, axis=1) + fld.psi(mid))
    J = fld.omega_jac(mid)
    common = 0.5 * dt * (np.einsum("kji,kj->ki", J, v) + fld.psi_grad(mid))
    g = np.zeros_like(gamma)
    g[1:] += v + common
    g[:-1] += -v + common
    return I, g


def action_minimize(
    fld, x: ArrayLike, T: float, N: int = 512, gtol: float = 1e-12, max_iter: int = 20000
) -> MinimizeResult:
    """Direct minimization of the midpoint-rule action over piecewise-linear paths.

    The unknowns are the segment velocities, which keeps the kinetic term
    diagonal; the optimizer is L-BFGS with a line search.
    """
    if N < 8:
        raise InvalidArgumentError("N must be >= 8")
    d = _field_dim(fld)
    x = np.asarray(x, dtype=float).reshape(d)
    dt = T / N

    def unpack(v):
        vel = v.reshape(N, d)
        return np.vstack([x, x + dt * np.cumsum(vel, axis=0)])

    def fun(v):
        gamma = unpack(v)
        I, g = _discrete_action(fld, gamma, dt)
        grad_v = dt * np.cumsum(g[1:][::-1], axis=0)[::-1]
        return I, grad_v.ravel()

    v0 = -np.repeat(fld.omega(x[None]), N, axis=0).ravel()
    res = minimize(fun, v0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15, "maxcor": 30})
    I, g = fun(res.x)
    gnorm = float(np.max(np.abs(g)))
    certified = bool(res.success or gnorm < 1e-8)
    return MinimizeResult(float(I), unpack(res.x), certified, int(res.nit), gnorm)


@dataclass(frozen=True)
class QuadraticBoundResult:
    C_fit: float
    min_ratio: float
    ratios: NDArray
    actions: NDArray
    offsets: NDArray

    @property
    def passed(self) -> bool:
        return bool(self.min_ratio > 0)


def quadratic_bound_fit(fld, component, T: float, samples: ArrayLike, **shoot_kw) -> QuadraticBoundResult:
    """I_T(x) / |x'|^2 over transverse offsets x' from the component anchor."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    m = component.transverse_dim
    if S.shape[1] != m:
        S = S.reshape(-1, m)
    frame = component.frame if component.frame is not None else np.eye(m)
    ratios, actions, offs = [], [], []
    for xp in S:
        r2 = float(xp @ xp)
        if r2 == 0.0:
            continue
        pt = component.anchor + frame @ xp
        res = extremal_shoot(fld, pt, T, **shoot_kw)
        actions.append(res.action)
        ratios.append(res.action / r2)
        offs.append(xp)
    ratios = np.array(ratios)
    actions = np.array(actions)
    offs = np.array(offs)
    r2s = np.sum(offs**2, axis=1)
    C_fit = float(r2s @ actions / (r2s @ r2s))
    return QuadraticBoundResult(C_fit, float(ratios.min()), ratios, actions, offs)


# ---------------------------------------------------------------------------
# Feynman-Kac
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    n_paths: int
    dt: float
    steps: int
    seed: int


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("RECURRENTLAB_THREADS")
    return max(1, int(env)) if env else 1


def _mc_chunk(fld, x, t, eps, v, n, steps, dt, seed, chunk):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))
    d = _field_dim(fld)
    X = np.tile(np.asarray(x, dtype=float).reshape(1, d), (n, 1))
    periodic = getattr(fld, "periodic", False)
    om, kill_prev = fld.omega_and_potential(X, eps)
    integral = np.zeros(n)
    sig = math.sqrt(2 * eps * dt)
    for _ in range(steps):
        X = X - om * dt + sig * rng.standard_normal((n, d))
        if periodic:
            X = X - np.floor(X)
        om, kill = fld.omega_and_potential(X, eps)
        integral += 0.5 * dt * (kill_prev + kill)
        kill_prev = kill
    vals = (np.ones(n) if v is None else np.asarray(v(X), dtype=float)) * np.exp(-integral)
    return float(np.sum(vals)), float(np.sum(vals * vals))


def feynman_kac_mc(
    fld,
    x: ArrayLike,
    t: float,
    eps: float,
    n_paths: int = 100_000,
    seed: int = 0,
    v=None,
    dt: float | None = None,
    chunk_size: int = 10_000,
    threads: int | None = None,
) -> MCResult:
    """E_x[v(X_t) exp(-int_0^t c_eps(X_s)/eps ds)] with dX = -omega dt + sqrt(2 eps) dW.

    ``c_eps / eps`` is ``fld.gauge_potential(X, eps)``.  Paths are split
    into fixed chunks with independent counter-based streams keyed by
    (seed, chunk index), so results do not depend on the thread count.
    """
    if eps <= 0 or t <= 0:
        raise InvalidArgumentError("eps and t must be positive")
    if n_paths < 1000:
        raise InvalidArgumentError("n_paths must be >= 1000")
    dt = min(1e-3, eps / 10) if dt is None else float(dt)
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    sizes = [min(chunk_size, n_paths - i) for i in range(0, n_paths, chunk_size)]
    jobs = [(fld, x, t, eps, v, n, steps, dt, int(seed), i) for i, n in enumerate(sizes)]
    nthreads = _thread_count(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(lambda a: _mc_chunk(*a), jobs))
    else:
        parts = [_mc_chunk(*a) for a in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / max(n_paths - 1, 1)
    return MCResult(float(mean), float(math.sqrt(var / n_paths)), int(n_paths), float(dt), steps, int(seed))


def decay_margin(estimate: float, vbar: float, t: float, lam: float, action: float, eps: float) -> float:
    """log C_t needed for v(x) / vbar <= C_t exp(t lam - I_t(x) / 2 eps).

    v(x) is recovered from the Monte Carlo estimate as exp(t lam) * estimate,
    so the margin reduces to log(estimate / vbar) + I_t(x) / (2 eps).
    """
    if estimate <= 0 or vbar <= 0:
        return float("-inf")
    return float(math.log(estimate / vbar) + t * lam - (t * lam - action / (2 * eps)))
