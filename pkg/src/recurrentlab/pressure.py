"""Lyapunov data, component pressures and support selection.

Two sign conventions are exposed:

* ``stable``:   R - tr(B_s)
* ``unstable``: R - tr(B_u)

where R is the mean killing rate on the component.  The global pressure is
the maximum over components; the support-eligible set keeps the argmax
components of the highest dimension only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import ConstraintError, InvalidArgumentError
from .model import KIND_RANK, RecurrentComponent
from .speclin import HyperbolicSplitting, infinite_gramian, is_positive_definite, weighted_infinite_gramian

__all__ = [
    "LyapunovData",
    "PressureReport",
    "build_lyapunov",
    "lyapunov_for",
    "component_pressure",
    "global_pressure",
    "CONVENTIONS",
    "TIE_TOL",
]

CONVENTIONS = ("stable", "unstable")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class LyapunovData:
    """Quadratic Lyapunov blocks in the splitting basis.

    ``A = diag(A_s, A_u)``; ``psi2 = (B^T A + A B - 2 A^2) / 2`` with
    ``B = diag(B_s, B_u)``.  ``M_s`` is the unweighted stable Gramian.
    """

    A_s: NDArray
    A_u: NDArray
    A: NDArray
    psi2: NDArray
    pi_s: NDArray
    pi_u: NDArray
    M_s: NDArray
    split: HyperbolicSplitting

    @property
    def stable_decay_form(self) -> NDArray:
        """M_s^{-1}/4 + A_s/2."""
        if not self.A_s.size:
            return np.zeros((0, 0))
        return 0.25 * np.linalg.inv(self.M_s) + 0.5 * self.A_s

    def ambient(self, X: NDArray) -> NDArray:
        """Express a block-basis matrix in the component's transverse coordinates."""
        V = self.split.basis
        return V @ X @ V.T


def build_lyapunov(split: HyperbolicSplitting, pi_s, pi_u) -> LyapunovData:
    ms, mu = split.stable_dim, split.unstable_dim
    Ps = np.asarray(pi_s, dtype=float).reshape(ms, ms)
    Pu = np.asarray(pi_u, dtype=float).reshape(mu, mu)
    A_s = weighted_infinite_gramian(split.stable_block, Ps, "stable") if ms else np.zeros((0, 0))
    A_u = weighted_infinite_gramian(split.unstable_block, Pu, "unstable") if mu else np.zeros((0, 0))
    M_s = infinite_gramian(split.stable_block) if ms else np.zeros((0, 0))
    A = sla.block_diag(A_s, A_u) if ms + mu else np.zeros((0, 0))
    B = split.block_matrix()
    psi2 = 0.5 * (B.T @ A + A @ B - 2 * A @ A)
    psi2 = 0.5 * (psi2 + psi2.T)
    data = LyapunovData(A_s, A_u, A, psi2, Ps, Pu, M_s, split)
    if ms and not np.all(np.linalg.eigvalsh(A_s) < 0):
        raise ConstraintError("A_s is not negative definite")
    if mu and not np.all(np.linalg.eigvalsh(A_u) > 0):
        raise ConstraintError("A_u is not positive definite")
    if not is_positive_definite(psi2):
        raise ConstraintError("psi2 is not positive definite; this indicates a construction bug")
    if ms and not is_positive_definite(data.stable_decay_form):
        raise ConstraintError("M_s^{-1}/4 + A_s/2 is not positive definite")
    return data


def lyapunov_for(comp: RecurrentComponent) -> LyapunovData:
    return build_lyapunov(comp.split, comp.pi_s, comp.pi_u)


def component_pressure(comp: RecurrentComponent, convention: str = "stable") -> float:
    if convention == "stable":
        return comp.mean_killing - comp.split.trace_stable
    if convention == "unstable":
        return comp.mean_killing - comp.split.trace_unstable
    raise InvalidArgumentError(f"convention must be one of {CONVENTIONS}")


@dataclass(frozen=True)
class PressureReport:
    convention: str
    labels: tuple[str, ...]
    kinds: tuple[str, ...]
    values: dict[str, float]
    values_other: dict[str, float]
    pressure: float
    argmax: tuple[str, ...]
    eligible: tuple[str, ...]
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        other = "unstable" if self.convention == "stable" else "stable"
        return [
            {
                "label": lab,
                "kind": kind,
                f"pressure_{self.convention}": self.values[lab],
                f"pressure_{other}": self.values_other[lab],
                "argmax": lab in self.argmax,
                "eligible": lab in self.eligible,
            }
            for lab, kind in zip(self.labels, self.kinds)
        ]


def global_pressure(comps, convention: str = "stable", tie_tol: float = TIE_TOL) -> PressureReport:
    comps = list(comps)
    if not comps:
        raise InvalidArgumentError("global_pressure needs at least one component")
    labels = [c.label for c in comps]
    if len(set(labels)) != len(labels):
        raise InvalidArgumentError("component labels must be unique")
    other = "unstable" if convention == "stable" else "stable"
    vals = {c.label: component_pressure(c, convention) for c in comps}
    vals_other = {c.label: component_pressure(c, other) for c in comps}
    top = max(vals.values())
    argmax = [c for c in comps if top - vals[c.label] <= tie_tol]
    best_rank = max(KIND_RANK[c.kind] for c in argmax)
    eligible = [c.label for c in argmax if KIND_RANK[c.kind] == best_rank]
    return PressureReport(
        convention,
        tuple(labels),
        tuple(c.kind for c in comps),
        vals,
        vals_other,
        float(top),
        tuple(c.label for c in argmax),
        tuple(eligible),
    )
