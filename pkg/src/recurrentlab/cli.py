"""Command-line driver: ``recurrentlab <command> --config run.yaml``.

Exit codes: 0 success, 1 task failure (partial artifacts are kept),
2 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import difflib
import hashlib
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
import yaml

from . import __version__
from .eigensolver import (
    blowup_extract,
    convergence_study,
    default_n_rule,
    discretize,
    extrapolate_limit,
    gauge_residual,
    leading_eigenpair,
    weighted_measure,
)
from .errors import ConfigError, LabError
from .model import CATALOG, FieldModel, benchmark_field, build_component
from .oukernel import asymptotics_suite, semigroup_deviation
from .pressure import global_pressure, lyapunov_for
from .profiles import assemble_limit_measure, blowup_profile
from .ratefn import LinearQuadraticModel, action_minimize, decay_margin, extremal_shoot, feynman_kac_mc

log = logging.getLogger("recurrentlab")

COMMANDS = ("pressure", "profile", "eigen", "study", "rate", "mc", "ou", "discriminate", "check")
THREADS_ENV = "RECURRENTLAB_THREADS"

DISCRIMINATE_BENCHMARKS = [
    {"name": "circle_sink_source", "params": {"killing": {"const": 0.3, "modes": [{"n": [1], "cos": 0.5}]}}},
    {"name": "torus_shear_cycles", "params": {"killing": {"modes": [{"n": [1, 0], "cos": 0.5}]}}},
    {"name": "torus_gradient_points",
     "params": {"killing": {"modes": [{"n": [1, 0], "cos": 0.5}, {"n": [0, 1], "cos": 0.25}]}}},
]

DEFAULTS: dict[str, Any] = {
    "field": {"name": None, "params": {}, "components": None},
    "output": {"dir": "out"},
    "seed": 0,
    "pressure": {"convention": "stable", "tie_tol": 1e-12},
    "profile": {"N": 256, "M": 64},
    "eigen": {"epsilon": 1e-3, "N": 128, "scheme": "auto", "tol": 1e-10, "tube_factor": 10.0},
    "study": {"epsilons": [1e-2, 3e-3, 1e-3], "N": None, "scale": 16.0, "cap": 1024,
              "scheme": "auto", "tube_factor": 10.0},
    "rate": {"T": 0.2, "points": [], "dt": 1e-3, "segments": 512, "tol": 1e-10},
    "mc": {"epsilon": 0.05, "t": 0.5, "n_paths": 100000, "N": 2048, "points": [], "action": True},
    "ou": {"t_small": 1e-3, "t_large": 50.0, "times": [0.1, 1.0, 5.0], "degree": 80},
    "discriminate": {"benchmarks": DISCRIMINATE_BENCHMARKS, "epsilons": [1e-2, 3e-3, 1e-3],
                     "tolerance": 0.1, "cap": 256},
}
_COMPONENT_KEYS = {"kind", "label", "B", "c", "period", "k", "pi_stable", "pi_unstable", "anchor", "frame", "tangent"}
_BENCH_KEYS = {"name", "params", "N"}


def _reject_unknown(given: dict, allowed, path: str) -> None:
    for key in given:
        if key not in allowed:
            hint = difflib.get_close_matches(str(key), [str(a) for a in allowed], n=1)
            msg = f"unknown key '{path}{key}'"
            if hint:
                msg += f"; did you mean '{hint[0]}'?"
            raise ConfigError(msg)


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    """Overlay ``given`` on ``defaults``; sections merge one level deep."""
    _reject_unknown(given, defaults, path)
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if not path and isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{key}' must be a mapping")
            out[key] = _merge(defaults[key], val, f"{key}.")
        else:
            out[key] = val
    return out


def _positive(value, path):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}' must be a number") from None
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"'{path}' must be positive")
    return v


@dataclass
class RunConfig:
    data: dict

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    def section(self, name: str) -> dict:
        return self.data[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    def has_field(self) -> bool:
        f = self.data["field"]
        return bool(f.get("name") or f.get("components"))

    def field_model(self) -> FieldModel:
        f = self.data["field"]
        if not f.get("name"):
            raise ConfigError("this command needs a catalog field ('field.name')")
        return benchmark_field(f["name"], f.get("params") or {})

    def components(self):
        f = self.data["field"]
        if f.get("components"):
            return [_component_from(c, i) for i, c in enumerate(f["components"])]
        return list(self.field_model().components)


def _component_from(spec: dict, i: int):
    path = f"field.components[{i}]."
    if not isinstance(spec, dict):
        raise ConfigError(f"'{path[:-1]}' must be a mapping")
    _reject_unknown(spec, _COMPONENT_KEYS, path)
    label = spec.get("label", f"{spec.get('kind', 'component')}_{i}")
    try:
        return build_component(
            spec.get("kind", "point"),
            spec.get("B"),
            spec.get("c", 0.0),
            label,
            period=float(spec.get("period", 1.0)),
            k=spec.get("k"),
            pi_s=spec.get("pi_stable"),
            pi_u=spec.get("pi_unstable"),
            anchor=spec.get("anchor"),
            frame=spec.get("frame"),
            tangent=spec.get("tangent"),
        )
    except (LabError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid component {label!r}: {exc}") from exc


def validate(data: dict) -> RunConfig:
    cfg = RunConfig(data)
    f = data["field"]
    if f.get("name") is not None:
        if f["name"] not in CATALOG:
            hint = difflib.get_close_matches(str(f["name"]), list(CATALOG), n=1)
            raise ConfigError(f"unknown field 'field.name={f['name']}'" + (f"; did you mean '{hint[0]}'?" if hint else ""))
        if not isinstance(f.get("params") or {}, dict):
            raise ConfigError("'field.params' must be a mapping")
        try:
            cfg.field_model()
        except LabError as exc:
            raise ConfigError(f"field.params: {exc}") from exc
    if f.get("components") is not None:
        if not isinstance(f["components"], list) or not f["components"]:
            raise ConfigError("'field.components' must be a nonempty list")
        labels = [c.label for c in cfg.components()]
        if len(set(labels)) != len(labels):
            raise ConfigError("component labels must be unique")
    if data["pressure"]["convention"] not in ("stable", "unstable"):
        raise ConfigError("'pressure.convention' must be 'stable' or 'unstable'")
    _positive(data["eigen"]["epsilon"], "eigen.epsilon")
    eps = [_positive(e, f"study.epsilons[{i}]") for i, e in enumerate(data["study"]["epsilons"])]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("'study.epsilons' must be strictly decreasing")
    _positive(data["rate"]["T"], "rate.T")
    _positive(data["mc"]["epsilon"], "mc.epsilon")
    _positive(data["mc"]["t"], "mc.t")
    if int(data["mc"]["n_paths"]) < 1000:
        raise ConfigError("'mc.n_paths' must be >= 1000")
    if not isinstance(data["seed"], int) or data["seed"] < 0:
        raise ConfigError("'seed' must be a non-negative integer")
    for i, b in enumerate(data["discriminate"]["benchmarks"]):
        _reject_unknown(b, _BENCH_KEYS, f"discriminate.benchmarks[{i}].")
        if b.get("name") not in CATALOG:
            raise ConfigError(f"'discriminate.benchmarks[{i}].name' is not a catalog field")
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    return validate(_merge(DEFAULTS, raw))


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return validate(copy.deepcopy(DEFAULTS))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in np.ravel(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


class Writer:
    """Collects artifacts in the output directory and writes the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, rows: list[dict], columns: list[str] | None = None) -> Path:
        columns = columns or (list(rows[0]) if rows else [])
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c, "")) for c in columns])
        self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        path = self.out / name
        path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        self.files.append(name)
        return path

    def manifest(self, command: str, cfg: RunConfig, threads: int, status: int) -> Path:
        entries = []
        for name in sorted(set(self.files)):
            data = (self.out / name).read_bytes()
            entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        man = {
            "command": command,
            "status": status,
            "seed": cfg.seed,
            "threads": threads,
            "config": cfg.to_dict(),
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pyyaml": yaml.__version__,
                "recurrentlab": __version__,
            },
            "files": entries,
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")
        return path


class TaskFailure(Exception):
    """A task ran but some of its items failed; artifacts are still written."""


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_pressure(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("pressure")
    rep = global_pressure(cfg.components(), sec["convention"], float(sec["tie_tol"]))
    other = "unstable" if rep.convention == "stable" else "stable"
    cols = ["label", "kind", f"pressure_{rep.convention}", f"pressure_{other}", "argmax", "eligible"]
    w.csv("pressure.csv", rep.rows(), cols)
    w.json("pressure.json", {"convention": rep.convention, "pressure": rep.pressure,
                             "argmax": rep.argmax, "eligible": rep.eligible})


def run_profile(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("profile")
    comps = cfg.components()
    rows, profiles = [], {}
    for c in comps:
        prof = blowup_profile(c, N=int(sec["N"]), M=int(sec["M"]))
        profiles[c.label] = prof
        rows.append({
            "label": c.label, "kind": c.kind, "eigenvalue": prof.eigenvalue,
            "S": prof.S_coords, "transverse_mass": prof.transverse_mass(2),
            "longitudinal_mass": prof.longitudinal_mass(),
            "density_residual": getattr(prof.density, "residual", 0.0),
        })
        if c.kind == "cycle":
            d = prof.density
            w.csv(f"density_{c.label}.csv", [{"theta": t, "f": f} for t, f in zip(d.theta, d.f)])
    w.csv("profiles.csv", rows)
    rep = global_pressure(comps, cfg.section("pressure")["convention"])
    elig = [c for c in comps if c.label in rep.eligible]
    lm = assemble_limit_measure(elig, {c.label: 1.0 for c in elig}, profiles)
    w.csv("limit_measure.csv", [{"label": a.component.label, "coefficient": a.name, "weight": a.weight}
                                for a in lm.atoms])


def _eigen_shape(fld: FieldModel, N):
    return fld.grid_shape(N if isinstance(N, int) else list(N))


def run_eigen(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("eigen")
    fld = cfg.field_model()
    eps = float(sec["epsilon"])
    op = discretize(fld, eps, _eigen_shape(fld, sec["N"]), scheme=sec["scheme"])
    pair = leading_eigenpair(op, tol=float(sec["tol"]))
    meas = weighted_measure(pair, fld)
    X = fld.grid(pair.shape).reshape(-1, fld.dim)
    cols = [f"x{i}" for i in range(fld.dim)]
    rows = [dict(zip(cols, x)) | {"u": u, "log_v": lv, "weight": m}
            for x, u, lv, m in zip(X, pair.u.ravel(), meas.log_v.ravel(), meas.weights.ravel())]
    w.csv("eigenfunction.csv", rows, cols + ["u", "log_v", "weight"])
    blow = []
    for c in fld.components:
        b = blowup_extract(pair, fld, c, meas, tube_factor=float(sec["tube_factor"]))
        blow.append({"label": c.label, "charged": b.charged, "gamma": b.gamma, "rel_l2": b.rel_l2,
                     "covariance_ratio": b.covariance_ratio, "notice": b.notice})
    w.csv("blowup.csv", blow, ["label", "charged", "gamma", "rel_l2", "covariance_ratio", "notice"])
    w.json("eigen.json", {"lambda": pair.lam, "residual": pair.residual, "iterations": pair.iterations,
                          "shift": pair.shift, "scheme": op.scheme, "peclet": op.peclet,
                          "shape": list(pair.shape), "epsilon": eps, "log_vbar": meas.log_vbar,
                          "gauge_residual": gauge_residual(pair, fld, meas)})


def run_study(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("study")
    fld = cfg.field_model()
    eps = [float(e) for e in sec["epsilons"]]
    if sec["N"] is None:
        rule = lambda e: default_n_rule(e, fld.dim, float(sec["scale"]), int(sec["cap"]))  # noqa: E731
    else:
        shapes = dict(zip(eps, sec["N"]))
        rule = lambda e: shapes[e]  # noqa: E731
    st = convergence_study(fld, eps, rule, scheme=sec["scheme"], tube_factor=float(sec["tube_factor"]),
                           threads=threads)
    w.csv("study.csv", st.table(), st.columns)
    w.json("study.json", {"field": st.field_name, "slope": st.slope, "lambda_differences": st.lam_diffs,
                          "shapes": [list(r.shape) for r in st.rows], "schemes": [r.scheme for r in st.rows],
                          "argmax": [r.argmax for r in st.rows]})


def run_rate(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("rate")
    fld = cfg.field_model()
    T = float(sec["T"])
    pts = sec["points"] or [list(c.anchor + 0.05 * c.frame[:, 0]) for c in fld.components if c.anchor is not None]
    rows, failed = [], 0
    for x in pts:
        row = {"x": x, "t": T}
        try:
            r = extremal_shoot(fld, x, T, dt=float(sec["dt"]), tol=float(sec["tol"]))
            m = action_minimize(fld, x, T, N=int(sec["segments"]))
            row |= {"I_shoot": r.action, "I_min": m.action, "boundary_residual": r.boundary_residual,
                    "energy_drift": r.energy_drift, "certified": m.certified, "status": "ok"}
        except LabError as exc:
            failed += 1
            row |= {"status": f"failed: {exc}"}
        rows.append(row)
    w.csv("rate.csv", rows, ["x", "t", "I_shoot", "I_min", "boundary_residual", "energy_drift", "certified", "status"])
    if failed:
        raise TaskFailure(f"{failed} rate queries failed")


def run_mc(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("mc")
    fld = cfg.field_model()
    eps, t = float(sec["epsilon"]), float(sec["t"])
    pair = leading_eigenpair(discretize(fld, eps, _eigen_shape(fld, sec["N"])))
    meas = weighted_measure(pair, fld)
    pts = sec["points"] or [list(np.full(fld.dim, s)) for s in (0.0, 0.1, 0.25, 0.4, 0.7)]
    rows = []
    for x in pts:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        res = feynman_kac_mc(fld, x, t, eps, int(sec["n_paths"]), seed=cfg.seed, v=meas.v_at, threads=threads)
        ref = math.exp(-pair.lam * t) * float(meas.v_at(x[None])[0])
        I = float("nan")
        if sec["action"] and t <= 0.5:
            try:
                I = extremal_shoot(fld, x, t).action
            except LabError as exc:
                log.warning("action at %s unavailable: %s", x, exc)
        margin = decay_margin(res.estimate, meas.vbar, t, pair.lam, I, eps) if math.isfinite(I) else float("nan")
        rows.append({"x": x, "t": t, "epsilon": eps, "I_t": I, "estimate": res.estimate, "SE": res.std_error,
                     "reference": ref, "z_score": (res.estimate - ref) / res.std_error if res.std_error else 0.0,
                     "bound_margin": margin})
    w.csv("mc.csv", rows, ["x", "t", "epsilon", "I_t", "estimate", "SE", "reference", "z_score", "bound_margin"])
    w.json("mc.json", {"lambda": pair.lam, "log_vbar": meas.log_vbar, "n_paths": int(sec["n_paths"]),
                       "seed": cfg.seed})


def run_ou(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("ou")
    rows, semi = [], []
    for c in cfg.components():
        if c.transverse_dim == 0:
            continue
        lyap = lyapunov_for(c)
        rep = asymptotics_suite(c.split, lyap, float(sec["t_small"]), float(sec["t_large"]))
        rows += [{"label": c.label} | r for r in rep.to_rows()]
        for t in sec["times"]:
            semi.append({"label": c.label, "t": float(t),
                         "deviation": semigroup_deviation(c.split, lyap, float(t), degree=int(sec["degree"]))})
    w.csv("ou_asymptotics.csv", rows)
    w.csv("ou_semigroup.csv", semi, ["label", "t", "deviation"])
    bad = [r for r in rows if not r["passed"]]
    if bad:
        raise TaskFailure(f"{len(bad)} asymptotic items failed")


def _bench_shape(fld: FieldModel, eps: float, cap: int, override=None):
    if override is not None:
        return fld.grid_shape(override)
    n = default_n_rule(eps, 1, cap=cap)[0]
    return fld.grid_shape(n)


def discriminate(benchmarks, epsilons, tolerance: float = 0.1, cap: int = 256) -> list[dict]:
    """Extrapolate lambda_eps to eps = 0 and compare with both pressure conventions."""
    out = []
    for b in benchmarks:
        fld = benchmark_field(b["name"], b.get("params") or {})
        overrides = b.get("N")
        lams = []
        for i, e in enumerate(epsilons):
            shape = _bench_shape(fld, e, cap, overrides[i] if overrides else None)
            lams.append(leading_eigenpair(discretize(fld, e, shape)).lam)
        lim = extrapolate_limit(epsilons, lams)
        ps = global_pressure(fld.components, "stable").pressure
        pu = global_pressure(fld.components, "unstable").pressure
        ms = min(c.mean_killing - c.split.trace_stable for c in fld.components)
        hit_s, hit_u = abs(lim - ps) <= tolerance, abs(lim - pu) <= tolerance
        verdict = "both" if hit_s and hit_u else "stable" if hit_s else "unstable" if hit_u else "neither"
        out.append({"benchmark": b["name"], "lambda_extrapolated": lim, "pressure_stable": ps,
                    "pressure_unstable": pu, "verdict": verdict, "min_stable": ms,
                    "min_stable_match": abs(lim - ms) <= tolerance,
                    "lambdas": lams, "epsilons": list(epsilons)})
    return out


def run_discriminate(cfg: RunConfig, w: Writer, threads: int) -> None:
    sec = cfg.section("discriminate")
    rows = discriminate(sec["benchmarks"], [float(e) for e in sec["epsilons"]], float(sec["tolerance"]), int(sec["cap"]))
    w.csv("discriminate.csv", rows, ["benchmark", "lambda_extrapolated", "pressure_stable", "pressure_unstable",
                                     "verdict", "min_stable", "min_stable_match"])
    w.json("discriminate.json", {"tolerance": float(sec["tolerance"]), "rows": rows})


def property_checks(seed: int = 0) -> list[dict]:
    """Fast internal property suite; each row has name, value, tolerance, passed."""
    from .profiles import cycle_density, torus_density, profile_operator_ratio
    from .model import TrigSeries, GOLDEN
    from .speclin import infinite_gramian

    rows = []

    def add(name, value, tol, ok=None):
        rows.append({"name": name, "value": float(value), "tolerance": float(tol),
                     "passed": bool(value <= tol) if ok is None else bool(ok)})

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 5))
        B = rng.standard_normal((m, m))
        B -= (np.max(np.linalg.eigvals(B).real) + 0.5) * np.eye(m)
        M = infinite_gramian(B)
        worst = max(worst, np.linalg.norm(B @ M + M @ B.T + np.eye(m)) / np.linalg.norm(M))
    add("gramian_identity", worst, 1e-10)

    comp = build_component("point", [[-1.0, 0.0], [0.0, 2.0]], 0.5, "p")
    lyap = lyapunov_for(comp)
    rep = asymptotics_suite(comp.split, lyap)
    add("ou_asymptotics_failures", len(rep.failures()), 0)
    add("semigroup_identity_t1", semigroup_deviation(comp.split, lyap, 1.0), 1e-6)
    prof = blowup_profile(comp, lyap)
    ratio = profile_operator_ratio(prof, lyap, rng.standard_normal((8, 2)))
    add("profile_eigenvalue", float(np.max(np.abs(ratio - (0.5 - comp.split.trace_stable)))), 1e-8)

    cyc = cycle_density(lambda th: np.cos(2 * np.pi * th), 1.0, 1024)
    add("cycle_density_residual", cyc.residual, 1e-10)
    tor = torus_density(TrigSeries.from_spec({"const": 2.0, "modes": [{"n": [1, 0], "cos": 1.0}]}, 2), 1.0, GOLDEN, 64)
    add("torus_density_residual", tor.residual, 1e-8)

    f0 = benchmark_field("circle_sink_source", {"killing": 1.25})
    lam = leading_eigenpair(discretize(f0, 0.05, 64)).lam
    add("eigen_constant_killing", abs(lam - 1.25), 1e-12)

    lq = LinearQuadraticModel([[1.0]], [[0.25]])
    s = extremal_shoot(lq, [1.0], 0.5)
    mn = action_minimize(lq, [1.0], 0.5)
    add("shoot_vs_minimize", abs(s.action - mn.action) / s.action, 1e-4)
    add("hamiltonian_drift", s.energy_drift, 1e-8 * 0.5)

    zero = LinearQuadraticModel([[0.0]], [[0.0]])
    mc = feynman_kac_mc(zero, [0.3], 0.1, 0.1, 1000, seed=seed)
    add("mc_trivial", abs(mc.estimate - 1.0) + mc.std_error, 0.0)

    comps = list(benchmark_field("torus_gradient_points").components)
    rep = global_pressure(comps)
    elig = [c for c in comps if c.label in rep.eligible]
    lm = assemble_limit_measure(elig, {c.label: 1.0 for c in elig})
    add("limit_measure_total", abs(lm.total() - 1.0), 1e-12, lm.support_ok() and abs(lm.total() - 1) <= 1e-12)
    return rows


def run_check(cfg: RunConfig, w: Writer, threads: int) -> None:
    rows = property_checks(cfg.seed)
    w.csv("check.csv", rows, ["name", "value", "tolerance", "passed"])
    bad = [r["name"] for r in rows if not r["passed"]]
    if bad:
        raise TaskFailure(f"checks failed: {', '.join(bad)}")


RUNNERS: dict[str, Callable[[RunConfig, Writer, int], None]] = {
    "pressure": run_pressure,
    "profile": run_profile,
    "eigen": run_eigen,
    "study": run_study,
    "rate": run_rate,
    "mc": run_mc,
    "ou": run_ou,
    "discriminate": run_discriminate,
    "check": run_check,
}


def dispatch(cfg: RunConfig, command: str, threads: int = 1) -> int:
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    w = Writer(cfg.output_dir)
    status = 0
    try:
        RUNNERS[command](cfg, w, threads)
    except ConfigError:
        raise
    except (TaskFailure, LabError) as exc:
        log.error("%s: %s", command, exc)
        status = 1
    w.manifest(command, cfg, threads, status)
    return status


def _thread_count(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recurrentlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.data["output"]["dir"] = args.out
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.data["seed"] = args.seed
        threads = _thread_count(args.threads)
        os.environ[THREADS_ENV] = str(threads)
        if args.command not in ("check", "discriminate", "pressure", "profile", "ou") and not cfg.has_field():
            raise ConfigError(f"'{args.command}' needs a 'field' section")
        if args.command in ("pressure", "profile", "ou") and not cfg.has_field():
            raise ConfigError(f"'{args.command}' needs 'field.name' or 'field.components'")
        return dispatch(cfg, args.command, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
