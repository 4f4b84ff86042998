import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recurrentlab.errors import ConstraintError, HyperbolicityError, InvalidArgumentError, RationalityError
from recurrentlab.model import (
    GOLDEN,
    TrigSeries,
    benchmark_field,
    build_component,
    diophantine_check,
    periodic_delta,
)

BENCHMARKS = ["circle_sink_source", "torus_shear_cycles", "torus_irrational_flow", "torus_gradient_points"]


def fd_grad(f, X, h=1e-6):
    X = np.asarray(X, dtype=float)
    out = []
    for i in range(X.shape[-1]):
        e = np.zeros(X.shape[-1])
        e[i] = h
        out.append((f(X + e) - f(X - e)) / (2 * h))
    return np.stack(out, axis=-1)


class TestTrigSeries:
    def test_from_spec_number(self):
        s = TrigSeries.from_spec(1.5, 2)
        assert s([0.3, 0.7]) == 1.5 and s.mean == 1.5

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            TrigSeries.from_spec({"const": 1.0, "mode": []}, 1)

    def test_samples_roundtrip(self):
        s = TrigSeries.from_spec({"const": 0.2, "modes": [{"n": [1, 2], "cos": 0.5, "sin": -0.3}]}, 2)
        back = TrigSeries.from_samples(s.sample(16))
        X = np.random.default_rng(0).random((10, 2))
        np.testing.assert_allclose(back(X), s(X), atol=1e-13)

    def test_grad_and_laplacian(self):
        s = TrigSeries.from_spec({"modes": [{"n": [1, 0], "cos": 1.0}, {"n": [2, 1], "sin": 0.4}]}, 2)
        X = np.random.default_rng(1).random((6, 2))
        np.testing.assert_allclose(s.grad(X), fd_grad(s, X), atol=1e-7)
        lap = sum(fd_grad(lambda Y: s.grad(Y)[..., i], X)[..., i] for i in range(2))
        np.testing.assert_allclose(s.laplacian(X), lap, atol=1e-5)

    def test_restrict(self):
        s = TrigSeries.from_spec({"modes": [{"n": [1, 1], "cos": 1.0}]}, 2)
        r = s.restrict([0.5, 0.0], [0, 1])
        th = np.linspace(0, 1, 7)
        np.testing.assert_allclose(r(th), s(np.stack([np.full(7, 0.5), th], axis=-1)), atol=1e-14)

    def test_spec_roundtrip(self):
        s = TrigSeries.from_spec({"const": 1.0, "modes": [{"n": [3], "sin": 2.0}]}, 1)
        th = np.linspace(0, 1, 5)
        np.testing.assert_array_equal(TrigSeries.from_spec(s.to_spec(), 1)(th), s(th))


class TestComponents:
    def test_point(self):
        c = build_component("point", [[-2.0]], 0.5, "p")
        assert c.mean_killing == 0.5 and c.split.stable_dim == 1

    def test_cycle_mean(self):
        c = build_component("cycle", [[1.0]], lambda th: 1 + np.cos(2 * np.pi * th / 2.0), "g", period=2.0)
        assert c.mean_killing == pytest.approx(1.0, abs=1e-13)

    def test_cycle_not_periodic(self):
        with pytest.raises(InvalidArgumentError):
            build_component("cycle", [[1.0]], lambda th: th, "g", period=1.0)

    def test_non_hyperbolic_named(self):
        with pytest.raises(HyperbolicityError, match="'bad'"):
            build_component("point", [[0.0]], 0.0, "bad")

    def test_rational_torus(self):
        with pytest.raises(RationalityError, match=r"\(2, -1\)|\(-2, 1\)"):
            build_component("torus", None, 1.0, "t", k=(1.0, 2.0))

    def test_torus_with_B(self):
        with pytest.raises(InvalidArgumentError):
            build_component("torus", [[1.0]], 1.0, "t", k=(1.0, GOLDEN))

    def test_shift(self):
        c = build_component("point", [[-2.0]], 0.5, "p").with_killing_shift(1.0)
        assert c.mean_killing == 1.5


def test_diophantine_golden():
    rep = diophantine_check(1.0, GOLDEN, 32)
    assert rep.passed and rep.min_divisor > 0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_periodic_delta_range(a, b):
    d = periodic_delta(np.array([a - b]))
    assert -0.5 <= d[0] <= 0.5
    assert abs((d[0] - (a - b)) - round(d[0] - (a - b))) < 1e-9


@pytest.mark.parametrize("name", BENCHMARKS)
class TestBenchmarks:
    def test_psi_nonnegative(self, name):
        f = benchmark_field(name)
        assert f.psi(f.grid(64)).min() >= -1e-12

    def test_psi_grad(self, name):
        f = benchmark_field(name)
        X = np.random.default_rng(2).random((8, f.dim))
        np.testing.assert_allclose(f.psi_grad(X), fd_grad(f.psi, X), atol=1e-7)

    def test_lyap_grad(self, name):
        f = benchmark_field(name)
        X = np.random.default_rng(3).random((8, f.dim))
        np.testing.assert_allclose(f.lyap_grad(X), fd_grad(f.lyap, X), atol=1e-8)

    def test_drift_split(self, name):
        f = benchmark_field(name)
        X = np.random.default_rng(4).random((8, f.dim))
        np.testing.assert_allclose(f.omega(X) + f.lyap_grad(X), f.drift(X), atol=1e-14)

    def test_linearization(self, name):
        f = benchmark_field(name)
        for c in f.components:
            if c.kind == "torus":
                continue
            J = f.drift_jac(c.anchor[None])[0]
            np.testing.assert_allclose(c.frame.T @ J @ c.frame, c.transverse_B, atol=1e-12)

    def test_fused_terms(self, name):
        f = benchmark_field(name, {"killing": 0.3} if name != "torus_irrational_flow" else {"killing": 2.0})
        X = np.random.default_rng(5).random((9, f.dim))
        om, V = f.omega_and_potential(X, 0.01)
        np.testing.assert_allclose(om, f.omega(X), atol=1e-14)
        np.testing.assert_allclose(V, f.gauge_potential(X, 0.01), rtol=1e-13)


def test_unknown_benchmark():
    with pytest.raises(InvalidArgumentError):
        benchmark_field("torus_shear")


def test_unknown_param():
    with pytest.raises(InvalidArgumentError):
        benchmark_field("circle_sink_source", {"kiling": 1.0})


def test_weight_bound():
    with pytest.raises(InvalidArgumentError):
        benchmark_field("circle_sink_source", {"pi_stable": 2.0})
