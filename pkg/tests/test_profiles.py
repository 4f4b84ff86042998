import math

import numpy as np
import pytest
import scipy.integrate as si
from hypothesis import given, settings, strategies as st

from recurrentlab.errors import ConstraintError, InvalidArgumentError, RationalityError, SmallDivisorError
from recurrentlab.model import GOLDEN, TrigSeries, benchmark_field, build_component
from recurrentlab.pressure import global_pressure, lyapunov_for
from recurrentlab.profiles import (
    assemble_limit_measure,
    blowup_profile,
    cycle_density,
    gaussian_mass,
    profile_discrete_residual,
    profile_operator_ratio,
    torus_density,
)


class TestCycleDensity:
    def test_cosine_closed_form(self):
        d = cycle_density(lambda th: np.cos(2 * np.pi * th), 1.0, 256)
        ref = np.exp(-np.sin(2 * np.pi * d.theta) / (2 * np.pi))
        np.testing.assert_allclose(d.f, ref / ref.max(), rtol=1e-13)

    def test_against_quadrature(self):
        # independent oracle: f(theta) = exp(-int_0^theta (c - <c>))
        c = lambda s: 1.0 + 0.4 * np.sin(2 * np.pi * s / 3.0) + 0.2 * np.cos(4 * np.pi * s / 3.0)
        d = cycle_density(c, 3.0, 128)
        vals = np.array([si.quad(lambda s: c(s) - 1.0, 0.0, th, epsabs=1e-14)[0] for th in d.theta])
        ref = np.exp(-vals)
        np.testing.assert_allclose(d.f, ref / ref.max(), rtol=1e-11)
        assert d.mean == pytest.approx(1.0, abs=1e-14)

    def test_constant(self):
        d = cycle_density(lambda th: 0 * th + 2.0, 1.0, 32)
        np.testing.assert_array_equal(d.f, np.ones(32))

    def test_samples_with_endpoint(self):
        th = np.linspace(0, 1, 65)
        d = cycle_density(np.cos(2 * np.pi * th), 1.0, 64)
        assert d.residual < 1e-10

    def test_interpolant(self):
        d = cycle_density(lambda th: np.cos(2 * np.pi * th), 1.0, 64)
        np.testing.assert_allclose(d(d.theta), d.f, rtol=1e-13)
        assert d(0.0) == pytest.approx(d(1.0), abs=1e-15)


class TestTorusDensity:
    def test_single_mode_closed_form(self):
        c = TrigSeries.from_spec({"const": 2.0, "modes": [{"n": [1, 0], "cos": 1.0}]}, 2)
        d = torus_density(c, 1.0, GOLDEN, 16)
        th = np.arange(d.N) / d.N
        ref = np.exp(-np.sin(2 * np.pi * th) / (2 * np.pi))[:, None] * np.ones(d.N)
        np.testing.assert_allclose(d.f, ref / ref.max(), rtol=1e-13)
        assert d.mu == 2.0

    def test_small_divisor_names_mode(self):
        c = TrigSeries.from_spec({"modes": [{"n": [2, -1], "cos": 1.0}]}, 2)
        with pytest.raises((SmallDivisorError, RationalityError)):
            torus_density(c, 1.0, 2.0, 4)

    def test_not_hermitian(self):
        T = np.zeros((9, 9), dtype=complex)
        T[5, 4] = 1j
        with pytest.raises(InvalidArgumentError):
            torus_density(T, 1.0, GOLDEN, 4)


@pytest.mark.parametrize(
    "B",
    [[[-2.0]], [[3.0]], [[-1.0, 0.0], [0.0, 2.0]], [[-1.0, 0.5], [-0.5, -2.0]], [[1.0, 0.3], [0.0, 2.5]]],
)
def test_profile_ratio_constant(B):
    comp = build_component("point", B, 0.7, "p")
    L = lyapunov_for(comp)
    prof = blowup_profile(comp, L)
    x = np.random.default_rng(0).standard_normal((10, comp.transverse_dim))
    ratio = profile_operator_ratio(prof, L, x)
    np.testing.assert_allclose(ratio, 0.7 - comp.split.trace_stable, atol=1e-12)


def test_unstable_point_example():
    # B=[2], Pi_u=[4]: A_u=1, S=0.5, eigenvalue c
    comp = build_component("point", [[2.0]], 0.3, "p")
    prof = blowup_profile(comp)
    assert prof.S[0, 0] == pytest.approx(0.5)
    assert prof.eigenvalue == pytest.approx(0.3)


def test_discrete_residual_second_order():
    comp = build_component("point", [[-1.0, 0.0], [0.0, 2.0]], 0.1, "p")
    L = lyapunov_for(comp)
    prof = blowup_profile(comp, L)
    r = [profile_discrete_residual(prof, L, h)[0] for h in (0.2, 0.1, 0.05)]
    orders = np.log2(np.array(r[:-1]) / np.array(r[1:]))
    assert np.all(orders > 1.8)


def test_gaussian_mass():
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    val, _ = si.dblquad(lambda y, x: math.exp(-(2 * x * x + 0.6 * x * y + y * y)), -8, 8, -8, 8)
    assert gaussian_mass(S) == pytest.approx(val, rel=1e-9)
    with pytest.raises(ConstraintError):
        gaussian_mass(-np.eye(2))


def test_limit_measure_mixed_kinds():
    p = build_component("point", [[-1.0]], 0.5, "p")
    g = build_component("cycle", [[2.0]], 1.5, "g")
    with pytest.raises(ConstraintError):
        assemble_limit_measure([p, g], [1.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=4))
def test_limit_measure_normalized(gammas):
    comps = [build_component("point", [[-1.0 - i]], 0.0, f"p{i}") for i in range(len(gammas))]
    lm = assemble_limit_measure(comps, gammas)
    assert abs(lm.total() - 1.0) <= 1e-12
    assert lm.support_ok()


def test_limit_measure_integrate():
    f = benchmark_field("torus_shear_cycles")
    rep = global_pressure(f.components)
    elig = [c for c in f.components if c.label in rep.eligible]
    lm = assemble_limit_measure(elig, {c.label: 1.0 for c in elig})
    assert lm.integrate(lambda X: np.ones(X.shape[:-1])) == pytest.approx(1.0)
