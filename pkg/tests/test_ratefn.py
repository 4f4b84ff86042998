import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from hypothesis import given, settings, strategies as st

from recurrentlab.errors import InvalidArgumentError
from recurrentlab.model import benchmark_field
from recurrentlab.ratefn import (
    LinearQuadraticModel,
    action_minimize,
    decay_margin,
    extremal_shoot,
    feynman_kac_mc,
    hamiltonian,
    hamiltonian_flow,
    quadratic_bound_fit,
)


def riccati_action(model, x, T):
    # oracle: for linear extremals p(T) = 0 fixes p0 through the flow matrix,
    # and I = -<p0, x>/2 for a quadratic value function
    d = model.dim
    E = sla.expm(model.linear_hamiltonian() * T)
    Exx, Exp, Epx, Epp = E[:d, :d], E[:d, d:], E[d:, :d], E[d:, d:]
    p0 = -np.linalg.solve(Epp, Epx @ x)
    return -0.5 * float(p0 @ x), p0


ONE_D = LinearQuadraticModel([[1.0]], [[0.25]])
TWO_D = LinearQuadraticModel([[1.0, 0.5], [-0.3, -0.8]], [[0.4, 0.1], [0.1, 0.2]])


def test_hamiltonian_examples():
    m = LinearQuadraticModel([[-1.0]], [[0.3]])
    x, p = np.array([0.7]), np.array([-0.4])
    assert hamiltonian(m, x, p) == pytest.approx(0.7 * -0.4 + 0.5 * 0.16 - 0.3 * 0.49)
    assert hamiltonian(m, x, np.zeros(1)) == pytest.approx(-m.psi(x))


def test_flow_matches_matrix_exponential():
    z0 = np.array([0.6, -0.2, 0.1, 0.3])
    tr = hamiltonian_flow(TWO_D, z0, 0.8, dt=1e-2)
    ref = sla.expm(TWO_D.linear_hamiltonian() * 0.8) @ z0
    np.testing.assert_allclose(tr.z[-1], ref, rtol=1e-11, atol=1e-13)


def test_energy_drift():
    tr = hamiltonian_flow(ONE_D, [1.0, 0.3], 1.0, dt=1e-3)
    assert tr.energy_drift <= 1e-8


def test_cycle_is_invariant_with_zero_momentum():
    f = benchmark_field("torus_shear_cycles")
    tr = hamiltonian_flow(f, [0.5, 0.2, 0.0, 0.0], 0.1, dt=1e-2)
    np.testing.assert_allclose(tr.x[:, 0], 0.5, atol=1e-14)
    np.testing.assert_allclose(tr.p, 0.0, atol=1e-14)


@pytest.mark.parametrize("model,x,T", [(ONE_D, [1.0], 0.5), (TWO_D, [0.7, -0.4], 0.4), (TWO_D, [-0.2, 0.9], 0.1)])
def test_shoot_against_riccati(model, x, T):
    ref, p0 = riccati_action(model, np.array(x), T)
    r = extremal_shoot(model, x, T)
    assert r.action == pytest.approx(ref, rel=1e-9)
    np.testing.assert_allclose(r.p0, p0, atol=1e-9)
    assert r.boundary_residual <= 1e-8
    assert r.endpoint_velocity_residual <= 1e-8


@pytest.mark.parametrize("model,x,T", [(ONE_D, [1.0], 0.5), (TWO_D, [0.7, -0.4], 0.4)])
def test_minimize_against_shoot(model, x, T):
    r = extremal_shoot(model, x, T)
    m = action_minimize(model, x, T, N=512)
    assert m.certified
    assert abs(m.action - r.action) / r.action <= 1e-4


def test_recurrent_point_zero_action():
    f = benchmark_field("circle_sink_source")
    r = extremal_shoot(f, [0.5], 0.3)
    assert r.action == pytest.approx(0.0, abs=1e-14)
    assert action_minimize(f, [0.5], 0.3, N=64).action <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.05, 0.5))
def test_constant_path_bound(x, T):
    f = benchmark_field("circle_sink_source")
    m = action_minimize(f, [x], T, N=64)
    om = f.omega(np.array([[x]]))[0, 0]
    bound = T * f.psi(np.array([[x]]))[0] + 0.5 * T * om * om
    assert m.action <= bound + 1e-12
    assert m.action >= 0


def test_time_bound_refused():
    with pytest.raises(InvalidArgumentError):
        extremal_shoot(ONE_D, [1.0], 0.6)


def test_quadratic_scaling():
    f = benchmark_field("torus_shear_cycles")
    comp = f.component("unstable_cycle")
    res = quadratic_bound_fit(f, comp, 0.2, [[0.0], [0.02], [0.01]], dt=2e-3)
    assert len(res.ratios) == 2  # x' = 0 skipped
    assert res.actions[1] / res.actions[0] == pytest.approx(0.25, rel=0.02)
    assert res.min_ratio > 0


def test_mc_trivial_exact():
    zero = LinearQuadraticModel([[0.0]], [[0.0]])
    r = feynman_kac_mc(zero, [0.2], 0.3, 0.1, 2000, seed=3, v=lambda X: np.ones(len(X)))
    assert r.estimate == 1.0 and r.std_error == 0.0


def test_mc_determinism_across_threads():
    f = benchmark_field("circle_sink_source")
    a = feynman_kac_mc(f, [0.2], 0.05, 0.05, 20000, seed=11, threads=1)
    b = feynman_kac_mc(f, [0.2], 0.05, 0.05, 20000, seed=11, threads=3)
    c = feynman_kac_mc(f, [0.2], 0.05, 0.05, 20000, seed=12, threads=1)
    assert a.estimate == b.estimate and a.std_error == b.std_error
    assert a.estimate != c.estimate


def test_mc_ou_killing_oracle():
    # u = E exp(-int a X^2 / eps) for dX = -X dt + sqrt(2 eps) dW is exp(-alpha x^2 - beta)
    # with alpha' = a/eps - 2 alpha - 4 eps alpha^2, beta' = 2 eps alpha
    eps, t, a = 0.5, 0.3, 0.2
    model = LinearQuadraticModel([[1.0]], [[a]])
    r = feynman_kac_mc(model, [0.8], t, eps, 200000, seed=5, dt=1e-3)
    sol = solve_ivp(
        lambda _, y: [a / eps - 2 * y[0] - 4 * eps * y[0] ** 2, 2 * eps * y[0]],
        (0, t), [0.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14,
    )
    y = sol.y[:, -1]
    ref = math.exp(-y[0] * 0.64 - y[1])
    assert abs(r.estimate - ref) <= 3 * r.std_error + 2e-3 * ref


def test_mc_variance_scaling():
    f = benchmark_field("circle_sink_source")
    se = [feynman_kac_mc(f, [0.2], 0.05, 0.05, n, seed=1).std_error for n in (1000, 10000, 100000)]
    slope = np.polyfit(np.log([1e3, 1e4, 1e5]), np.log(np.square(se)), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.15)


def test_decay_margin_formula():
    assert decay_margin(0.5, 1.0, 0.2, 1.0, 0.1, 0.05) == pytest.approx(math.log(0.5) + 1.0)
