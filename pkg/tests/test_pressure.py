import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recurrentlab.errors import ConstraintError, InvalidArgumentError
from recurrentlab.model import GOLDEN, benchmark_field, build_component
from recurrentlab.pressure import build_lyapunov, component_pressure, global_pressure, lyapunov_for


def test_scalar_lyapunov_data():
    # B = -b, Pi = 4: A_s = -b/2, M_s = 1/(2b), psi2 = (2 B A - 2 A^2)/2
    c = build_component("point", [[-2.0]], 0.0, "p")
    L = lyapunov_for(c)
    assert L.A_s[0, 0] == pytest.approx(-1.0)
    assert L.M_s[0, 0] == pytest.approx(0.25)
    assert L.psi2[0, 0] == pytest.approx(-2.0 * -1.0 - 1.0)


def test_psi2_congruence(rng):
    # psi2 is congruent to Pi - 2I, so its definiteness tracks the weight
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    c = build_component("point", Q @ np.diag([-1.0, -3.0, 2.0]) @ Q.T, 0.0, "p", pi_s=2.5, pi_u=5.0)
    L = lyapunov_for(c)
    assert np.all(np.linalg.eigvalsh(L.psi2) > 0)


def test_weight_constraint():
    c = build_component("point", [[-2.0]], 0.0, "p")
    with pytest.raises(ConstraintError):
        build_lyapunov(c.split, [[1.0]], np.zeros((0, 0)))


@pytest.mark.parametrize(
    "B,c,stable,unstable",
    [
        ([[-2.0]], 1.0, 3.0, 1.0),
        ([[3.0]], 1.0, 1.0, -2.0),
        ([[-1.0, 0.0], [0.0, 2.0]], 0.5, 1.5, -1.5),
    ],
)
def test_component_pressure(B, c, stable, unstable):
    comp = build_component("point", B, c, "p")
    assert component_pressure(comp, "stable") == pytest.approx(stable)
    assert component_pressure(comp, "unstable") == pytest.approx(unstable)


def test_torus_pressure():
    t = build_component("torus", None, {"const": 2.0, "modes": [{"n": [1, 0], "cos": 1.0}]}, "t", k=(1.0, GOLDEN))
    assert component_pressure(t, "stable") == component_pressure(t, "unstable") == 2.0


def test_bad_convention():
    with pytest.raises(InvalidArgumentError):
        component_pressure(build_component("point", [[-1.0]], 0.0, "p"), "kifer")


def test_dimension_rule():
    p = build_component("point", [[-1.0]], 0.5, "p")
    g = build_component("cycle", [[2.0]], 1.5, "g")
    rep = global_pressure([p, g])
    assert rep.pressure == pytest.approx(1.5)
    assert set(rep.argmax) == {"p", "g"}
    assert rep.eligible == ("g",)


def test_duplicate_labels():
    p = build_component("point", [[-1.0]], 0.5, "p")
    with pytest.raises(InvalidArgumentError):
        global_pressure([p, p])


def test_empty():
    with pytest.raises(InvalidArgumentError):
        global_pressure([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.2, 4), st.booleans()), min_size=1, max_size=5))
def test_convention_gap(items):
    comps = [build_component("point", [[b if up else -b]], c, f"p{i}") for i, (c, b, up) in enumerate(items)]
    for comp in comps:
        gap = component_pressure(comp, "stable") - component_pressure(comp, "unstable")
        assert gap == pytest.approx(comp.split.trace_unstable - comp.split.trace_stable)
        assert gap >= 0
    rep = global_pressure(comps)
    assert rep.pressure == max(rep.values.values())
    assert set(rep.eligible) <= set(rep.argmax)


def test_shift_covariance():
    f = benchmark_field("torus_gradient_points", {"killing": {"modes": [{"n": [1, 0], "cos": 0.5}]}})
    base = global_pressure(f.components)
    shifted = global_pressure([c.with_killing_shift(0.75) for c in f.components])
    assert shifted.pressure == pytest.approx(base.pressure + 0.75)
    assert shifted.argmax == base.argmax
