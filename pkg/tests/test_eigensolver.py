import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recurrentlab.errors import InvalidArgumentError, ResolutionError
from recurrentlab.eigensolver import (
    assemble,
    blowup_extract,
    convergence_study,
    default_n_rule,
    discretize,
    extrapolate_limit,
    fit_slope,
    gauge_residual,
    leading_eigenpair,
    subgrid_argmax,
    weighted_measure,
)
from recurrentlab.model import benchmark_field

CIRCLE = benchmark_field("circle_sink_source")
CIRCLE_KILLED = benchmark_field("circle_sink_source", {"killing": {"const": 0.3, "modes": [{"n": [1], "cos": 0.5}]}})


def test_zero_drift_is_graph_laplacian():
    eps = 0.2
    op = assemble(np.zeros((4, 1)), np.zeros(4), eps)
    ring = 2 * np.eye(4) - np.roll(np.eye(4), 1, axis=1) - np.roll(np.eye(4), -1, axis=1)
    np.testing.assert_allclose(op.matrix.toarray(), eps * 16 * ring)
    np.testing.assert_allclose(op.matrix @ np.ones(4), 0.0, atol=1e-14)


def test_row_sums_equal_killing():
    X = CIRCLE_KILLED.grid(64)
    c = CIRCLE_KILLED.killing_at(X)
    for scheme in ("central", "fitted"):
        op = assemble(CIRCLE_KILLED.drift(X), c, 0.05, scheme=scheme)
        np.testing.assert_allclose(op.matrix @ np.ones(64), c, atol=1e-10)


def test_constant_killing_exact():
    fld = benchmark_field("circle_sink_source", {"killing": 0.7})
    pair = leading_eigenpair(discretize(fld, 0.05, 128))
    assert pair.lam == pytest.approx(0.7, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_shift_covariance(kappa):
    X = CIRCLE_KILLED.grid(64)
    b, c = CIRCLE_KILLED.drift(X), CIRCLE_KILLED.killing_at(X)
    a = leading_eigenpair(assemble(b, c, 0.05))
    s = leading_eigenpair(assemble(b, c + kappa, 0.05))
    assert s.lam - a.lam == pytest.approx(kappa, abs=1e-9)
    np.testing.assert_allclose(s.u, a.u, rtol=1e-7)


@pytest.mark.parametrize("scheme", ["central", "fitted"])
def test_dense_eig_oracle(scheme):
    op = discretize(CIRCLE_KILLED, 0.08, 24, scheme=scheme)
    pair = leading_eigenpair(op, tol=1e-12)
    w, V = np.linalg.eig(op.matrix.toarray())
    k = int(np.argmin(w.real))
    assert abs(w[k].imag) < 1e-10
    assert pair.lam == pytest.approx(w[k].real, abs=1e-10)
    ref = np.abs(V[:, k].real)
    ref = ref / math.sqrt(np.sum(ref**2) * op.cell_volume)
    np.testing.assert_allclose(pair.u.ravel(), ref, rtol=1e-8)


def test_second_order_refinement():
    lams = np.array([leading_eigenpair(discretize(CIRCLE_KILLED, 0.1, n, scheme="central"), tol=1e-11).lam
                     for n in (32, 64, 128, 256)])
    diffs = np.abs(np.diff(lams))
    np.testing.assert_allclose(diffs[:-1] / diffs[1:], 4.0, rtol=0.05)


def test_adjoint_same_eigenvalue():
    op = discretize(CIRCLE_KILLED, 0.05, 128)
    a = leading_eigenpair(op)
    b = leading_eigenpair(op, adjoint=True)
    assert b.adjoint
    assert b.lam == pytest.approx(a.lam, abs=1e-9)
    assert np.all(b.u > 0)


@pytest.mark.parametrize("name", ["circle_sink_source", "torus_shear_cycles", "torus_gradient_points"])
def test_positive_and_normalized(name):
    fld = benchmark_field(name, {"killing": 0.2})
    op = discretize(fld, 0.02, 64)
    pair = leading_eigenpair(op)
    assert np.all(pair.u > 0)
    assert np.sum(pair.u**2) * op.cell_volume == pytest.approx(1.0, rel=1e-12)
    meas = weighted_measure(pair, fld)
    assert meas.weights.sum() == pytest.approx(1.0, rel=1e-12)
    assert meas.log_v.max() == pytest.approx(meas.log_vbar)


def test_peclet_switch_and_cap():
    op = discretize(CIRCLE, 1e-3, 64)
    assert op.scheme == "fitted" and op.peclet > 2
    assert discretize(CIRCLE, 0.1, 64).scheme == "central"
    with pytest.raises(ResolutionError):
        discretize(CIRCLE, 1e-3, 64, scheme="central", peclet_cap=2.0)
    with pytest.raises(InvalidArgumentError):
        discretize(CIRCLE, 0.1, 8)


def test_gauge_residual_decreases():
    res = []
    for n in (64, 128, 256, 512):
        pair = leading_eigenpair(discretize(CIRCLE_KILLED, 0.05, n, scheme="central"), tol=1e-11)
        res.append(gauge_residual(pair, CIRCLE_KILLED))
    assert all(b < a for a, b in zip(res, res[1:]))
    assert res[-1] < 1e-3


def test_default_n_rule():
    assert default_n_rule(1e-2) == (256,)
    for eps in (1e-1, 1e-2, 1e-3, 1e-5):
        (n,) = default_n_rule(eps)
        assert n & (n - 1) == 0 and 64 <= n <= 1024
    assert default_n_rule(1e-3, dim=2) == (512, 512)


def test_subgrid_argmax_recovers_parabola_vertex():
    x = np.arange(200) / 200
    peak = 0.3137
    pos = subgrid_argmax(-((x - peak) ** 2) * 50)
    assert pos[0] == pytest.approx(peak, abs=1e-12)


def test_subgrid_argmax_periodic_wrap():
    x = np.arange(100) / 100
    d = (x - 0.999 + 0.5) % 1.0 - 0.5
    assert subgrid_argmax(-(d**2))[0] == pytest.approx(0.999, abs=1e-12)


def test_fit_slope_and_extrapolate():
    eps = np.array([1e-2, 5e-3, 2.5e-3])
    assert fit_slope(eps, 3 * eps**1.5) == pytest.approx(1.5)
    assert math.isnan(fit_slope(eps, np.zeros(3)))
    assert extrapolate_limit(eps, 0.4 + 2 * eps) == pytest.approx(0.4)


def test_symmetric_study_has_no_offset():
    res = convergence_study(CIRCLE, [1e-2, 5e-3, 2.5e-3])
    assert all(r.dmax == pytest.approx(0.0, abs=1e-12) for r in res.rows)
    assert math.isnan(res.slope)
    assert res.rows[-1].masses["source"] > 0.99
    assert res.columns[:3] == ["epsilon", "lambda", "dmax"]


def test_study_rejects_unsorted_and_is_thread_stable():
    with pytest.raises(InvalidArgumentError):
        convergence_study(CIRCLE, [1e-3, 1e-2])
    a = convergence_study(CIRCLE_KILLED, [1e-2, 5e-3], threads=1)
    b = convergence_study(CIRCLE_KILLED, [1e-2, 5e-3], threads=2)
    assert a.table() == b.table()


def test_blowup_constant_killing_point():
    eps = 1e-3
    pair = leading_eigenpair(discretize(CIRCLE, eps, 1024))
    meas = weighted_measure(pair, CIRCLE)
    src = blowup_extract(pair, CIRCLE, CIRCLE.component("source"), meas)
    assert src.charged
    assert src.rel_l2 < 0.05
    assert src.covariance_ratio == pytest.approx(1.0, abs=0.05)
    sink = blowup_extract(pair, CIRCLE, CIRCLE.component("sink"), meas)
    assert not sink.charged and "not charged" in sink.notice


def test_blowup_uniform_torus():
    fld = benchmark_field("torus_irrational_flow")
    pair = leading_eigenpair(discretize(fld, 0.01, 64))
    cmp = blowup_extract(pair, fld, fld.component("torus"))
    assert cmp.rel_l2 < 1e-8
