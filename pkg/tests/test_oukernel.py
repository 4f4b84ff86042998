import math

import numpy as np
import pytest
import scipy.linalg as sla

from recurrentlab.errors import QuadratureError
from recurrentlab.model import build_component
from recurrentlab.oukernel import (
    asymptotics_suite,
    kolmogorov_apply,
    ou_operators,
    q_decomposed,
    q_direct,
    semigroup_deviation,
    stable_gaussian,
)
from recurrentlab.pressure import lyapunov_for
from recurrentlab.speclin import finite_gramian

BLOCKS = [
    [[-1.0]],
    [[1.5]],
    [[-1.0, 0.0], [0.0, 2.0]],
    [[-1.0, 0.5], [-0.5, -2.0]],
    [[1.0, 0.8], [0.0, 3.0]],
    [[-0.5, 2.0], [-2.0, -0.5]],
]


def setup(B):
    comp = build_component("point", B, 0.0, "p")
    return comp.split, lyapunov_for(comp)


def gaussian_expectation(K, mean, cov):
    # E exp(-<K Y, Y>) for Y ~ N(mean, cov), closed form
    m = K.shape[0]
    M = np.eye(m) + 2 * cov @ K
    return np.linalg.det(M) ** -0.5 * np.exp(-mean @ K @ np.linalg.solve(M, mean))


@pytest.mark.parametrize("B", BLOCKS)
def test_q_identity(B):
    split, L = setup(B)
    fam = ou_operators(split, L, 0.7)
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((2, 20, split.dim))
    np.testing.assert_allclose(q_decomposed(fam, x, y), q_direct(fam, x, y), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("B", BLOCKS)
def test_sign_pattern(B):
    split, L = setup(B)
    signs = ou_operators(split, L, 1.3).sign_pattern()
    assert all(signs.values())


@pytest.mark.parametrize("B", BLOCKS)
def test_asymptotics(B):
    split, L = setup(B)
    rep = asymptotics_suite(split, L)
    assert rep.passed, rep.failures()


@pytest.mark.parametrize("t", [0.2, 1.0, 3.0])
@pytest.mark.parametrize("B", BLOCKS[:5])
def test_kolmogorov_against_gaussian_oracle(B, t):
    split, L = setup(B)
    Bb = split.block_matrix()
    m = split.dim
    K = np.zeros((m, m))
    ms = split.stable_dim
    if ms:
        K[:ms, :ms] = 0.25 * np.linalg.inv(L.M_s) + 0.3 * np.eye(ms)
    K[ms:, ms:] = 0.2 * np.eye(m - ms)

    def z(Y):
        return np.exp(-np.einsum("ni,ij,nj->n", Y, K, Y))

    x = np.random.default_rng(2).standard_normal((4, m)) * 0.7
    got = kolmogorov_apply(z, split, L, t, x)
    cov = 2 * finite_gramian(Bb, t)
    E = sla.expm(-t * Bb)
    ref = np.array([gaussian_expectation(K, E @ xi, cov) for xi in x])
    np.testing.assert_allclose(got, ref, rtol=1e-9)


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("B", BLOCKS[:5])
def test_semigroup_identity(B, t):
    split, L = setup(B)
    assert semigroup_deviation(split, L, t) <= 1e-6


def test_scalar_semigroup_value():
    # B_s = [-1], A_s = [-0.5], z = exp(-x^2/2): T_1 z(0) = e^{tr B_s} = e^{-1}
    split, L = setup([[-1.0]])
    z = stable_gaussian(L)
    assert z(np.array([[1.0]]))[0] == pytest.approx(math.exp(-0.5))
    val = kolmogorov_apply(z, split, L, 1.0, np.zeros((1, 1)))[0]
    assert val == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_small_time_identity():
    split, L = setup([[-1.0, 0.0], [0.0, 2.0]])
    z = lambda Y: np.exp(-np.sum(Y * Y, axis=1))
    x = np.array([[0.3, -0.2], [0.0, 0.5]])
    np.testing.assert_allclose(kolmogorov_apply(z, split, L, 1e-4, x), z(x), rtol=1e-3)


def test_quadrature_check_flags_rough_integrand():
    split, L = setup([[2.0]])
    z = lambda Y: np.cos(40 * Y[:, 0])
    with pytest.raises(QuadratureError):
        kolmogorov_apply(z, split, L, 0.01, np.zeros((1, 1)), degree=10)
