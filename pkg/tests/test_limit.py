from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from twisted_transfer import (
    AlgebraElement,
    Disc,
    algebra_mul,
    arcsine_count,
    arcsine_density,
    arcsine_moment,
    cayley_ball_matrix,
    delta0_distance,
    gram_element,
    tau,
    tau_moment,
    tau_smooth,
)
from twisted_transfer.assembly import assemble_all, quadrature_nodes
from twisted_transfer.limit import (
    Z0_EDGE,
    SupportExplosionError,
    algebra_power,
    arcsine_moment_exact,
    center_trace,
    chebyshev_coefficients,
    delta0_closed_form,
    delta0_matrix,
    haar_moment,
    lambda_norm_bound,
    tau_of_product,
    z0_element,
)
from twisted_transfer.system import gauss_system, validate_system

OMEGA0 = Disc(1, 1.5)
U = AlgebraElement.scalar({(-1, 2): 1.0})


def random_element(rng, L=3, n_terms=4, d=2):
    terms = {}
    for _ in range(n_terms):
        length = rng.integers(0, 4)
        w = tuple(int(rng.choice([1, -1, 2, -2][: 2 * d])) for _ in range(length))
        terms[w] = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    return AlgebraElement(terms, L)


def test_element_validation():
    with pytest.raises(ValueError):
        AlgebraElement({(): np.eye(2)}, 3)
    X = AlgebraElement({(1, -1): np.eye(2), (): np.eye(2)}, 2)
    assert list(X.terms) == [()]
    assert np.allclose(X.terms[()], 2 * np.eye(2))


def test_mul_identity_and_reduction():
    rng = np.random.default_rng(0)
    X = random_element(rng)
    Y = algebra_mul(X, AlgebraElement.identity(3))
    assert set(Y.terms) == set(X.terms)
    for w in X.terms:
        assert np.allclose(Y.terms[w], X.terms[w])
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    P = AlgebraElement({(1,): A}, 3) * AlgebraElement({(-1,): B}, 3)
    assert list(P.terms) == [()]
    assert np.allclose(P.terms[()], A @ B)


def test_mul_length_mismatch():
    with pytest.raises(ValueError):
        algebra_mul(AlgebraElement.identity(2), AlgebraElement.identity(3))


def test_support_cap():
    X = AlgebraElement.scalar({(1,): 1.0, (2,): 1.0, (-1,): 1.0, (-2,): 1.0})
    with pytest.raises(SupportExplosionError):
        algebra_mul(algebra_power(X, 3), X, cap=50)


def test_tau_basic():
    A = np.arange(4.0).reshape(2, 2)
    assert tau(AlgebraElement({(1,): A}, 2)) == 0
    assert tau(AlgebraElement({(): A}, 2)) == 3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_faithfulness(seed):
    Y = random_element(np.random.default_rng(seed))
    val = tau(Y.adjoint() * Y)
    expected = sum(np.linalg.norm(A) ** 2 for A in Y.terms.values())
    assert abs(val.imag) < 1e-9 * expected
    assert val.real == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_associativity_and_tau_of_product(seed):
    rng = np.random.default_rng(seed)
    X, Y, Z = (random_element(rng, L=2) for _ in range(3))
    a = (X * Y) * Z
    b = X * (Y * Z)
    assert set(a.terms) == set(b.terms)
    for w in a.terms:
        assert np.allclose(a.terms[w], b.terms[w])
    assert tau_of_product(X, Y) == pytest.approx(tau(X * Y))


@pytest.mark.parametrize("k", range(11))
def test_haar_moment_table(k):
    Sym = U + U.adjoint()
    val = tau(algebra_power(Sym, k)) if k else 1.0
    assert val == haar_moment(k)
    assert haar_moment(k) == (0 if k % 2 else comb(k, k // 2))


def test_gram_structure(ops23, H23):
    X = gram_element(ops23)
    assert set(X.terms) == {(), (-1, 2), (-2, 1)}
    assert X.is_self_adjoint()
    assert tau(X).real == pytest.approx(np.trace(H23.H).real, abs=1e-8)
    single = gram_element(ops23[:1])
    assert list(single.terms) == [()]


def test_gram_moments_positive(ops23):
    X = gram_element(ops23)
    moments = [tau_moment(X, p) for p in range(1, 9)]
    assert all(m > 0 for m in moments)
    # Hankel positivity for the measure x dmu on the computed range
    H = np.array([[moments[i + j] for j in range(4)] for i in range(4)])
    assert np.all(np.linalg.eigvalsh(H) > -1e-9 * np.max(np.abs(H)))


def test_tau_moment_guards(ops23):
    X = gram_element(ops23)
    with pytest.raises(ValueError):
        tau_moment(X, 9)
    with pytest.raises(ValueError):
        tau_moment(AlgebraElement.scalar({(1,): 1.0}), 2)
    with pytest.raises(ValueError):
        tau_moment(X, 0)


@pytest.mark.parametrize("R", [2, 3])
def test_cayley_ball_center_trace(ops23, R):
    X = gram_element(ops23)
    mat, words = cayley_ball_matrix(X, R)
    assert words[0] == ()
    for p in range(1, R + 1):
        assert center_trace(mat, X.L, p) == pytest.approx(tau_moment(X, p), rel=1e-12)


def test_cayley_ball_identity_element():
    A = np.diag([1.0, 2.0])
    mat, words = cayley_ball_matrix(AlgebraElement({(): A}, 2), 2, d=2)
    ev = np.sort(np.linalg.eigvalsh(mat))
    assert np.allclose(ev, np.sort(np.tile([1.0, 2.0], len(words))))


def test_cayley_ball_memory_cap(ops23):
    with pytest.raises(MemoryError):
        cayley_ball_matrix(gram_element(ops23), 5, max_entries=10**6)


def test_z0_sketch_range():
    Z = z0_element(np.array([[81 / 25]]))
    mat, _ = cayley_ball_matrix(Z, 6, d=2)
    ev = np.linalg.eigvalsh(mat)
    assert ev.min() > -1e-9 and ev.max() < Z0_EDGE


def test_arcsine_density_integrates_against_count():
    x = np.linspace(1, 12, 5)
    for a, b in zip(x[:-1], x[1:]):
        val = quad(lambda t: arcsine_density(t) / t, a, b, epsrel=1e-12)[0]
        assert val == pytest.approx(arcsine_count(a, b), rel=1e-9)


def test_arcsine_closed_forms():
    assert arcsine_moment_exact(1) == Fraction(162, 25)
    assert arcsine_moment_exact(2) == Fraction(39366, 625)
    assert arcsine_moment(1) == pytest.approx(162 / 25)
    assert arcsine_count(0.0, Z0_EDGE) == pytest.approx(1.0, abs=1e-12)
    assert arcsine_density(13.0) == 0 and arcsine_density(-1.0) == 0
    assert arcsine_count(1, 12) == pytest.approx(
        (np.arcsin((25 * 12 - 162) / 162) - np.arcsin((25 - 162) / 162)) / np.pi)
    with pytest.raises(ValueError):
        arcsine_count(3, 2)


@pytest.mark.parametrize("p", range(1, 7))
def test_arcsine_moment_against_quadrature(p):
    # x^{p-1} density(x) = x^p / (pi sqrt(x (E - x))): integrate with the algebraic end-point weight
    val = quad(lambda x: x**p / np.pi, 0, Z0_EDGE, weight="alg", wvar=(-0.5, -0.5), epsrel=1e-13)[0]
    assert val == pytest.approx(arcsine_moment(p), rel=1e-8)


@pytest.mark.parametrize("p", range(1, 7))
def test_z0_moments_exact(p):
    Z = z0_element(np.array([[81 / 25]]))
    assert tau_moment(Z, p, cap=None) == pytest.approx(float(arcsine_moment_exact(p)), rel=1e-13)


def test_delta0():
    D = delta0_closed_form(OMEGA0, 40)
    ev = np.sort(np.linalg.eigvalsh((D + D.conj().T) / 2))
    assert ev[-1] == pytest.approx(81 / 25, abs=1e-8)
    assert np.max(np.abs(ev[:-1])) < 1e-8
    for p in range(1, 5):
        assert np.trace(np.linalg.matrix_power(D, p)).real == pytest.approx((81 / 25) ** p, abs=1e-8)
    Dq = delta0_matrix(OMEGA0, 40, quadrature_nodes(OMEGA0))
    assert np.max(np.abs(Dq - D)) < 1e-10


def test_delta0_distance_trend():
    D = delta0_closed_form(OMEGA0, 40)
    dist = []
    for pair in ((5, 6), (50, 51)):
        s = gauss_system(list(pair))
        validate_system(s)
        ops = assemble_all(s, 40)
        dist.append(delta0_distance(ops[0], ops[1], D))
    assert dist[1] < dist[0]


def test_tau_smooth_linear_is_second_moment(ops23):
    X = gram_element(ops23)
    K = lambda_norm_bound(X)
    coeffs = chebyshev_coefficients(lambda x: x, K, 1)
    res = tau_smooth(X, coeffs, K)
    assert res.value == pytest.approx(tau_moment(X, 2), rel=1e-12)
    zero = tau_smooth(X, np.zeros(5), K)
    assert zero.value == 0


def test_tau_smooth_polynomial_exact(ops23):
    X = gram_element(ops23)
    K = lambda_norm_bound(X)
    coeffs = chebyshev_coefficients(lambda x: 2 * x**2 - x + 0.5, K, 2)
    expected = 2 * tau_moment(X, 3) - tau_moment(X, 2) + 0.5 * tau_moment(X, 1)
    assert tau_smooth(X, coeffs, K).value == pytest.approx(expected, rel=1e-10)


def test_tau_smooth_requires_norm_bound(ops23):
    X = gram_element(ops23)
    with pytest.raises(ValueError):
        tau_smooth(X, [1.0, 0.0], 0.1 * lambda_norm_bound(X))


def test_tau_smooth_approximates_count():
    Z = z0_element(np.array([[81 / 25]]))
    K = lambda_norm_bound(Z)
    a, b = 3.0, 9.0
    from scipy.special import erf
    width = 0.1
    psi = lambda x: 0.5 * (erf((x - a) / width) - erf((x - b) / width)) / np.maximum(x, 1.0)
    coeffs = chebyshev_coefficients(psi, K, 400)
    res = tau_smooth(Z, coeffs, K, 200)
    assert res.remainder < 1e-2
    assert abs(res.value - arcsine_count(a, b)) < 5e-3 + res.remainder
