"""Free group algebra with matrix coefficients, the tracial state tau and the limit operator M_infinity.

Elements are finite sums X = sum_w A_w . w with L x L complex coefficients A_w
indexed by reduced words. Products convolve over words with free reduction;
tau(X) is the trace of the identity-word coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from numpy.polynomial import chebyshev as C

from .assembly import TruncatedOperator, stacked_entries
from .domain import Disc, basis_matrix, bergman_kernel
from .freegroup import IDENTITY, Word, ball_words, inverse_word, reduce_word, word_mul

DEFAULT_PRUNE = 1e-14
SUPPORT_CAP = 10**6
DEFAULT_MOMENT_CAP = 8

#: endpoint of the arcsine-law support, 4 * 81/25
Z0_EDGE = 324 / 25
DELTA0_EIGENVALUE = 81 / 25


class SupportExplosionError(RuntimeError):
    pass


@dataclass
class AlgebraElement:
    terms: dict = field(default_factory=dict)
    L: int = 1

    def __post_init__(self):
        clean = {}
        for w, A in self.terms.items():
            A = np.atleast_2d(np.asarray(A, dtype=complex))
            if A.shape != (self.L, self.L):
                raise ValueError(f"coefficient of {w} has shape {A.shape}, expected {(self.L, self.L)}")
            w = reduce_word(w)
            clean[w] = clean[w] + A if w in clean else A
        self.terms = clean

    @classmethod
    def identity(cls, L: int) -> "AlgebraElement":
        return cls({IDENTITY: np.eye(L)}, L)

    @classmethod
    def scalar(cls, coeffs: dict) -> "AlgebraElement":
        """Element with 1 x 1 coefficients, e.g. {(-1, 2): 1.0}."""
        return cls({w: np.array([[c]]) for w, c in coeffs.items()}, 1)

    def __len__(self):
        return len(self.terms)

    @property
    def max_length(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement({inverse_word(w): A.conj().T for w, A in self.terms.items()}, self.L)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        for w, A in self.terms.items():
            B = self.terms.get(inverse_word(w))
            if B is None:
                if np.linalg.norm(A) > tol:
                    return False
            elif np.linalg.norm(A - B.conj().T) > tol * max(1.0, np.linalg.norm(A)):
                return False
        return True

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        terms = dict(self.terms)
        for w, A in other.terms.items():
            terms[w] = terms[w] + A if w in terms else A
        return AlgebraElement(terms, self.L)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c) -> "AlgebraElement":
        return AlgebraElement({w: c * A for w, A in self.terms.items()}, self.L)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return algebra_mul(self, other)
        return other * self

    def generators_used(self) -> int:
        return max((abs(g) for w in self.terms for g in w), default=0)


def _prune(terms: dict, prune: float) -> dict:
    return {w: A for w, A in terms.items() if np.linalg.norm(A) >= prune}


def algebra_mul(X: AlgebraElement, Y: AlgebraElement, prune: float = DEFAULT_PRUNE,
                cap: int = SUPPORT_CAP) -> AlgebraElement:
    """Word-wise convolution with free reduction; drops coefficients below ``prune`` (Frobenius)."""
    if X.L != Y.L:
        raise ValueError("coefficient sizes differ")
    acc: dict = {}
    for u, A in X.terms.items():
        for v, B in Y.terms.items():
            w = word_mul(u, v)
            P = A @ B
            if w in acc:
                acc[w] += P
            else:
                acc[w] = P
                if len(acc) > cap:
                    raise SupportExplosionError(f"product support exceeds {cap} words")
    out = AlgebraElement.__new__(AlgebraElement)
    out.terms, out.L = _prune(acc, prune), X.L
    return out


def algebra_power(X: AlgebraElement, p: int, prune: float = DEFAULT_PRUNE) -> AlgebraElement:
    if p < 0:
        raise ValueError("negative powers are not defined")
    out = AlgebraElement.identity(X.L)
    for _ in range(p):
        out = algebra_mul(out, X, prune)
    return out


def tau(X: AlgebraElement) -> complex:
    A = X.terms.get(IDENTITY)
    return 0j if A is None else complex(np.trace(A))


def tau_of_product(Y: AlgebraElement, Z: AlgebraElement) -> complex:
    """tau(Y Z) = sum_w Tr(Y_w Z_{w^{-1}}) without forming the product."""
    total = 0j
    for w, A in Y.terms.items():
        B = Z.terms.get(inverse_word(w))
        if B is not None:
            total += np.sum(A * B.T)
    return complex(total)


def tau_moment(X: AlgebraElement, p: int, prune: float = DEFAULT_PRUNE,
               cap: int | None = DEFAULT_MOMENT_CAP) -> float:
    """tau(X^p) for self-adjoint X, splitting the power in two halves."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if cap is not None and p > cap:
        raise ValueError(f"moment order {p} above the configured cap {cap}")
    if not X.is_self_adjoint(1e-10):
        raise ValueError("tau_moment needs a self-adjoint element")
    half = algebra_power(X, p // 2, prune)
    other = algebra_mul(half, X, prune) if p % 2 else half
    return float(tau_of_product(half, other).real)


def gram_element(ops: list[TruncatedOperator]) -> AlgebraElement:
    """(sum_j W_j . a_j)^* (sum_j W_j . a_j): identity coefficient sum_j M_j^* M_j and
    M_i^* M_j on the word a_i^{-1} a_j."""
    M = stacked_entries(ops)
    d, L, _ = M.shape
    terms = {IDENTITY: sum(M[j].conj().T @ M[j] for j in range(d))}
    for i in range(d):
        for j in range(d):
            if i != j:
                terms[(-(i + 1), j + 1)] = M[i].conj().T @ M[j]
    return AlgebraElement(terms, L)


def lambda_norm_bound(X: AlgebraElement) -> float:
    """||lambda(X)|| <= sum_w ||A_w||."""
    return float(sum(np.linalg.norm(A, 2) for A in X.terms.values()))


# --- smooth functional calculus ----------------------------------------------

def chebyshev_coefficients(f, K: float, degree: int) -> np.ndarray:
    """Chebyshev interpolant coefficients of f on [0, K] (variable s = 2x/K - 1)."""
    return C.chebinterpolate(lambda s: f(K * (np.asarray(s) + 1) / 2), degree)


@dataclass(frozen=True)
class SmoothTrace:
    value: float
    remainder: float
    degree: int


def tau_smooth(X: AlgebraElement, coeffs, K: float, degree: int | None = None,
               prune: float = DEFAULT_PRUNE, cap: int = SUPPORT_CAP) -> SmoothTrace:
    """tau(X psi(X)) with psi = sum_n c_n T_n(2x/K - 1), by the three-term recurrence in the algebra.

    The test function x psi(x) vanishes at 0 by construction. The remainder bound
    is sum_{n > degree} |c_n| * tau(X), valid since |T_n| <= 1 on [0, K] and
    mu_X has total mass tau(X) for positive X.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    degree = len(coeffs) - 1 if degree is None else min(degree, len(coeffs) - 1)
    bound = lambda_norm_bound(X)
    if K < bound * (1 - 1e-12):
        raise ValueError(f"K = {K} does not dominate the operator norm bound {bound}")
    I = AlgebraElement.identity(X.L)
    S = (2.0 / K) * X - I
    T_prev, T_cur = I, S
    total = coeffs[0] * tau_of_product(X, I).real
    if degree >= 1:
        total += coeffs[1] * tau_of_product(X, S).real
    for n in range(2, degree + 1):
        T_next = 2.0 * algebra_mul(S, T_cur, prune, cap) - T_prev
        if len(T_next) > cap:
            raise SupportExplosionError(f"Chebyshev term {n} exceeds the support cap")
        total += coeffs[n] * tau_of_product(X, T_next).real
        T_prev, T_cur = T_cur, T_next
    mass = abs(tau(X).real)
    remainder = float(np.sum(np.abs(coeffs[degree + 1:])) * mass)
    return SmoothTrace(float(total), remainder, degree)


# --- Cayley ball compression ---------------------------------------------------

def cayley_ball_matrix(X: AlgebraElement, R: int, d: int | None = None,
                       max_entries: int = 4 * 10**7) -> tuple[np.ndarray, list[Word]]:
    """lambda(X) compressed to l^2(B_R) (x) C^L; rows/cols ordered word-major.

    Returns the dense matrix and the list of words indexing the blocks; the
    identity word is block 0. Spectra of this compression are polluted near the
    ball boundary.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    d = d or max(X.generators_used(), 1)
    words = ball_words(d, R)
    n = len(words) * X.L
    if n * n > max_entries:
        raise MemoryError(f"Cayley ball matrix of size {n} exceeds the memory cap")
    index = {w: i for i, w in enumerate(words)}
    L = X.L
    mat = np.zeros((len(words), L, len(words), L), dtype=complex)
    for g, A in X.terms.items():
        for v, col in index.items():
            row = index.get(word_mul(g, v))
            if row is not None:
                mat[row, :, col, :] += A
    return mat.reshape(n, n), words


def center_trace(mat: np.ndarray, L: int, p: int) -> float:
    """Trace of the identity-word block of mat^p."""
    v = np.zeros((mat.shape[0], L), dtype=complex)
    v[:L] = np.eye(L)
    for _ in range(p):
        v = mat @ v
    return float(np.trace(v[:L]).real)


# --- the effective example: arcsine law ----------------------------------------

def haar_moment(k: int) -> int:
    """tau((U + U^*)^k) for a Haar unitary U."""
    return 0 if k % 2 else comb(k, k // 2)


def arcsine_moment_exact(p: int) -> Fraction:
    """tau(Z_0^p) = (81/25)^p sum_k C(p, k) 2^{p-k} tau((U + U^*)^k), exactly."""
    return Fraction(81, 25) ** p * sum(comb(p, k) * 2 ** (p - k) * haar_moment(k) for k in range(p + 1))


def arcsine_moment(p: int) -> float:
    return float(arcsine_moment_exact(p))


def arcsine_density(x):
    """Density of mu_{Z_0}: 25/(81 pi) x / sqrt(4 - (25x/81 - 2)^2) on (0, 324/25)."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < Z0_EDGE)
    t = np.where(inside, 25 * x / 81 - 2, 0.0)
    out = np.where(inside, 25 / (81 * np.pi) * x / np.sqrt(np.where(inside, 4 - t**2, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def arcsine_count(a: float, b: float) -> float:
    """Integral of d mu_{Z_0}(x) / x over [a, b]."""
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    a, b = min(a, Z0_EDGE), min(b, Z0_EDGE)
    return (np.arcsin((25 * b - 162) / 162) - np.arcsin((25 * a - 162) / 162)) / np.pi


def delta0_closed_form(disc: Disc, L: int, point: complex = 0.0) -> np.ndarray:
    """Matrix of f -> f(p) Vol B(., p): entries Vol conj(e_k(p)) e_l(p)."""
    e = basis_matrix(disc, L, np.array([point]))[0]
    return disc.area * np.outer(np.conj(e), e)


def delta0_matrix(disc: Disc, L: int, quad, point: complex = 0.0) -> np.ndarray:
    """Same operator assembled by quadrature of <Vol B(., p), e_k> times e_l(p)."""
    z = quad.nodes
    k_vals = disc.area * bergman_kernel(disc, z, np.full_like(z, point))
    coeff = (np.conj(basis_matrix(disc, L, z)) * quad.weights[:, None]).T @ k_vals
    e = basis_matrix(disc, L, np.array([point]))[0]
    return np.outer(coeff, e)


def delta0_distance(op_i: TruncatedOperator, op_j: TruncatedOperator, delta0: np.ndarray) -> float:
    """Trace norm of M_i^* M_j - delta_0 (truncated)."""
    D = op_i.entries.conj().T @ op_j.entries - delta0
    return float(np.sum(np.linalg.svd(D, compute_uv=False)))


def z0_element(delta0: np.ndarray) -> AlgebraElement:
    """Z_0 = delta_0 . (2 e + a_1^{-1} a_2 + a_2^{-1} a_1)."""
    L = delta0.shape[0]
    return AlgebraElement({IDENTITY: 2 * delta0, (-1, 2): delta0, (-2, 1): delta0}, L)
