"""The twisted operator L_N = sum_j U_j (x) M_j and its spectral data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import helmert

from .assembly import OverlapMatrix, TruncatedOperator, stacked_entries
from .freegroup import RandomHom, evaluate_word
from .limit import DEFAULT_PRUNE, algebra_power


@dataclass(frozen=True)
class TwistedMatrix:
    data: np.ndarray
    N: int
    L: int
    d: int
    hom_seed: int | None = None


@dataclass(frozen=True)
class SpectrumReport:
    singular_values: np.ndarray
    N: int
    L: int
    seed: int | None = None
    eigenvalues: np.ndarray | None = None
    error_bound: float = 0.0


def build_twisted_matrix(ops: list[TruncatedOperator], hom: RandomHom) -> TwistedMatrix:
    """Dense (N L) x (N L) matrix; block (sigma_j(b), b) receives M_j."""
    M = stacked_entries(ops)
    if hom.d != len(ops):
        raise ValueError(f"homomorphism has d = {hom.d} generators but {len(ops)} operators were given")
    N, L = hom.N, M.shape[1]
    data = np.zeros((N, L, N, L), dtype=complex)
    cols = np.arange(N)
    for j in range(hom.d):
        data[hom.generators[j], :, cols, :] += M[j]
    return TwistedMatrix(data.reshape(N * L, N * L), N, L, hom.d, hom.seed)


def singular_values(m: TwistedMatrix) -> np.ndarray:
    if not np.all(np.isfinite(m.data)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.svd(m.data, compute_uv=False)


def eigenvalues(m: TwistedMatrix) -> np.ndarray:
    """All eigenvalues of the (non-normal) matrix, sorted by decreasing modulus."""
    ev = np.linalg.eigvals(m.data)
    return ev[np.argsort(-np.abs(ev), kind="stable")]


def spectrum(m: TwistedMatrix, with_eigenvalues: bool = False) -> SpectrumReport:
    ev = eigenvalues(m) if with_eigenvalues else None
    return SpectrumReport(singular_values(m), m.N, m.L, m.hom_seed, ev)


def counting_function(values, r: float) -> int:
    """#{v >= 1/r}; complex values are compared by modulus."""
    if r <= 0:
        raise ValueError("r must be positive")
    v = np.abs(np.asarray(values))
    return int(np.count_nonzero(v >= 1.0 / r))


def pair_fixed_points(hom: RandomHom) -> np.ndarray:
    """F[k1, k2] = F_N(a_{k2}^{-1} a_{k1}) = #{x : sigma_k1(x) = sigma_k2(x)}."""
    g = hom.generators
    return (g[:, None, :] == g[None, :, :]).sum(axis=2)


def hs_norm_trace_formula(H: OverlapMatrix, hom: RandomHom) -> float:
    """||L_N||_2^2 = sum_{k1,k2} F_N(a_{k2}^{-1} a_{k1}) H[k1, k2]."""
    if H.d != hom.d:
        raise ValueError("overlap matrix and homomorphism disagree on d")
    total = np.sum(pair_fixed_points(hom) * H.H)
    if abs(total.imag) > 1e-10 * max(1.0, abs(total.real)):
        raise ArithmeticError(f"trace formula has imaginary residue {total.imag:.3e}")
    return float(total.real)


def frobenius_sq(m: TwistedMatrix) -> float:
    return float(np.vdot(m.data, m.data).real)


def vn_basis(N: int) -> np.ndarray:
    """N x (N-1) orthonormal basis of the mean-zero vectors (Helmert completion)."""
    return helmert(N, full=False).T


def restrict_to_VN(m: TwistedMatrix) -> np.ndarray:
    """Compression of the matrix to V_N (x) C^L, an ((N-1) L)-square matrix."""
    if m.N < 2:
        raise ValueError("V_N is trivial for N < 2")
    P = np.kron(vn_basis(m.N), np.eye(m.L))
    return P.conj().T @ m.data @ P


def vn_invariance_residual(m: TwistedMatrix) -> float:
    """Norm of the blocks coupling V_N and the constant vectors (zero in exact arithmetic)."""
    Q = np.kron(np.linalg.qr(np.hstack([np.ones((m.N, 1)), vn_basis(m.N)]))[0], np.eye(m.L))
    T = Q.conj().T @ m.data @ Q
    L = m.L
    return float(max(np.linalg.norm(T[:L, L:]), np.linalg.norm(T[L:, :L])))


def trace_table(X, p: int, prune: float | None = None) -> dict:
    """Map word -> Tr(A_w) for the coefficients of X^p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    Xp = algebra_power(X, p, prune=DEFAULT_PRUNE if prune is None else prune)
    return {w: complex(np.trace(A)) for w, A in Xp.terms.items()}


def trace_from_table(table: dict, hom: RandomHom, inverses: np.ndarray | None = None) -> float:
    inv = hom.inverses() if inverses is None else inverses
    N = hom.N
    ids = np.arange(N)
    total = 0j
    for w, t in table.items():
        f = int(np.count_nonzero(evaluate_word(hom, w, inv) == ids)) if w else N
        total += t * (f - 1)
    return float(total.real)


def trace_power_restricted(X, hom: RandomHom, p: int, prune: float | None = None) -> float:
    """Tr over V_N of pi_N(X)^p = sum_w Tr(A_w) (F_N(w) - 1), without forming the N L matrix."""
    return trace_from_table(trace_table(X, p, prune), hom)


def trace_power_dense(m: TwistedMatrix, p: int) -> float:
    """Tr((L_N^* L_N restricted to V_N)^p) by dense linear algebra; oracle for the word path."""
    R = restrict_to_VN(m)
    G = R.conj().T @ R
    return float(np.trace(np.linalg.matrix_power(G, p)).real)


def compressed_singular_values(ops: list[TruncatedOperator], hom: RandomHom,
                               tol: float = 1e-9) -> SpectrumReport:
    """Singular values of L_N after projecting the basis slot onto the joint row space of the M_j.

    With P the projector on the leading q right singular vectors of [M_1; ...; M_d],
    every singular value of L_N differs from the reported one by at most
    ``error_bound`` = d * s_{q+1}, and all unreported singular values are below
    ``error_bound`` (Weyl perturbation inequality). The range of L_N P lies in
    C^N (x) W with W spanning the columns of the M_j P, so the SVD is taken of
    an (N dim W) x (N q) matrix.
    """
    M = stacked_entries(ops)
    d, L, _ = M.shape
    if hom.d != d:
        raise ValueError(f"homomorphism has d = {hom.d} generators but {d} operators were given")
    _, s, Vh = np.linalg.svd(M.reshape(d * L, L))
    q = max(int(np.count_nonzero(s > tol)), 1)
    err = d * (float(s[q]) if q < len(s) else 0.0)
    C = M @ Vh[:q].conj().T
    W, sw, _ = np.linalg.svd(np.hstack(list(C)), full_matrices=False)
    W = W[:, sw > sw[0] * 1e-15]
    B = np.einsum("lr,jlq->jrq", W.conj(), C)
    N, r = hom.N, W.shape[1]
    data = np.zeros((N, r, N, q), dtype=complex)
    cols = np.arange(N)
    for j in range(d):
        data[hom.generators[j], :, cols, :] += B[j]
    sv = np.linalg.svd(data.reshape(N * r, N * q), compute_uv=False)
    return SpectrumReport(sv, N, L, hom.seed, None, err)


def trace_norm(values) -> float:
    return float(np.sum(np.abs(values)))
