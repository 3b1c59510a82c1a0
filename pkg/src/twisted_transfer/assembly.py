"""Disc quadrature, truncated Galerkin matrices of weighted composition operators, overlap matrix H."""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre

from .domain import Disc, basis_matrix, bergman_kernel
from .system import BranchSystem, weight_factor, weight_sup

DEFAULT_L = 40
DEFAULT_RADIAL = 64
DEFAULT_ANGULAR = 128


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    n_radial: int
    n_angular: int
    disc: Disc

    def integrate(self, values) -> complex:
        return complex(np.sum(self.weights * values))


@dataclass(frozen=True)
class TruncatedOperator:
    """L x L Galerkin matrix of e^{G o gamma} T_gamma in the basis e_0..e_{L-1}."""

    entries: np.ndarray
    L: int
    rho: float
    tail_bound: float
    tail_constant: float
    branch: int = 0
    n_radial: int = DEFAULT_RADIAL
    n_angular: int = DEFAULT_ANGULAR


@dataclass(frozen=True)
class OverlapMatrix:
    H: np.ndarray

    @property
    def d(self) -> int:
        return self.H.shape[0]


def quadrature_nodes(disc: Disc, n_radial: int = DEFAULT_RADIAL, n_angular: int = DEFAULT_ANGULAR) -> QuadratureRule:
    """Gauss-Legendre in the radius (with the polar Jacobian) times the trapezoid rule in angle."""
    if n_radial < 8 or n_angular < 16:
        raise ValueError("quadrature needs n_radial >= 8 and n_angular >= 16")
    t, w = roots_legendre(n_radial)
    rho = disc.radius * (t + 1) / 2
    w_rad = disc.radius / 2 * w * rho
    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    nodes = disc.center + rho[:, None] * np.exp(1j * theta)[None, :]
    weights = np.repeat(w_rad * (2 * np.pi / n_angular), n_angular)
    return QuadratureRule(nodes.ravel(), weights, n_radial, n_angular, disc)


def _tail_sum(rho: float, L: int) -> float:
    # sum_{l >= L} sqrt(l+1) rho^l, summed until terms drop below double precision
    total, ell = 0.0, L
    term = np.sqrt(ell + 1) * rho**ell
    while term > 1e-300 and (term > 1e-18 * total or total == 0.0):
        total += term
        ell += 1
        term = np.sqrt(ell + 1) * rho**ell
        if ell > L + 100000:
            break
    return total


def assemble_weighted_composition(sys: BranchSystem, j: int, L: int = DEFAULT_L,
                                  quad: QuadratureRule | None = None) -> TruncatedOperator:
    """M[k, l] = integral of e^{G(gamma_j z)} e_l(gamma_j z) conj(e_k(z)) dm(z)."""
    report = sys.require_validated()
    if L < 1:
        raise ValueError("truncation order L must be >= 1")
    disc = sys.domain
    quad = quad or quadrature_nodes(disc)
    z = quad.nodes
    g = weight_factor(sys, j, z)
    image = sys.branches[j](z)
    E_out = basis_matrix(disc, L, image) * g[:, None]
    E_in = basis_matrix(disc, L, z)
    M = (np.conj(E_in) * quad.weights[:, None]).T @ E_out

    rho = report.branch_sup[j] / disc.radius
    ells = np.arange(L)
    envelope = np.sqrt(ells + 1) * rho**ells
    col_norms = np.linalg.norm(M, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(envelope > 0, col_norms / envelope, 0.0)
    C = float(np.max(ratios))
    # a priori envelope: ||e_l o gamma||^2 <= (l+1)/(pi r^2) rho^{2l} area
    c_apriori = weight_sup(sys, j)
    if col_norms[-1] > 10 * c_apriori * envelope[-1]:
        warnings.warn(
            f"branch {j}: last column norm {col_norms[-1]:.3e} exceeds the predicted envelope "
            f"{c_apriori * envelope[-1]:.3e} by more than 10x; quadrature too coarse",
            QuadratureWarning, stacklevel=2,
        )
    return TruncatedOperator(
        entries=M, L=L, rho=rho, tail_bound=C * _tail_sum(rho, L), tail_constant=C,
        branch=j, n_radial=quad.n_radial, n_angular=quad.n_angular,
    )


def assemble_all(sys: BranchSystem, L: int = DEFAULT_L, quad: QuadratureRule | None = None) -> list[TruncatedOperator]:
    quad = quad or quadrature_nodes(sys.domain)
    return [assemble_weighted_composition(sys, j, L, quad) for j in range(sys.d)]


def overlap_matrix(sys: BranchSystem, quad: QuadratureRule | None = None) -> OverlapMatrix:
    """H[i, j] = integral of e^{G o gamma_i} conj(e^{G o gamma_j}) B(gamma_i z, gamma_j z) dm(z)."""
    sys.require_validated()
    quad = quad or quadrature_nodes(sys.domain)
    z = quad.nodes
    images = [b(z) for b in sys.branches]
    g = [weight_factor(sys, j, z) for j in range(sys.d)]
    H = np.empty((sys.d, sys.d), dtype=complex)
    for i in range(sys.d):
        for j in range(i, sys.d):
            vals = g[i] * np.conj(g[j]) * bergman_kernel(sys.domain, images[i], images[j])
            H[i, j] = quad.integrate(vals)
            H[j, i] = np.conj(H[i, j])
        H[i, i] = H[i, i].real
    return OverlapMatrix(H)


def truncation_tail_bound(op: TruncatedOperator) -> float:
    return op.tail_bound


def operator_norm_bound(sys: BranchSystem) -> float:
    """M_0 with ||L_N|| <= M_0 for every N.

    |F(w)|^2 <= B(w, w) ||F||^2 and B(w, w) <= 1/(pi r^2 (1 - rho_j^2)^2) on gamma_j(disc),
    so ||e^{G o gamma_j} T_gamma_j|| <= sup|e^{G o gamma_j}| / (1 - rho_j^2).
    """
    report = sys.require_validated()
    total = 0.0
    for j in range(sys.d):
        rho_j = report.branch_sup[j] / sys.domain.radius
        total += weight_sup(sys, j) / (1 - rho_j**2)
    return total


def stacked_entries(ops) -> np.ndarray:
    Ls = {op.L for op in ops}
    if len(Ls) != 1:
        raise ValueError(f"operators have different truncation orders {sorted(Ls)}")
    return np.stack([op.entries for op in ops])


# --- matrix container --------------------------------------------------------
#
# <name>.bin : 8-byte magic b"TWTMAT01", uint64 rows, uint64 cols (little endian),
#              then rows*cols complex entries stored column-major as (re, im) float64 pairs.
# <name>.json: sidecar with L, rho, tail_bound, tail_constant, branch, quadrature sizes.

MAGIC = b"TWTMAT01"


def save_matrix(path, matrix: np.ndarray, meta: dict | None = None) -> None:
    path = Path(path)
    m = np.asarray(matrix, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", *m.shape))
        fh.write(m.astype("<c16").tobytes(order="F"))
    if meta is not None:
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path} is not a matrix container")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape((rows, cols), order="F").astype(np.complex128)


def save_operator(path, op: TruncatedOperator, extra: dict | None = None) -> None:
    meta = {
        "L": op.L, "rho": op.rho, "tail_bound": op.tail_bound, "tail_constant": op.tail_constant,
        "branch": op.branch, "n_radial": op.n_radial, "n_angular": op.n_angular,
    }
    meta.update(extra or {})
    save_matrix(path, op.entries, meta)
