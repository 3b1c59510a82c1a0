"""Disc geometry, the Bergman kernel and the monomial Hilbert basis of H^2(D(x, r))."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# points closer to the boundary than this (relative to r) are rejected
INTERIOR_TOL = 1e-12


class PointOutsideDiscError(ValueError):
    """Raised when a kernel is evaluated at a point not strictly inside the disc."""


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    def contains(self, z) -> np.ndarray:
        """Strict-interior test with the module tolerance."""
        return np.abs(np.asarray(z) - self.center) <= self.radius * (1 - INTERIOR_TOL)

    def normalized(self, z):
        return (np.asarray(z) - self.center) / self.radius

    def boundary(self, n: int) -> np.ndarray:
        theta = 2 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * theta)


def _require_inside(disc: Disc, *points):
    for z in points:
        if not np.all(disc.contains(z)):
            raise PointOutsideDiscError(
                f"point(s) {np.asarray(z)[~disc.contains(z)] if np.ndim(z) else z} "
                f"not strictly inside D({disc.center}, {disc.radius})"
            )


def bergman_kernel(disc: Disc, z, w):
    """B(z, w) = 1 / (pi r^2 (1 - (z-x) conj(w-x) / r^2)^2); broadcasts over arrays."""
    _require_inside(disc, z, w)
    u = disc.normalized(z) * np.conj(disc.normalized(w))
    out = 1.0 / (np.pi * disc.radius**2 * (1.0 - u) ** 2)
    return complex(out) if np.ndim(out) == 0 else out


def basis_eval(disc: Disc, ell: int, z):
    """e_ell(z) = sqrt((ell+1)/pi) / r * ((z-x)/r)^ell. Defined on all of C.

    The 1/r factor makes the family orthonormal in L^2(dm) for every radius.
    """
    if ell < 0:
        raise ValueError("basis index must be non-negative")
    out = np.sqrt((ell + 1) / np.pi) / disc.radius * disc.normalized(z) ** ell
    return complex(out) if np.ndim(out) == 0 else out


def basis_matrix(disc: Disc, L: int, z) -> np.ndarray:
    """Values e_0..e_{L-1} at the points z, shape (len(z), L)."""
    u = np.atleast_1d(disc.normalized(z)).astype(complex)
    powers = np.ones((u.size, L), dtype=complex)
    for ell in range(1, L):
        powers[:, ell] = powers[:, ell - 1] * u
    return powers * (np.sqrt((np.arange(L) + 1) / np.pi) / disc.radius)


def kernel_diag_bounds(disc: Disc, z) -> tuple[float, float]:
    """Lower and upper bounds for B(z, z) from the enclosing disc and the boundary distance."""
    _require_inside(disc, z)
    dist = disc.radius - abs(complex(z) - disc.center)
    return 1.0 / (np.pi * disc.radius**2), 1.0 / (np.pi * dist**2)
