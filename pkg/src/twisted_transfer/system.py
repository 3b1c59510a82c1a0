"""Contraction systems: branches gamma_1..gamma_d mapping the disc strictly inside itself, plus a weight."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml
from scipy.optimize import minimize_scalar

from .domain import Disc

# margins at or below this (relative to the radius) count as escaping the disc
MARGIN_TOL = 1e-12


class ValidationError(ValueError):
    """A branch does not map the closed disc strictly inside the open disc."""


class UnvalidatedSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class MobiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise ValueError("degenerate Mobius map: ad - bc = 0")

    def __call__(self, z):
        z = np.asarray(z)
        return (self.a * z + self.b) / (self.c * z + self.d)

    @property
    def pole(self):
        return None if self.c == 0 else -self.d / self.c


@dataclass(frozen=True)
class AffineMap:
    """z -> fixed_point + multiplier * (z - fixed_point)."""

    fixed_point: complex
    multiplier: complex

    def __post_init__(self):
        if not abs(self.multiplier) < 1:
            raise ValueError("affine branch must be a strict contraction, |multiplier| < 1")

    def __call__(self, z):
        return self.fixed_point + self.multiplier * (np.asarray(z) - self.fixed_point)

    @property
    def pole(self):
        return None


Branch = Union[MobiusMap, AffineMap]


@dataclass(frozen=True)
class PolynomialWeight:
    """G(w) = sum_k c_k ((w - x)/r)^k; an empty coefficient list means G = 0."""

    coefficients: tuple = ()

    def factor(self, branch: Branch, disc: Disc, z):
        w = branch(z)
        if not self.coefficients:
            return np.ones_like(np.asarray(w), dtype=complex)
        u = disc.normalized(w)
        # np.polyval wants highest degree first
        return np.exp(np.polyval(list(self.coefficients)[::-1], u))


@dataclass(frozen=True)
class MayerWeight:
    """e^{G(gamma_j z)} = gamma_j(z)^{2 sigma}, i.e. (j + z)^{-2 sigma} for Gauss branches.

    Uses the principal branch of the logarithm, so branch images must avoid
    the negative real axis.
    """

    sigma: float

    def factor(self, branch: Branch, disc: Disc, z):
        return np.exp(2 * self.sigma * np.log(np.asarray(branch(z), dtype=complex)))


Weight = Union[PolynomialWeight, MayerWeight]


@dataclass(frozen=True)
class ValidationReport:
    margin: float
    rho: float
    samples: int
    branch_sup: tuple = ()
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "rho": self.rho,
            "samples": self.samples,
            "branch_sup": list(self.branch_sup),
            "warnings": list(self.warnings),
        }


@dataclass
class BranchSystem:
    domain: Disc
    branches: list
    weight: Weight = field(default_factory=PolynomialWeight)
    validation: ValidationReport | None = None

    def __post_init__(self):
        if len(self.branches) < 1:
            raise ValueError("a system needs at least one branch")
        self.branches = list(self.branches)

    @property
    def d(self) -> int:
        return len(self.branches)

    def require_validated(self) -> ValidationReport:
        if self.validation is None:
            raise UnvalidatedSystemError("system must be validated before assembly")
        return self.validation


def gauss_branch(j: int) -> MobiusMap:
    """The continued-fraction branch z -> 1/(j + z)."""
    if j < 1:
        raise ValueError(f"Gauss branch index must be >= 1, got {j}")
    return MobiusMap(0, 1, 1, j)


def gauss_system(indices: Sequence[int], sigma: float | None = None) -> BranchSystem:
    """Gauss branches on D(1, 3/2), with G = 0 or the Mayer weight of exponent sigma."""
    weight = PolynomialWeight() if sigma is None else MayerWeight(sigma)
    return BranchSystem(Disc(1.0, 1.5), [gauss_branch(j) for j in indices], weight)


def _boundary_sup(branch: Branch, disc: Disc, n: int) -> float:
    if isinstance(branch, AffineMap):
        # exact: the image is the disc of radius |q| r around p + q (x - p)
        q, p = branch.multiplier, branch.fixed_point
        return float(abs((1 - q) * (p - disc.center)) + abs(q) * disc.radius)
    # |gamma - x| is subharmonic, so its sup over the closed disc sits on the circle
    def dist(theta):
        return abs(complex(branch(disc.center + disc.radius * np.exp(1j * theta))) - disc.center)

    theta = 2 * np.pi * np.arange(n) / n
    values = np.abs(branch(disc.center + disc.radius * np.exp(1j * theta)) - disc.center)
    i = int(np.argmax(values))
    h = 2 * np.pi / n
    res = minimize_scalar(lambda t: -dist(t), bounds=(theta[i] - h, theta[i] + h),
                          method="bounded", options={"xatol": 1e-12})
    return max(float(values[i]), -float(res.fun))


def validate_system(sys: BranchSystem, boundary_samples: int = 512) -> ValidationReport:
    """Check closure(gamma_j(disc)) lies in the disc for every branch; store and return the report."""
    if boundary_samples < 64:
        raise ValueError("boundary_samples must be at least 64")
    disc = sys.domain
    sups = []
    for j, branch in enumerate(sys.branches):
        pole = branch.pole
        if pole is not None and abs(pole - disc.center) <= disc.radius:
            raise ValidationError(f"branch {j} has a pole at {pole} inside the closed disc")
        sups.append(_boundary_sup(branch, disc, boundary_samples))
    margin = disc.radius - max(sups)
    if margin <= MARGIN_TOL * disc.radius:
        worst = int(np.argmax(sups))
        raise ValidationError(
            f"branch {worst} escapes the disc: sup |gamma - x| = {sups[worst]:.17g} "
            f">= radius {disc.radius}"
        )
    notes = []
    if sys.d == 1:
        notes.append("d = 1: the singular-value limit law degenerates for a single branch")
        warnings.warn(notes[-1], stacklevel=2)
    report = ValidationReport(
        margin=float(margin),
        rho=float(max(sups) / disc.radius),
        samples=boundary_samples,
        branch_sup=tuple(float(s) for s in sups),
        warnings=tuple(notes),
    )
    sys.validation = report
    return report


def weight_factor(sys: BranchSystem, j: int, z):
    """e^{G(gamma_j(z))} for branch index j (0-based)."""
    if not 0 <= j < sys.d:
        raise IndexError(f"branch index {j} out of range for d = {sys.d}")
    out = sys.weight.factor(sys.branches[j], sys.domain, z)
    return complex(out) if np.ndim(out) == 0 else out


def weight_sup(sys: BranchSystem, j: int, n: int = 512) -> float:
    """sup over the disc of |e^{G o gamma_j}|, attained on the boundary (maximum principle)."""
    return float(np.max(np.abs(weight_factor(sys, j, sys.domain.boundary(n)))))


# --- system definition files -------------------------------------------------

def _complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        re, im = value
        return complex(float(re), float(im))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _encode_complex(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def system_from_dict(data: dict) -> BranchSystem:
    dom = data["domain"]
    disc = Disc(_complex(dom["center"]), float(dom["radius"]))
    branches = []
    for b in data["branches"]:
        kind = b["kind"]
        if kind == "gauss":
            branches.append(gauss_branch(int(b["j"])))
        elif kind == "mobius":
            branches.append(MobiusMap(*(_complex(b[k]) for k in "abcd")))
        elif kind == "affine":
            branches.append(AffineMap(_complex(b["fixed_point"]), _complex(b["multiplier"])))
        else:
            raise ValueError(f"unknown branch kind {kind!r}")
    w = data.get("weight") or {"kind": "zero"}
    if w["kind"] == "zero":
        weight = PolynomialWeight()
    elif w["kind"] == "polynomial":
        weight = PolynomialWeight(tuple(_complex(c) for c in w["coefficients"]))
    elif w["kind"] == "mayer":
        weight = MayerWeight(float(w["sigma"]))
    else:
        raise ValueError(f"unknown weight kind {w['kind']!r}")
    return BranchSystem(disc, branches, weight)


def system_to_dict(sys: BranchSystem) -> dict:
    branches = []
    for b in sys.branches:
        if isinstance(b, MobiusMap):
            if b.a == 0 and b.b == 1 and b.c == 1 and complex(b.d).imag == 0 and complex(b.d).real >= 1 \
                    and float(complex(b.d).real).is_integer():
                branches.append({"kind": "gauss", "j": int(complex(b.d).real)})
            else:
                branches.append({"kind": "mobius", **{k: _encode_complex(getattr(b, k)) for k in "abcd"}})
        else:
            branches.append({"kind": "affine", "fixed_point": _encode_complex(b.fixed_point),
                             "multiplier": _encode_complex(b.multiplier)})
    if isinstance(sys.weight, MayerWeight):
        weight = {"kind": "mayer", "sigma": sys.weight.sigma}
    elif sys.weight.coefficients:
        weight = {"kind": "polynomial", "coefficients": [_encode_complex(c) for c in sys.weight.coefficients]}
    else:
        weight = {"kind": "zero"}
    return {
        "domain": {"center": _encode_complex(sys.domain.center), "radius": sys.domain.radius},
        "branches": branches,
        "weight": weight,
    }


def load_system(path) -> BranchSystem:
    """Read a YAML (or JSON) system definition file."""
    with open(Path(path)) as fh:
        return system_from_dict(yaml.safe_load(fh))
