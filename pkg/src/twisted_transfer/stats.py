"""Poisson combinatorics, limit moments of ||L_N||_2^2 and Monte Carlo estimation."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import OverlapMatrix
from .freegroup import (
    Word,
    evaluate_word,
    identity_hom,
    sample_homomorphism,
    trial_seed,
    word_str,
)
from .twisted import hs_norm_trace_formula, trace_from_table, trace_table


# --- combinatorics -----------------------------------------------------------

@lru_cache(maxsize=None)
def bell(k: int) -> int:
    """Bell numbers from B_{k+1} = sum_l C(k, l) B_l."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1
    return sum(math.comb(k - 1, l) * bell(l) for l in range(k))


@lru_cache(maxsize=None)
def stirling(k: int, l: int) -> int:
    """Stirling numbers of the second kind S(k, l)."""
    if k < 0 or l < 0:
        raise ValueError("negative arguments")
    if k == 0 and l == 0:
        return 1
    if k == 0 or l == 0:
        return 0
    return l * stirling(k - 1, l) + stirling(k - 1, l - 1)


def poisson_moment(lam, k: int):
    """E[Z^k] for Z ~ Poisson(lam)."""
    return sum(stirling(k, l) * lam**l for l in range(k + 1))


def dobinski(k: int, terms: int = 200) -> float:
    """Partial Dobinski sum e^{-1} sum_{l < terms} l^k / l!."""
    parts = [math.exp(k * math.log(l) - math.lgamma(l + 1)) for l in range(1, terms)]
    if k == 0:
        parts.append(1.0)
    return math.fsum(parts) / math.e


def _compositions(k: int, m: int):
    if m == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(k - first, m - 1):
            yield (first,) + rest


def poisson_combo_moment(alphas: Sequence, k: int):
    """E[(sum_p alpha_p Z_p)^k] for independent unit Poisson Z_p, via the multinomial/Bell sum.

    Exact when the alphas are ints or Fractions.
    """
    if k < 0 or k > 12:
        raise ValueError("moment order must be in 0..12")
    if len(alphas) > 10:
        raise ValueError("at most 10 coefficients")
    if len(alphas) == 0:
        return 1 if k == 0 else 0
    total = 0
    for ls in _compositions(k, len(alphas)):
        coeff = Fraction(math.factorial(k), math.prod(math.factorial(l) for l in ls))
        term = coeff * math.prod(bell(l) for l in ls)
        for a, l in zip(alphas, ls):
            term = term * a**l
        total = total + term
    return total


def _offdiag_real(H) -> np.ndarray:
    H = H.H if isinstance(H, OverlapMatrix) else np.asarray(H)
    iu = np.triu_indices(H.shape[0], k=1)
    return np.real(H[iu])


def limit_moments_L(H, k: int) -> float:
    """L_1 = sum_j H_jj; L_2, L_3, L_4 are the limit centered moments of ||L_N||_2^2."""
    Hm = H.H if isinstance(H, OverlapMatrix) else np.asarray(H)
    h = _offdiag_real(Hm)
    if k == 1:
        return float(np.sum(np.real(np.diag(Hm))))
    if k == 2:
        return float(4 * np.sum(h**2))
    if k == 3:
        return float(8 * np.sum(h**3))
    if k == 4:
        return float(16 * np.sum(h**4) + 48 * np.sum(h**2) ** 2)
    raise ValueError("closed forms exist for k = 1..4 only")


def limit_moment_poisson(H, k: int) -> float:
    """E[(2 Z + D_0)^k] with Z = sum_{i<j} Re(H_ij) Z_ij and D_0 = -2 sum Re(H_ij)."""
    h = [float(v) for v in _offdiag_real(H)]
    D0 = -2 * sum(h)
    return float(sum(math.comb(k, l) * 2**l * poisson_combo_moment(h, l) * D0 ** (k - l)
                     for l in range(k + 1)))


# --- Monte Carlo ---------------------------------------------------------------

@dataclass
class TrialRecord:
    seed: int
    N: int
    d: int
    L: int
    hs_norm_sq: float
    fixed_point_counts: dict = field(default_factory=dict)
    trace_powers: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class MonteCarloConfig:
    H: OverlapMatrix
    N: int
    trials: int
    master_seed: int = 0
    L: int = 0
    words: Sequence[Word] = ()
    algebra_element: object = None
    powers: Sequence[int] = ()
    identity_hom: bool = False
    threads: int = 1
    record_path: str | Path | None = None
    first_trial: int = 0


def pair_words(d: int) -> list[Word]:
    """The primitive words a_i^{-1} a_j, i < j (1-based)."""
    return [(-i, j) for i in range(1, d + 1) for j in range(i + 1, d + 1)]


def _run_trial(cfg: MonteCarloConfig, index: int, tables: dict) -> TrialRecord:
    d = cfg.H.d
    seed = trial_seed(cfg.master_seed, index)
    hom = identity_hom(d, cfg.N) if cfg.identity_hom else sample_homomorphism(d, cfg.N, seed)
    inv = hom.inverses()
    counts = {}
    for w in cfg.words or pair_words(d):
        perm = evaluate_word(hom, w, inv)
        counts[word_str(w)] = int(np.count_nonzero(perm == np.arange(cfg.N)))
    powers = {str(p): trace_from_table(t, hom, inv) for p, t in tables.items()}
    return TrialRecord(seed, cfg.N, d, cfg.L, hs_norm_trace_formula(cfg.H, hom), counts, powers)


def run_monte_carlo(cfg: MonteCarloConfig) -> list[TrialRecord]:
    """Independent trials with seeds derived from the master seed; output order is trial order."""
    if cfg.trials < 2:
        raise ValueError("need at least 2 trials")
    indices = range(cfg.first_trial, cfg.first_trial + cfg.trials)
    tables = {}
    if cfg.algebra_element is not None:
        tables = {p: trace_table(cfg.algebra_element, p) for p in cfg.powers}
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            records = list(pool.map(lambda i: _run_trial(cfg, i, tables), indices))
    else:
        records = [_run_trial(cfg, i, tables) for i in indices]
    if cfg.record_path is not None:
        write_records(cfg.record_path, records)
    return records


def write_records(path, records: Sequence[TrialRecord], header: dict | None = None) -> None:
    with open(path, "w") as fh:
        if header is not None:
            fh.write(json.dumps({"provenance": header}, sort_keys=True) + "\n")
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path) -> list[TrialRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            if "provenance" in obj:
                continue
            out.append(TrialRecord(**obj))
    return out


# --- estimators -------------------------------------------------------------

@dataclass(frozen=True)
class MomentRow:
    k: int
    empirical: float
    se: float
    target: float | None
    z_score: float | None


@dataclass(frozen=True)
class MomentReport:
    rows: tuple
    trials: int
    mean: float

    def row(self, k: int) -> MomentRow:
        return next(r for r in self.rows if r.k == k)

    def to_dict(self) -> dict:
        return {"trials": self.trials, "mean": self.mean, "rows": [asdict(r) for r in self.rows]}


def central_moment_jackknife(x, k: int, center: float | None = None) -> tuple[float, float]:
    """k-th central moment (1/n normalisation) and its delete-one jackknife standard error.

    With ``center=None`` the empirical mean is re-estimated in every replicate.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    m = x.mean() if center is None else center
    y = x - m
    est = float(np.mean(y**k))
    P = [np.sum(y**t) for t in range(k + 1)]
    shift = -y / (n - 1) if center is None else np.zeros(n)
    loo = np.zeros(n)
    for t in range(k + 1):
        loo += math.comb(k, t) * (-shift) ** (k - t) * (P[t] - y**t)
    loo /= n - 1
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return est, se


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def estimate_moments(records: Sequence[TrialRecord], H=None, k_max: int = 4,
                     centering: float | None = None) -> MomentReport:
    """Centered moments k = 2..k_max of hs_norm_sq with jackknife SEs and limit targets."""
    if len(records) < 2:
        raise ValueError("need at least 2 trial records")
    x = np.array([r.hs_norm_sq for r in records])
    rows = []
    for k in range(2, k_max + 1):
        emp, se = central_moment_jackknife(x, k, centering)
        target = limit_moments_L(H, k) if H is not None and k <= 4 else None
        degenerate = se <= 1e-12 * max(1.0, abs(emp))
        z = None if target is None or degenerate else (emp - target) / se
        rows.append(MomentRow(k, emp, se, target, z))
    return MomentReport(tuple(rows), len(records), float(x.mean()))
