"""Reduced words in the free group F^d and random homomorphisms F^d -> S_N.

A word is a tuple of signed generator indices: ``k`` stands for a_k and ``-k``
for a_k^{-1} (1-based). Permutations are integer arrays ``p`` with ``p[i]`` the
image of ``i``. A word l_1 l_2 ... l_k evaluates to the composition
sigma_{l_1} o sigma_{l_2} o ... o sigma_{l_k}, so that the associated
permutation matrices multiply in word order.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

Word = tuple

IDENTITY: Word = ()


def reduce_word(letters, d: int | None = None) -> Word:
    out: list[int] = []
    for g in letters:
        g = int(g)
        if g == 0 or (d is not None and abs(g) > d):
            raise ValueError(f"generator index {g} outside +-1..+-{d}")
        if out and out[-1] == -g:
            out.pop()
        else:
            out.append(g)
    return tuple(out)


def inverse_word(w: Word) -> Word:
    return tuple(-g for g in reversed(w))


def word_mul(u: Word, v: Word) -> Word:
    # u and v are reduced, so cancellation only happens at the junction
    i = 0
    n = min(len(u), len(v))
    while i < n and u[len(u) - 1 - i] == -v[i]:
        i += 1
    return u[: len(u) - i] + v[i:]


def word_power(w: Word, k: int) -> Word:
    base = w if k >= 0 else inverse_word(w)
    out = IDENTITY
    for _ in range(abs(k)):
        out = word_mul(out, base)
    return out


def word_str(w: Word) -> str:
    if not w:
        return "e"
    return "".join(f"a{g}" if g > 0 else f"a{-g}^-1" for g in w)


def parse_word(text: str) -> Word:
    """Inverse of :func:`word_str`, e.g. ``"a1^-1a2"`` -> (-1, 2)."""
    text = text.replace(" ", "")
    if text in ("", "e"):
        return IDENTITY
    letters = []
    for part in text.split("a")[1:]:
        if part.endswith("^-1"):
            letters.append(-int(part[:-3]))
        else:
            letters.append(int(part))
    return reduce_word(letters)


@dataclass(frozen=True)
class RandomHom:
    """phi_N : F^d -> S_N, stored as the d generator images (shape (d, N))."""

    generators: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=np.int64)
        if gens.ndim != 2:
            raise ValueError("generators must be a (d, N) array")
        object.__setattr__(self, "generators", gens)

    @property
    def d(self) -> int:
        return self.generators.shape[0]

    @property
    def N(self) -> int:
        return self.generators.shape[1]

    def inverses(self) -> np.ndarray:
        inv = np.empty_like(self.generators)
        rows = np.arange(self.d)[:, None]
        inv[rows, self.generators] = np.arange(self.N)[None, :]
        return inv


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit seed for trial ``index``, mixed from the master seed (prefix-stable)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_homomorphism(d: int, N: int, seed: int) -> RandomHom:
    """d independent uniform permutations, drawn by Fisher-Yates from a Philox stream."""
    if d < 1 or N < 1:
        raise ValueError("need d >= 1 and N >= 1")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    gens = np.stack([rng.permutation(N) for _ in range(d)])
    return RandomHom(gens, int(seed))


def identity_hom(d: int, N: int) -> RandomHom:
    return RandomHom(np.tile(np.arange(N), (d, 1)), None)


def evaluate_word(hom: RandomHom, w: Word, inverses: np.ndarray | None = None) -> np.ndarray:
    if any(abs(g) > hom.d or g == 0 for g in w):
        raise ValueError(f"word {w} uses generators outside 1..{hom.d}")
    inv = hom.inverses() if inverses is None and any(g < 0 for g in w) else inverses
    perm = np.arange(hom.N)
    for g in reversed(w):
        perm = (hom.generators[g - 1] if g > 0 else inv[-g - 1])[perm]
    return perm


def fixed_points(hom: RandomHom, w: Word, inverses: np.ndarray | None = None) -> int:
    perm = evaluate_word(hom, w, inverses)
    return int(np.count_nonzero(perm == np.arange(hom.N)))


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    """U with U e_i = e_{perm[i]}, so U_{s o t} = U_s U_t."""
    n = len(perm)
    U = np.zeros((n, n))
    U[perm, np.arange(n)] = 1.0
    return U


def divisor_count(k: int) -> int:
    if k < 1:
        raise ValueError("k must be a positive integer")
    count, i = 0, 1
    while i * i <= k:
        if k % i == 0:
            count += 1 if i * i == k else 2
        i += 1
    return count


def covariance_V(k1: int, k2: int) -> int:
    """Limit covariance of F_N(gamma^k1) and F_N(gamma^k2): sum of divisors of gcd(k1, k2)."""
    g = gcd(k1, k2)
    return sum(k for k in range(1, g + 1) if g % k == 0)


def is_reduced(w: Word) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def ball_words(d: int, R: int) -> list[Word]:
    """All reduced words of length <= R, ordered by length then lexicographically."""
    letters = [g for k in range(1, d + 1) for g in (k, -k)]
    layer = [IDENTITY]
    out = [IDENTITY]
    for _ in range(R):
        nxt = [w + (g,) for w in layer for g in letters if not w or w[-1] != -g]
        out.extend(nxt)
        layer = nxt
    return out
