import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from twisted_transfer import (
    bell,
    estimate_moments,
    limit_moments_L,
    poisson_combo_moment,
    poisson_moment,
    run_monte_carlo,
    stirling,
)
from twisted_transfer.assembly import OverlapMatrix
from twisted_transfer.stats import (
    MonteCarloConfig,
    TrialRecord,
    central_moment_jackknife,
    dobinski,
    limit_moment_poisson,
    mean_and_se,
    pair_words,
    read_records,
)


def set_partitions(n):
    # brute-force enumeration of set partitions of {0..n-1} as block-label tuples
    def rec(i, labels, nblocks):
        if i == n:
            yield labels
            return
        for b in range(nblocks + 1):
            yield from rec(i + 1, labels + (b,), max(nblocks, b + 1))
    yield from rec(0, (), 0)


def test_bell_small():
    assert [bell(k) for k in range(5)] == [1, 1, 2, 5, 15]


@pytest.mark.parametrize("k", range(0, 7))
def test_stirling_brute_force(k):
    counts = {}
    for labels in set_partitions(k):
        nb = len(set(labels))
        counts[nb] = counts.get(nb, 0) + 1
    for l in range(k + 1):
        assert stirling(k, l) == counts.get(l, 0)
    assert stirling(4, 2) == 7


@pytest.mark.parametrize("k", range(13))
def test_bell_stirling_poisson_dobinski(k):
    assert bell(k) == sum(stirling(k, l) for l in range(k + 1))
    assert poisson_moment(1, k) == bell(k)
    assert poisson_combo_moment([1], k) == bell(k)
    assert dobinski(k) == pytest.approx(bell(k), rel=1e-10)


def test_poisson_moment_general_rate():
    for lam in (0.3, 2.5):
        ks = np.arange(200)
        pmf = poisson.pmf(ks, lam)
        for k in range(6):
            assert poisson_moment(lam, k) == pytest.approx(np.sum(pmf * ks.astype(float) ** k), rel=1e-12)


def test_combo_examples():
    assert poisson_combo_moment([0, 0], 3) == 0
    assert poisson_combo_moment([0, 0], 0) == 1
    assert poisson_combo_moment([1, 1], 2) == 6
    assert isinstance(poisson_combo_moment([Fraction(1, 3), 2], 4), Fraction)


def test_combo_caps():
    with pytest.raises(ValueError):
        poisson_combo_moment([1], 13)
    with pytest.raises(ValueError):
        poisson_combo_moment([1] * 11, 2)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=3), st.integers(0, 5))
def test_combo_against_direct_expectation(alphas, k):
    # direct sum over the truncated joint Poisson pmf
    support = np.arange(40)
    pmf = poisson.pmf(support, 1.0)
    total = 0.0
    for idx in product(range(40), repeat=len(alphas)):
        w = np.prod(pmf[list(idx)])
        if w < 1e-30:
            continue
        total += w * sum(a * support[i] for a, i in zip(alphas, idx)) ** k
    scale = max(1.0, sum(abs(a) for a in alphas)) ** k * bell(k)
    assert abs(poisson_combo_moment(alphas, k) - total) <= 1e-9 * scale


def test_combo_exact_rational():
    # E[(Z1 + 2 Z2)^2] = Var + mean^2 = (1 + 4) + 9
    assert poisson_combo_moment([Fraction(1), Fraction(2)], 2) == 14


def test_limit_moments_examples():
    assert [limit_moments_L(np.array([[2.0]]), k) for k in (2, 3, 4)] == [0, 0, 0]
    assert limit_moments_L(np.array([[2.0]]), 1) == 2
    h = 0.7
    H = np.array([[1.0, h], [h, 1.5]])
    assert limit_moments_L(H, 2) == pytest.approx(4 * h**2)
    assert limit_moments_L(H, 3) == pytest.approx(8 * h**3)
    assert limit_moments_L(H, 4) == pytest.approx(16 * h**4 + 48 * h**4)
    with pytest.raises(ValueError):
        limit_moments_L(H, 5)


def test_gauss_L2_positive(H23):
    assert limit_moments_L(H23, 2) > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32))
def test_poisson_dual_path(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = A @ A.conj().T
    for k in (2, 3, 4):
        closed = limit_moments_L(H, k)
        dual = limit_moment_poisson(H, k)
        assert dual == pytest.approx(closed, rel=1e-9, abs=1e-9 * max(1.0, abs(closed)))


def test_jackknife_matches_brute_force():
    x = np.random.default_rng(3).gamma(2.0, size=60)
    for k in (2, 3, 4):
        est, se = central_moment_jackknife(x, k)
        loo = np.array([np.mean((np.delete(x, i) - np.delete(x, i).mean()) ** k) for i in range(len(x))])
        se_bf = np.sqrt((len(x) - 1) / len(x) * np.sum((loo - loo.mean()) ** 2))
        assert est == pytest.approx(np.mean((x - x.mean()) ** k))
        assert se == pytest.approx(se_bf, rel=1e-10)
        est_c, se_c = central_moment_jackknife(x, k, center=2.0)
        loo_c = np.array([np.mean((np.delete(x, i) - 2.0) ** k) for i in range(len(x))])
        assert est_c == pytest.approx(np.mean((x - 2.0) ** k))
        assert se_c == pytest.approx(np.sqrt((len(x) - 1) / len(x) * np.sum((loo_c - loo_c.mean()) ** 2)))


def _cfg(H, **kw):
    base = dict(H=H, N=30, trials=12, master_seed=5)
    base.update(kw)
    return MonteCarloConfig(**base)


def test_prefix_stability(H23):
    short = run_monte_carlo(_cfg(H23, trials=5))
    long = run_monte_carlo(_cfg(H23, trials=12))
    assert short == long[:5]
    tail = run_monte_carlo(_cfg(H23, trials=7, first_trial=5))
    assert tail == long[5:]


def test_thread_count_does_not_change_records(H23):
    assert run_monte_carlo(_cfg(H23, threads=1)) == run_monte_carlo(_cfg(H23, threads=4))


def test_identity_mode_records_identical(H23):
    recs = run_monte_carlo(_cfg(H23, identity_hom=True))
    values = {(r.hs_norm_sq, tuple(r.fixed_point_counts.items())) for r in recs}
    assert len(values) == 1
    assert recs[0].fixed_point_counts == {"a1^-1a2": 30}


def test_too_few_trials(H23):
    with pytest.raises(ValueError):
        run_monte_carlo(_cfg(H23, trials=1))
    rec = run_monte_carlo(_cfg(H23, trials=2))
    with pytest.raises(ValueError):
        estimate_moments(rec[:1])


def test_records_stream_roundtrip(H23, tmp_path):
    path = tmp_path / "r.jsonl"
    recs = run_monte_carlo(_cfg(H23, record_path=path))
    assert read_records(path) == recs


def test_trace_powers_recorded(H23, ops23):
    from twisted_transfer.limit import gram_element
    from twisted_transfer.twisted import trace_power_restricted
    from twisted_transfer.freegroup import sample_homomorphism
    X = gram_element(ops23)
    recs = run_monte_carlo(_cfg(H23, trials=3, algebra_element=X, powers=[1, 2]))
    for r in recs:
        hom = sample_homomorphism(2, 30, r.seed)
        assert r.trace_powers["2"] == pytest.approx(trace_power_restricted(X, hom, 2), rel=1e-12)


def test_pair_words():
    assert pair_words(3) == [(-1, 2), (-1, 3), (-2, 3)]


def test_mean_matches_first_limit(H23):
    N, T = 200, 3000
    recs = run_monte_carlo(MonteCarloConfig(H=H23, N=N, trials=T, master_seed=17))
    m, se = mean_and_se([r.hs_norm_sq / N for r in recs])
    # E F_N(a_1^{-1} a_2) = 1 exactly, so E ||L_N||^2 / N = L_1 + 2 Re H_12 / N
    target = limit_moments_L(H23, 1) + 2 * H23.H[0, 1].real / N
    assert abs(m - target) <= 3 * se


def test_moment_report_fields(H23):
    recs = run_monte_carlo(MonteCarloConfig(H=H23, N=50, trials=200, master_seed=1))
    rep = estimate_moments(recs, H23)
    assert [r.k for r in rep.rows] == [2, 3, 4]
    assert rep.row(2).target == pytest.approx(limit_moments_L(H23, 2))
    assert all(r.se > 0 for r in rep.rows)
    assert rep.trials == 200
    d = rep.to_dict()
    assert d["rows"][1]["k"] == 3
