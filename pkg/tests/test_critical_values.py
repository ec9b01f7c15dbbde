import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hsmuce.critical_values import (
    RNG_ID,
    balance,
    cache_path,
    check_weights,
    critical_values,
    empirical_level,
    get_cache,
    load_cache,
    simulate_statistics,
    store_cache,
)
from hsmuce.errors import CacheCorruptError, CacheVersionError, DomainError, ResourceError
from hsmuce.intervals import build
from hsmuce.multiscale import scale_maxima
from hsmuce.special import f_cdf, f_quantile


@pytest.fixture(scope="module")
def cache64():
    return simulate_statistics(64, "dyadic", M=10_000, seed=11)


def rates(cache, cv):
    return empirical_level(cache, cv.q, cv.labels)


def check_conditions(cache, cv):
    M = cache.M
    joint, per = rates(cache, cv)
    assert cv.alpha - 1 / M < joint <= cv.alpha
    active = np.flatnonzero(cv.weights > 0)
    for a in active:
        for b in active:
            assert per[a] / cv.weights[a] <= (per[b] + 1 / M) / cv.weights[b] + 1e-12


def test_single_scale_draws():
    c = simulate_statistics(2, "dyadic", M=5, seed=3)
    assert c.n_sim == 2 and c.labels == (1,) and c.sorted.shape == (1, 5)
    assert np.all(np.isfinite(c.sorted)) and np.all(np.diff(c.sorted[0]) >= 0)


def test_rounds_up_to_power_of_two():
    assert simulate_statistics(100, "dyadic", M=4, seed=0).n_sim == 128


def test_matches_direct_per_repetition_evaluation():
    c = simulate_statistics(16, "dyadic-length", M=20, seed=5)
    s = build(16, "dyadic-length")
    raw = c.raw()
    for r in (0, 7, 19):
        z = np.random.Generator(np.random.Philox(key=5, counter=[0, 0, r, 0])).standard_normal(16)
        np.testing.assert_allclose(raw[r], scale_maxima(z, s), rtol=1e-10)


def test_independent_of_jobs():
    a = simulate_statistics(32, "dyadic", M=300, seed=9)
    b = simulate_statistics(32, "dyadic", M=300, seed=9, n_jobs=2)
    assert np.array_equal(a.sorted, b.sorted) and np.array_equal(a.order, b.order)


def test_per_scale_null_law(cache64):
    n = 64
    for pos, k in enumerate(cache64.labels):
        count = n // 2 ** k
        res = stats.kstest(cache64.sorted[pos], lambda x: f_cdf(np.maximum(x, 0.0), 2 ** k - 1) ** count)
        assert res.pvalue > 1e-3, (k, res)


def test_memory_budget():
    with pytest.raises(ResourceError):
        simulate_statistics(1024, "dyadic", M=1000, seed=0, max_bytes=1000)


def test_domain_errors(cache64):
    with pytest.raises(DomainError):
        simulate_statistics(64, M=1)
    with pytest.raises(DomainError):
        balance(cache64, 1.0)
    with pytest.raises(DomainError):
        balance(cache64, 0.1, np.zeros(6))
    with pytest.raises(DomainError):
        check_weights([0.5, 0.4], 2)


def test_single_scale_quantile():
    c = simulate_statistics(2, "dyadic", M=10_000, seed=1)
    cv = balance(c, 0.1)
    assert cv.q[0] == c.sorted[0, 10_000 - 1000 - 1]
    assert abs(cv.q[0] - f_quantile(0.9, 1)) < 2.0 + 2.0


def test_zero_weight_omits_scale(cache64):
    w = np.array([0.3, 0.0, 0.2, 0.2, 0.2, 0.1])
    cv = balance(cache64, 0.2, w)
    assert cv.q[1] == np.inf
    assert np.all(np.isfinite(np.delete(cv.q, 1)))
    check_conditions(cache64, cv)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.6), st.lists(st.floats(0.05, 1.0), min_size=6, max_size=6))
def test_empirical_conditions(cache64, alpha, raw_w):
    w = np.array(raw_w) / np.sum(raw_w)
    w[-1] = 1.0 - w[:-1].sum()
    check_conditions(cache64, balance(cache64, alpha, w))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.8), st.floats(0.01, 0.8))
def test_monotone_in_alpha(cache64, a1, a2):
    lo, hi = sorted((a1, a2))
    assert np.all(balance(cache64, hi).q <= balance(cache64, lo).q)


def test_weighted_bonferroni_floor(cache64):
    for alpha in (0.05, 0.1, 0.3, 0.5):
        cv = balance(cache64, alpha)
        _, per = rates(cache64, cv)
        assert np.all(per >= alpha * cv.weights - 2 / cache64.M)


def test_store_load_round_trip(tmp_path, cache64):
    p = store_cache(cache64, tmp_path / "c.hsmcv")
    back = load_cache(p)
    assert (back.n_sim, back.M, back.seed, back.kind, back.labels, back.rng_id) == (
        64, 10_000, 11, "dyadic-partition", cache64.labels, RNG_ID)
    assert np.array_equal(back.sorted, cache64.sorted) and np.array_equal(back.order, cache64.order)
    assert not list(tmp_path.glob("*.tmp"))


def test_identical_bytes(tmp_path):
    a = store_cache(simulate_statistics(32, "dyadic", 200, 4), tmp_path / "a")
    b = store_cache(simulate_statistics(32, "dyadic", 200, 4), tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()


def test_truncated_and_version(tmp_path, cache64):
    p = store_cache(cache64, tmp_path / "c.hsmcv")
    data = p.read_bytes()
    (tmp_path / "t").write_bytes(data[:-8])
    with pytest.raises(CacheCorruptError):
        load_cache(tmp_path / "t")
    (tmp_path / "g").write_bytes(b"garbage")
    with pytest.raises(CacheCorruptError):
        load_cache(tmp_path / "g")
    bumped = bytearray(data)
    bumped[6] += 1
    (tmp_path / "v").write_bytes(bytes(bumped))
    with pytest.raises(CacheVersionError, match="version"):
        load_cache(tmp_path / "v")


def test_cache_dir_persists(tmp_path):
    c = get_cache(20, "dyadic", 50, 2, tmp_path)
    path = cache_path(tmp_path, "dyadic", 32, 50, 2)
    assert path.exists() and RNG_ID in path.name
    again = get_cache(20, "dyadic", 50, 2, tmp_path)
    assert np.array_equal(c.sorted, again.sorted)


def test_restricted_to_target_scales(tmp_path):
    cv = critical_values(100, 0.1, kind="dyadic", M=500, seed=0, cache_dir=tmp_path)
    assert cv.n_sim == 128 and cv.labels == (1, 2, 3, 4, 5, 6)
    assert len(cv.for_system(build(100, "dyadic"))) == 6
