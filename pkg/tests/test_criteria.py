from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bucket, random_design
from daenum.canon import IsomorphismOp, apply
from daenum.criteria import (
    AberrationProfile,
    FrequencyVector,
    JSpectrum,
    alias_matrix,
    alias_trace,
    frequency_vector,
    g_key,
    j_spectrum,
    order_g,
    order_g2,
    profile,
    profiles,
    rank_g,
    rank_g2,
)
from daenum.design import DesignMatrix, FormSpec
from daenum.errors import OrderError, ShapeError, SingularModelError
from daenum.oracle import brute_force_bias, brute_force_j


def _full_factorial(k):
    return DesignMatrix.from_levels(np.array(list(product([-1, 1], repeat=k))))


def test_low_orders_on_n1(small_catalogs):
    for d in bucket(small_catalogs[13], 8):
        assert set(j_spectrum(d, 1).values) == {1}
        assert set(j_spectrum(d, 2).values) == {1}


def test_order_range(rng):
    d = random_design(rng, 9, 4)
    with pytest.raises(OrderError):
        j_spectrum(d, 0)
    with pytest.raises(OrderError):
        j_spectrum(d, 5)
    with pytest.raises(OrderError):
        alias_trace(d, 4)
    with pytest.raises(OrderError):
        alias_trace(d, 1)


def test_frequency_vector_examples():
    assert frequency_vector(JSpectrum(3, (1, 1, 1))).entries == ((1, 3),)
    assert frequency_vector(JSpectrum(3, (17, 1, 1, 0))).entries == ((17, 1), (1, 2), (0, 1))
    fv = FrequencyVector(3, ((17, 1), (1, 2), (0, 1)))
    assert FrequencyVector.decode(3, fv.encode()) == fv
    assert FrequencyVector.decode(4, "") == FrequencyVector(4, ())


def test_seventeen_run_six_factor_g_winner(catalog17_low):
    best = rank_g(bucket(catalog17_low, 6))[0]
    assert frequency_vector(j_spectrum(best, 3)).leading == (1, 20)
    assert frequency_vector(j_spectrum(best, 4)).leading == (17, 1)


def test_published_traces(catalog17_low):
    best = rank_g(bucket(catalog17_low, 5))[0]
    assert round(alias_trace(best, 2).value, 3) == 0.103
    assert round(alias_trace(best, 3).value, 3) == 0.103


def test_oa_has_zero_traces():
    d = _full_factorial(4)
    assert alias_trace(d, 2).value == pytest.approx(0, abs=1e-12)
    assert alias_trace(d, 3).value == pytest.approx(0, abs=1e-12)
    assert set(j_spectrum(d, 3).values) == {0}


def test_singular_model(rng):
    d = random_design(rng, 10, 3)
    dup = d.with_column(d.column(0))
    with pytest.raises(SingularModelError):
        alias_trace(dup, 2)


def test_trace_is_frobenius_norm(small_catalogs):
    d = bucket(small_catalogs[14], 7)[5]
    a = alias_matrix(d, 2)
    assert a.shape == (7, comb(7, 2))
    assert alias_trace(d, 2).value == pytest.approx(np.trace(a @ a.T), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20), k=st.integers(1, 9))
def test_j_matches_brute_force(seed, n, k):
    d = random_design(np.random.default_rng(seed), n, k)
    for s in range(1, k + 1):
        assert j_spectrum(d, s) == brute_force_j(d, s)


def test_j_parity_and_bound(rng):
    for _ in range(100):
        n = int(rng.integers(2, 19))
        d = random_design(rng, n, 5)
        for s in (1, 2, 3):
            vals = j_spectrum(d, s).values
            assert all(v <= n and (v - n) % 2 == 0 for v in vals)
            assert sum(c for _, c in frequency_vector(j_spectrum(d, s)).entries) == comb(5, s)


def test_j_invariant_under_ops(small_catalogs, rng):
    d = bucket(small_catalogs[14], 9)[0]
    base = {s: sorted(j_spectrum(d, s).values) for s in (3, 4)}
    for _ in range(200):
        e = apply(IsomorphismOp.random(14, 9, rng), d)
        for s in (3, 4):
            assert sorted(j_spectrum(e, s).values) == base[s]


def test_bias_oracle(small_catalogs, catalog17_low):
    designs = [bucket(catalog17_low, 6)[0], bucket(small_catalogs[10], 5)[0], bucket(small_catalogs[14], 8, "G5-4")[3]]
    for d in designs:
        for i in (2, 3):
            assert brute_force_bias(d, i, trials=50) < 1e-9
    # boundary order i = k - 1
    d = bucket(small_catalogs[10], 5)[1]
    assert brute_force_bias(d, 4, trials=10) < 1e-9


def test_profiles_batch_matches_single(small_catalogs):
    ds = bucket(small_catalogs[13], 7)
    batch = profiles(ds, FormSpec.n1())
    for d, p in zip(ds, batch):
        q = profile(d, FormSpec.n1())
        assert p.f3 == q.f3 and p.f4 == q.f4
        assert p.c2 == pytest.approx(q.c2, rel=1e-12) and p.c3 == pytest.approx(q.c3, rel=1e-12)
        assert p.c2 >= 0 and p.c3 >= 0


def test_profiles_shape_check(small_catalogs):
    with pytest.raises(ShapeError):
        profiles([bucket(small_catalogs[13], 7)[0], bucket(small_catalogs[13], 6)[0]])


def test_rank_singleton_and_shapes(small_catalogs):
    d = bucket(small_catalogs[13], 12)[0]
    assert rank_g([d]) == [d] and rank_g2([d]) == [d]
    with pytest.raises(ShapeError):
        rank_g([d, bucket(small_catalogs[13], 11)[0]])
    with pytest.raises(ShapeError):
        rank_g2([d, bucket(small_catalogs[13], 11)[0]])


def test_rank_order_invariant(small_catalogs, rng):
    ds = bucket(small_catalogs[14], 7)
    ref_g, ref_g2 = rank_g(ds), rank_g2(ds)
    for _ in range(3):
        shuffled = [ds[t] for t in rng.permutation(len(ds))]
        assert rank_g(shuffled) == ref_g
        assert rank_g2(shuffled) == ref_g2


def test_rank_g_is_sorted(small_catalogs):
    ds = bucket(small_catalogs[14], 7)
    keys = [g_key(profile(d), 14) for d in rank_g(ds)]
    assert keys == sorted(keys)
    c2 = [profile(d).c2 for d in rank_g2(ds)]
    assert all(a <= b + 1e-9 for a, b in zip(c2, c2[1:]))


def test_form_tiebreak():
    # at an F tie the (k/2, k/2+1) form comes first whatever the key order
    f3, f4 = FrequencyVector(3, ((2, 4),)), FrequencyVector(4, ((6, 1),))
    hi = AberrationProfile(f3, f4, 1.0, 2.0, FormSpec.n2(4, 3))
    lo = AberrationProfile(f3, f4, 1.0, 2.0, FormSpec.n2(3, 4))
    assert order_g([hi, lo], 14, tiebreak=[b"a", b"b"]) == [1, 0]
    assert order_g2([hi, lo], 14, tiebreak=[b"a", b"b"]) == [1, 0]


def test_g2_tolerance():
    f3 = FrequencyVector(3, ((2, 4),))
    worse_g = AberrationProfile(f3, FrequencyVector(4, ((6, 2),)), 1.0, 2.0)
    better_g = AberrationProfile(f3, FrequencyVector(4, ((6, 1),)), 1.0 + 1e-13, 2.0)
    # C values equal within tolerance, so G-aberration decides
    assert order_g2([worse_g, better_g], 14) == [1, 0]
    clear = AberrationProfile(f3, FrequencyVector(4, ((6, 2),)), 0.9, 5.0)
    assert order_g2([better_g, clear], 14) == [1, 0]
