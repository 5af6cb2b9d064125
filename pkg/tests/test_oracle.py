import numpy as np
import pytest

from conftest import bucket, random_design
from daenum.canon import are_isomorphic
from daenum.criteria import frequency_vector, j_spectrum, rank_g
from daenum.design import DesignMatrix, FormSpec, matches_form
from daenum.errors import OracleScaleError
from daenum.oracle import brute_force_bias, brute_force_catalog, brute_force_j

from test_criteria import _full_factorial


def test_small_class_counts():
    assert len(brute_force_catalog(5, 3)[FormSpec.n1()]) == 2
    assert len(brute_force_catalog(6, 5)[FormSpec.n2(3, 3)]) == 1


def test_ten_run_eight_factor_split():
    cat = brute_force_catalog(10, 8)
    assert len(cat[FormSpec.n2(4, 5)]) == 2
    assert len(cat[FormSpec.n2(5, 4)]) == 4


def test_oracle_classes_well_formed():
    for spec, oc in brute_force_catalog(9, 4).items():
        assert all(matches_form(d, spec) for d in oc.classes)
        for s in range(len(oc)):
            for t in range(s + 1, len(oc)):
                assert not are_isomorphic(oc.classes[s], oc.classes[t])


def test_oracle_bijection(small_catalogs):
    for n, k in [(6, 4), (9, 5), (10, 6)]:
        for spec, oc in brute_force_catalog(n, k).items():
            mine = small_catalogs[n][(k, spec)]
            assert len(mine) == len(oc)
            for o in oc.classes:
                assert sum(are_isomorphic(o, d) for d in mine) == 1


def test_oracle_scale_limits(rng):
    with pytest.raises(OracleScaleError):
        brute_force_catalog(13, 3)
    with pytest.raises(OracleScaleError):
        brute_force_catalog(6, 6)
    big = random_design(rng, 60, 40)
    with pytest.raises(OracleScaleError):
        brute_force_j(big, 20)


def test_brute_force_j_full_order(rng):
    d = random_design(rng, 11, 5)
    (v,) = brute_force_j(d, 5).values
    assert v == abs(int(d.levels.astype(int).prod(axis=1).sum()))


def test_seventeen_run_five_factor_j4(catalog17_low):
    best = rank_g(bucket(catalog17_low, 5))[0]
    assert frequency_vector(brute_force_j(best, 4)).leading == (1, 5)
    assert brute_force_j(best, 4) == j_spectrum(best, 4)


def test_bias_zero_on_oa():
    d = _full_factorial(4)
    assert brute_force_bias(d, 2, trials=10) < 1e-12


def test_bias_boundary_order(small_catalogs):
    for d in bucket(small_catalogs[10], 5):
        assert brute_force_bias(d, 4, trials=5) < 1e-9
