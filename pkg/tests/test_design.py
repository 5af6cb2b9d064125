from fractions import Fraction

import numpy as np
import pytest

from conftest import bucket, random_design
from daenum.design import (
    DesignMatrix,
    FormSpec,
    correlation_profile,
    form_of,
    form_representative,
    forms_for,
    information_summary,
    matches_n1_form,
    matches_n2_form,
)
from daenum.enumerator import starting_design_n1, starting_design_n2
from daenum.errors import FormError, RunSizeResidueError, ShapeError, SpecShapeError


def test_single_plus_column():
    d = DesignMatrix.from_levels([[1]] * 5)
    info = information_summary(d)
    assert info.column_sums == (5,)
    assert info.grams.tolist() == [[5]]


def test_six_run_start_summary():
    info = information_summary(starting_design_n2(6))
    assert info.column_sums == (2, 0)
    assert info.grams.tolist() == [[6, 0], [0, 6]]


def test_negated_column_gram(rng):
    d = random_design(rng, 9, 1)
    full = (1 << 9) - 1
    d2 = d.with_column(~d.column(0) & full)
    assert information_summary(d2).grams[0, 1] == -9


def test_levels_validation():
    with pytest.raises(ShapeError):
        DesignMatrix.from_levels([[1, 0], [1, 1]])
    with pytest.raises(ShapeError):
        DesignMatrix([], 4)
    with pytest.raises(ShapeError):
        DesignMatrix([1 << 5], 5)


def test_levels_round_trip(rng):
    d = random_design(rng, 11, 4)
    assert DesignMatrix.from_levels(d.levels) == d
    assert str(d).count("\n") == 10
    assert set(str(d)) <= {"+", "-", "\n"}


def test_summary_invariants(rng):
    for _ in range(50):
        n = int(rng.integers(2, 19))
        d = random_design(rng, n, int(rng.integers(1, 8)))
        info = information_summary(d)
        g = info.grams
        assert np.all(np.diag(g) == n)
        assert np.array_equal(g, g.T)
        assert np.all(np.abs(g) <= n)
        assert all((s - n) % 2 == 0 for s in info.column_sums)


def test_gram_matches_naive_loop(rng):
    for _ in range(500):
        n = int(rng.integers(2, 19))
        k = int(rng.integers(1, 18))
        d = random_design(rng, n, k)
        lv = d.levels.tolist()
        info = information_summary(d)
        for a in range(k):
            assert info.column_sums[a] == sum(row[a] for row in lv)
            for b in range(k):
                assert info.grams[a, b] == sum(row[a] * row[b] for row in lv)


def test_summary_under_row_perm_and_sign(rng):
    d = random_design(rng, 10, 5)
    info = information_summary(d)
    perm = rng.permutation(10)
    assert np.array_equal(information_summary(DesignMatrix.from_levels(d.levels[perm])).grams, info.grams)
    lv = d.levels.copy()
    lv[:, 2] *= -1
    g = information_summary(DesignMatrix.from_levels(lv)).grams
    expect = info.grams.copy()
    expect[2, :] *= -1
    expect[:, 2] *= -1
    assert np.array_equal(g, expect)


def test_n1_form_examples(small_catalogs):
    assert matches_n1_form(starting_design_n1(5))
    # columns (+,+,+,+,-) and (+,+,+,-,+) sum to 3, so they are not in the form
    lv = np.array([[1, 1], [1, 1], [1, 1], [1, -1], [-1, 1]])
    assert not matches_n1_form(DesignMatrix.from_levels(lv))
    top = bucket(small_catalogs[13], 12)
    assert len(top) == 1 and matches_n1_form(top[0])


def test_n1_zero_sum_column_rejected(rng):
    d = starting_design_n1(9).with_column(0b000001111)
    assert not matches_n1_form(d)


def test_n1_wrong_residue():
    with pytest.raises(RunSizeResidueError):
        matches_n1_form(starting_design_n2(6))


def test_n2_form_examples(small_catalogs):
    s = starting_design_n2(6)
    assert matches_n2_form(s, FormSpec.n2(2, 1))
    assert not matches_n2_form(s, FormSpec.n2(1, 2))
    for d in bucket(small_catalogs[10], 5):
        assert matches_n2_form(d, FormSpec.n2(3, 3))


def test_n2_errors():
    s = starting_design_n2(6)
    with pytest.raises(SpecShapeError):
        matches_n2_form(s, FormSpec.n2(2, 2))
    with pytest.raises(SpecShapeError):
        matches_n2_form(s, FormSpec.n1())
    with pytest.raises(RunSizeResidueError):
        matches_n2_form(starting_design_n1(5), FormSpec.n2(2, 1))


def test_form_spec_parsing_and_checks():
    for spec in (FormSpec.n1(), FormSpec.n2(3, 4), FormSpec.n2(5, 5)):
        assert FormSpec.parse(spec.label) == spec
    with pytest.raises(SpecShapeError):
        FormSpec.parse("X1")
    with pytest.raises(SpecShapeError):
        FormSpec("N1", (1, 1))
    with pytest.raises(SpecShapeError):
        FormSpec.n2(3, 4).check(14, 5)
    with pytest.raises(SpecShapeError):
        FormSpec.n2(2, 4).check(14, 5)
    with pytest.raises(RunSizeResidueError):
        FormSpec.n1().check(14, 5)
    assert forms_for(14, 6) == [FormSpec.n2(3, 4), FormSpec.n2(4, 3)]
    assert forms_for(13, 6) == [FormSpec.n1()]


def test_form_predicates_permutation_invariant(small_catalogs, rng):
    pool = [(d, f) for n in (10, 13, 14) for (k, f), ds in small_catalogs[n].items() for d in ds]
    for _ in range(1000):
        d, f = pool[int(rng.integers(len(pool)))]
        lv = d.levels[rng.permutation(d.runs)][:, rng.permutation(d.factors)]
        p = DesignMatrix.from_levels(lv)
        if f.variant == "N1":
            assert matches_n1_form(p)
        else:
            assert matches_n2_form(p, f)


def test_orthogonal_pair_count(small_catalogs):
    for (k, f), ds in small_catalogs[14].items():
        i, j = f.blocks
        for d in ds:
            info = information_summary(d)
            off = np.triu(info.grams == 0, 1)
            assert off.sum() == (i - 1) * j
            if k % 2 == 0 and i < j:
                assert off.sum() == k * k // 4 - 1


def test_correlations_n2(small_catalogs):
    n = 14
    d = bucket(small_catalogs[n], 6, "G4-3")[0]
    sums = information_summary(d).column_sums
    corr = iter(correlation_profile(d))
    for a in range(d.factors):
        for b in range(a + 1, d.factors):
            c = next(corr)
            if sums[a] == sums[b] == 2:
                assert c == Fraction(2, n + 2)
            elif sums[a] == sums[b] == 0:
                assert c == Fraction(2, n)
            else:
                assert c == 0


def test_correlations_n1(small_catalogs):
    d = bucket(small_catalogs[13], 5)[0]
    assert set(correlation_profile(d)) == {Fraction(1, 14)}


def test_correlations_need_form(rng):
    with pytest.raises(FormError):
        correlation_profile(DesignMatrix.from_levels([[1, 1]] * 3 + [[-1, 1]] * 2))


def test_form_representative(small_catalogs, rng):
    d = bucket(small_catalogs[10], 6, "G3-4")[2]
    full = (1 << 10) - 1
    flipped = DesignMatrix([(~c) & full if t % 2 else c for t, c in enumerate(d.cols.tolist())], 10)
    assert form_of(flipped) is None
    rep, spec = form_representative(flipped)
    assert spec == FormSpec.n2(3, 4)
    assert matches_n2_form(rep, spec)
