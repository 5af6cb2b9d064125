"""Brute-force reference implementations used to cross-check the fast paths.

Nothing here calls the canonicaliser, the staged enumerator or the
bit-packed J/alias code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, prod

import numpy as np

from .canon import are_isomorphic
from .criteria import JSpectrum, alias_matrix
from .design import DesignMatrix, FormSpec, forms_for, matches_form
from .errors import OracleScaleError, OrderError

MAX_ORACLE_RUNS = 10
MAX_SUBSETS = 10**6


@dataclass
class OracleCatalog:
    runs: int
    factors: int
    form: FormSpec
    classes: list[DesignMatrix] = field(default_factory=list)

    def __len__(self):
        return len(self.classes)


def _ip(a: int, b: int, n: int) -> int:
    return n - 2 * bin(a ^ b).count("1")


def _column_pool(n: int, column_sum: int) -> list[int]:
    plus = (n + column_sum) // 2
    return [sum(1 << r for r in rows) for rows in combinations(range(n), plus)]


def _sorted_extension(blocks: list[int], col: int) -> list[int] | None:
    """Split prefix blocks by ``col``; None if a block would not stay sorted."""
    out = []
    for mask in blocks:
        hi = mask & col
        lo = mask & ~col
        # rows are indexed top to bottom, so the -1 part must be a prefix
        if hi and lo and (lo >> (hi & -hi).bit_length() - 1) != 0:
            return None
        if lo:
            out.append(lo)
        if hi:
            out.append(hi)
    return out


def _raw_designs(n: int, k: int, form: FormSpec) -> list[DesignMatrix]:
    """Every row-sorted design in the exact optimal form, columns of sum 2 first."""
    if form.variant == "N1":
        kinds = [1] * k
    else:
        i, j = form.blocks
        kinds = [2] * (i - 1) + [0] * j
    pools = {s: _column_pool(n, s) for s in set(kinds)}

    def target(s_a: int, s_b: int) -> int:
        if form.variant == "N1":
            return 1
        return 2 if s_a == s_b else 0

    found: list[DesignMatrix] = []
    chosen: list[int] = []

    def rec(depth: int, blocks: list[int]):
        if depth == k:
            found.append(DesignMatrix(chosen, n))
            return
        s = kinds[depth]
        for col in pools[s]:
            if any(_ip(col, c, n) != target(s, kinds[t]) for t, c in enumerate(chosen)):
                continue
            nb = _sorted_extension(blocks, col)
            if nb is None:
                continue
            chosen.append(col)
            rec(depth + 1, nb)
            chosen.pop()

    rec(0, [(1 << n) - 1])
    return found


def _naive_invariant(d: DesignMatrix) -> tuple:
    lv = d.levels.astype(int)
    out = []
    for s in (1, 2, 3):
        if s <= d.factors:
            out.append(tuple(sorted(abs(int(lv[:, list(sub)].prod(axis=1).sum()))
                                    for sub in combinations(range(d.factors), s))))
    return tuple(out)


def brute_force_catalog(runs: int, factors: int, form: FormSpec | None = None) -> dict[FormSpec, OracleCatalog]:
    """One representative per isomorphism class, per optimal form.

    All row-sorted designs with exact optimal-form column sums and inner
    products are generated by backtracking, then grouped by pairwise
    isomorphism tests.
    """
    if runs > MAX_ORACLE_RUNS:
        raise OracleScaleError(f"oracle catalog limited to N <= {MAX_ORACLE_RUNS}, got {runs}")
    if not 1 <= factors <= runs - 1:
        raise OracleScaleError(f"factor count {factors} outside 1..{runs - 1}")
    specs = [form] if form is not None else forms_for(runs, factors)
    out = {}
    for spec in specs:
        spec.check(runs, factors)
        buckets: dict[tuple, list[DesignMatrix]] = {}
        cat = OracleCatalog(runs, factors, spec)
        for d in _raw_designs(runs, factors, spec):
            assert matches_form(d, spec)
            reps = buckets.setdefault(_naive_invariant(d), [])
            if not any(are_isomorphic(d, r) for r in reps):
                reps.append(d)
                cat.classes.append(d)
        out[spec] = cat
    return out


def brute_force_j(d: DesignMatrix, s: int) -> JSpectrum:
    """J_s values with plain loops over subsets and runs."""
    if not 1 <= s <= d.factors:
        raise OrderError(f"order {s} outside 1..{d.factors}")
    if comb(d.factors, s) > MAX_SUBSETS:
        raise OracleScaleError(f"C({d.factors},{s}) subsets exceed {MAX_SUBSETS}")
    lv = d.levels.tolist()
    vals = []
    for sub in combinations(range(d.factors), s):
        total = 0
        for row in lv:
            total += prod(row[c] for c in sub)
        vals.append(abs(total))
    return JSpectrum(s, tuple(vals))


def brute_force_bias(d: DesignMatrix, i: int, trials: int = 50, seed: int = 0) -> float:
    """Worst relative gap between least-squares main-effect bias and A*_i beta_i.

    For each trial a response with random main effects and random order-i
    interaction effects is fitted with the main-effects model by least
    squares; the bias in the main-effect estimates is compared with the
    alias-matrix prediction.
    """
    a_star = alias_matrix(d, i)
    lv = d.levels.astype(float)
    n, k = lv.shape
    xm = np.hstack([np.ones((n, 1)), lv])
    xi = np.column_stack([lv[:, list(sub)].prod(axis=1) for sub in combinations(range(k), i)])
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        beta_m = rng.normal(size=k + 1)
        beta_i = rng.normal(size=xi.shape[1])
        y = xm @ beta_m + xi @ beta_i
        est, *_ = np.linalg.lstsq(xm, y, rcond=None)
        bias = est[1:] - beta_m[1:]
        pred = a_star @ beta_i
        scale = max(np.linalg.norm(pred), np.linalg.norm(beta_i))
        worst = max(worst, float(np.linalg.norm(bias - pred) / scale))
    return worst
