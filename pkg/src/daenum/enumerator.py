"""Staged column extension of DA designs with isomorphism rejection.

N = 2 mod 4: start from the two-factor Gamma(2,1) design and add columns
summing to 0 or 2 (``zeta0*`` / ``zeta2*``) according to the block form
being built.  N = 1 mod 4: a single chain with columns summing to 1.

Every child is reduced to its canonical key; a stage keeps the first
child (in parent order, then candidate order) of every new key, stored
exactly as built so that it still has the optimal form.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Callable, Iterable

import numba
import numpy as np

from ._bits import popcount
from .canon import CanonicalKey, _canon_cols, words_to_key
from .design import DesignMatrix, FormSpec, information_summary
from .errors import RunSizeResidueError, ShapeError

log = logging.getLogger(__name__)

WORKERS_ENV = "DAENUM_WORKERS"


class CandidateKind(str, Enum):
    ZETA1 = "zeta1"
    ZETA2 = "zeta2*"
    ZETA0 = "zeta0*"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _replicate(points, counts, runs):
    rows = []
    for p, c in zip(points, counts):
        rows.extend([p] * c)
    return DesignMatrix.from_levels(np.array(rows, dtype=np.int8).reshape(runs, 2))


def starting_design_n2(runs: int) -> DesignMatrix:
    """The Gamma(2,1) two-factor design: first column sums to 2, second to 0."""
    if runs % 4 != 2 or runs < 6:
        raise RunSizeResidueError(f"N2 start needs N = 2 mod 4 and N >= 6, got {runs}")
    hi, lo = (runs + 2) // 4, (runs - 2) // 4
    return _replicate([(1, -1), (1, 1), (-1, -1), (-1, 1)], [hi, hi, lo, lo], runs)


def starting_design_n1(runs: int) -> DesignMatrix:
    """Two-factor design with X'X = (N-1) I + J."""
    if runs % 4 != 1 or runs < 5:
        raise RunSizeResidueError(f"N1 start needs N = 1 mod 4 and N >= 5, got {runs}")
    lo, hi = (runs - 1) // 4, (runs + 3) // 4
    return _replicate([(-1, -1), (-1, 1), (1, -1), (1, 1)], [lo, lo, lo, hi], runs)


def _target_ip(kind: CandidateKind, column_sum: int) -> int:
    if kind is CandidateKind.ZETA1:
        return 1
    if kind is CandidateKind.ZETA2:
        return 2 if column_sum == 2 else 0
    return 0 if column_sum == 2 else 2


@dataclass(frozen=True)
class CandidateSet:
    run_size: int
    kind: CandidateKind
    columns: np.ndarray = field(repr=False)

    def __len__(self):
        return int(self.columns.size)

    def required_distances(self, parent: DesignMatrix) -> np.ndarray:
        """Hamming distance each candidate must have to each parent column."""
        sums = information_summary(parent).column_sums
        ips = np.array([_target_ip(self.kind, s) for s in sums], dtype=np.int64)
        return (self.run_size - ips) // 2


def build_candidate_set(runs: int, kind: CandidateKind | str) -> CandidateSet:
    kind = CandidateKind(kind)
    if kind is CandidateKind.ZETA1:
        if runs % 4 != 1:
            raise RunSizeResidueError(f"{kind.value} needs N = 1 mod 4, got {runs}")
        start, target_sum = starting_design_n1(runs), 1
    else:
        if runs % 4 != 2:
            raise RunSizeResidueError(f"{kind.value} needs N = 2 mod 4, got {runs}")
        start = starting_design_n2(runs)
        target_sum = 2 if kind is CandidateKind.ZETA2 else 0
    plus = (runs + target_sum) // 2
    words = np.array(
        sorted(sum(1 << r for r in rows) for rows in combinations(range(runs), plus)),
        dtype=np.uint64,
    )
    probe = CandidateSet(runs, kind, words)
    need = probe.required_distances(start)
    ok = np.ones(words.size, dtype=bool)
    for col, dist in zip(start.cols, need):
        ok &= np.bitwise_count(words ^ col) == dist
    cols = words[ok]
    cols.flags.writeable = False
    return CandidateSet(runs, kind, cols)


# --------------------------------------------------------------------------
# batched kernel: filter candidates and canonicalise the children


@numba.njit(cache=True)
def _feasible(parent, need, cand):
    for a in range(parent.shape[0]):
        if popcount(parent[a] ^ cand) != need[a]:
            return False
    return True


@numba.njit(cache=True)
def _extend_chunk(parents, needs, cands, n):
    p, h = parents.shape
    total = 0
    for i in range(p):
        for c in range(cands.shape[0]):
            if _feasible(parents[i], needs[i], cands[c]):
                total += 1
    pidx = np.empty(total, dtype=np.int64)
    cidx = np.empty(total, dtype=np.int64)
    words = np.empty((total, h + 1), dtype=np.uint64)
    child = np.empty(h + 1, dtype=np.uint64)
    t = 0
    for i in range(p):
        child[:h] = parents[i]
        for c in range(cands.shape[0]):
            if _feasible(parents[i], needs[i], cands[c]):
                child[h] = cands[c]
                words[t] = _canon_cols(child, n)
                pidx[t] = i
                cidx[t] = c
                t += 1
    return pidx, cidx, words


def _first_unique(pidx, cidx, words, n):
    """First occurrence of every key, in (parent, candidate) order."""
    if words.shape[0] == 0:
        return []
    view = np.ascontiguousarray(words).view(np.dtype((np.void, words.dtype.itemsize * words.shape[1])))
    _, first = np.unique(view.ravel(), return_index=True)
    first.sort()
    return [(int(pidx[t]), int(cidx[t]), words_to_key(words[t], n)) for t in first]


def _chunk_job(args):
    parents, needs, cands, n, offset = args
    pidx, cidx, words = _extend_chunk(parents, needs, cands, n)
    return [(p + offset, c, key) for p, c, key in _first_unique(pidx, cidx, words, n)]


@dataclass
class StageState:
    """Databases of one extension stage: keys seen (D1) and form-respecting designs (D2)."""

    h: int
    form: FormSpec
    d1_keys: set = field(default_factory=set)
    d2_designs: list = field(default_factory=list)
    d2_keys: list = field(default_factory=list)

    def __len__(self):
        return len(self.d2_designs)

    def add(self, key: bytes, design: DesignMatrix) -> bool:
        if key in self.d1_keys:
            return False
        self.d1_keys.add(key)
        self.d2_designs.append(design)
        self.d2_keys.append(key)
        return True

    def sorted_items(self) -> list[tuple[CanonicalKey, DesignMatrix]]:
        items = sorted(zip(self.d2_keys, self.d2_designs), key=lambda t: t[0])
        return [(CanonicalKey(k), d) for k, d in items]


def extend_one(parent: DesignMatrix, candidates: CandidateSet, state: StageState) -> StageState:
    """Extend one parent with every feasible candidate, deduplicating into ``state``."""
    if parent.runs != candidates.run_size:
        raise ShapeError("candidate set built for a different run size")
    parents = np.ascontiguousarray(parent.cols[None, :])
    needs = candidates.required_distances(parent)[None, :]
    for _, c, key in _chunk_job((parents, needs, candidates.columns, parent.runs, 0)):
        state.add(key, parent.with_column(int(candidates.columns[c])))
    return state


def extend_stage(
    parents: list[DesignMatrix],
    candidates: CandidateSet,
    form: FormSpec,
    workers: int = 1,
    chunk: int = 256,
) -> StageState:
    """Extend a whole stage of parents; the result does not depend on ``workers``."""
    h = parents[0].factors + 1 if parents else 0
    state = StageState(h, form)
    if not parents:
        return state
    n = parents[0].runs
    cols = np.stack([p.cols for p in parents])
    needs = np.stack([candidates.required_distances(p) for p in parents])
    jobs = [
        (cols[s:s + chunk], needs[s:s + chunk], candidates.columns, n, s)
        for s in range(0, len(parents), chunk)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results: Iterable = pool.map(_chunk_job, jobs)
            _merge(state, results, parents, candidates)
    else:
        _merge(state, map(_chunk_job, jobs), parents, candidates)
    return state


def _merge(state, results, parents, candidates):
    for found in results:
        for p, c, key in found:
            if key not in state.d1_keys:
                state.add(key, parents[p].with_column(int(candidates.columns[c])))


# --------------------------------------------------------------------------
# stage scheduling


def saturated_form_missing(runs: int, k: int) -> bool:
    """True when the optimal form provably does not exist for this saturated case."""
    if runs % 4 == 1 and k == runs - 1:
        root = math.isqrt(2 * runs - 1)
        return not (root * root == 2 * runs - 1 and root % 2 == 1)
    if runs % 4 == 2 and k == runs - 1:
        m = 2 * runs - 2
        return not any(math.isqrt(m - a * a) ** 2 == m - a * a for a in range(math.isqrt(m) + 1))
    return False


StageCallback = Callable[[int, FormSpec, StageState], None]


def enumerate_catalog(
    runs: int,
    k_max: int,
    workers: int | None = None,
    on_stage: StageCallback | None = None,
    resume: dict[FormSpec, list[DesignMatrix]] | None = None,
    resume_h: int | None = None,
) -> dict[tuple[int, FormSpec], list[DesignMatrix]]:
    """All non-isomorphic DA designs with 3..k_max factors, bucketed by (k, form).

    Each bucket is sorted by canonical key.  ``on_stage`` is called after
    every completed stage (used for checkpointing); ``resume`` restarts from
    the buckets of a completed stage ``resume_h``.
    """
    if runs % 4 not in (1, 2):
        raise RunSizeResidueError(f"run size {runs} is not 1 or 2 mod 4")
    if not 3 <= k_max <= runs - 1:
        raise ShapeError(f"k_max must lie in 3..{runs - 1}")
    workers = default_workers() if workers is None else workers
    out: dict[tuple[int, FormSpec], list[DesignMatrix]] = {}

    if runs % 4 == 1:
        zeta = build_candidate_set(runs, CandidateKind.ZETA1)
        form = FormSpec.n1()
        if resume is not None:
            h0, layer = resume_h, resume[form]
        else:
            h0, layer = 2, [starting_design_n1(runs)]
        for h in range(h0 + 1, k_max + 1):
            state = extend_stage(layer, zeta, form, workers)
            items = state.sorted_items()
            layer = [d for _, d in items]
            out[(h, form)] = layer
            _report(runs, h, form, state)
            if on_stage:
                on_stage(h, form, state)
        return out

    z2 = build_candidate_set(runs, CandidateKind.ZETA2)
    z0 = build_candidate_set(runs, CandidateKind.ZETA0)
    if resume is not None:
        h0, layers = resume_h, dict(resume)
    else:
        h0, layers = 2, {FormSpec.n2(2, 1): [starting_design_n2(runs)]}
    for h in range(h0 + 1, k_max + 1):
        new: dict[FormSpec, list[DesignMatrix]] = {}
        if h == 3:
            plan = [(FormSpec.n2(2, 1), z0, FormSpec.n2(2, 2))]
        elif h % 2 == 0:
            lam = h // 2
            src = FormSpec.n2(lam, lam)
            plan = [(src, z0, FormSpec.n2(lam, lam + 1)), (src, z2, FormSpec.n2(lam + 1, lam))]
        else:
            lam = (h - 1) // 2
            plan = [(FormSpec.n2(lam, lam + 1), z2, FormSpec.n2(lam + 1, lam + 1))]
        for src, zeta, dst in plan:
            state = extend_stage(layers.get(src, []), zeta, dst, workers)
            new[dst] = [d for _, d in state.sorted_items()]
            out[(h, dst)] = new[dst]
            _report(runs, h, dst, state)
            if on_stage:
                on_stage(h, dst, state)
        layers = new
    return out


def _report(runs, h, form, state):
    if len(state) == 0 and saturated_form_missing(runs, h):
        log.warning(
            "N=%d k=%d: no design has the optimal information-matrix form; bucket is empty", runs, h
        )
    log.info("N=%d k=%d %s: %d designs", runs, h, form.label, len(state))
