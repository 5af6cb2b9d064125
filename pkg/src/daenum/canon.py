"""Isomorphism of two-level designs and a canonical key per isomorphism class.

The group acting on an N x k design is row permutations x column
permutations x per-column sign switches.  The canonical representative is
the lexicographically smallest matrix in the orbit under a fixed total
order, restricted to orderings compatible with isomorphism-invariant
row and column classes:

* rows are partitioned by an invariant refined from pairwise Hamming
  distances between runs;
* columns are ranked by an invariant built from |column sum|, |inner
  products| and |J3| values, refined against the ranks of the other
  columns;
* columns are then chosen one at a time (respecting the column-rank
  order) together with a sign, rows are kept sorted by
  (row class, chosen columns) and the matrix is compared column-major
  with -1 < +1.

Because the rows of the working matrix stay sorted, column j of the
representative depends only on the first j choices, so the search is a
plain branch-and-bound over column/sign choices.  The key is the sequence
of canonical column words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from ._bits import popcount
from .design import DesignMatrix
from .errors import ShapeError, VersionError

SCHEME = "lexmin-r1"
_BIG = np.uint64(0xFFFFFFFFFFFFFFFF)


# --------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _lex_cmp(a, b):
    for t in range(a.shape[0]):
        if a[t] < b[t]:
            return -1
        if a[t] > b[t]:
            return 1
    return 0


@numba.njit(cache=True)
def _dense_rank(sig):
    m = sig.shape[0]
    order = np.arange(m)
    for i in range(1, m):
        cur = order[i]
        j = i - 1
        while j >= 0 and _lex_cmp(sig[order[j]], sig[cur]) > 0:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = cur
    rank = np.zeros(m, dtype=np.int64)
    r = 0
    for i in range(1, m):
        if _lex_cmp(sig[order[i - 1]], sig[order[i]]) != 0:
            r += 1
        rank[order[i]] = r
    return rank


@numba.njit(cache=True)
def _row_classes(cols, n):
    k = cols.shape[0]
    rowbits = np.zeros(n, dtype=np.uint64)
    for c in range(k):
        for r in range(n):
            if (cols[c] >> np.uint64(r)) & np.uint64(1):
                rowbits[r] |= np.uint64(1) << np.uint64(c)
    dist = np.zeros((n, n), dtype=np.int64)
    for r in range(n):
        for q in range(n):
            dist[r, q] = popcount(rowbits[r] ^ rowbits[q])
    rank = np.zeros(n, dtype=np.int64)
    nclass = 1
    sig = np.zeros((n, n), dtype=np.int64)
    for _ in range(n):
        for r in range(n):
            sig[r, 0] = rank[r]
            t = 1
            for q in range(n):
                if q != r:
                    sig[r, t] = dist[r, q] * (n + 1) + rank[q]
                    t += 1
            sig[r, 1:].sort()
        new = _dense_rank(sig)
        m = new.max() + 1
        rank = new
        if m == nclass:
            break
        nclass = m
    return rank


@numba.njit(cache=True)
def _col_classes(cols, n, rowrank):
    k = cols.shape[0]
    full = (np.uint64(1) << np.uint64(n)) - np.uint64(1)
    nr = rowrank.max() + 1
    absg = np.zeros((k, k), dtype=np.int64)
    for a in range(k):
        for b in range(k):
            absg[a, b] = abs(n - 2 * popcount(cols[a] ^ cols[b]))
    npair = (k - 1) * (k - 2) // 2
    length = 2 + (k - 1) + npair + 2 * nr
    sig = np.zeros((k, length), dtype=np.int64)
    j3 = np.zeros(max(npair, 1), dtype=np.int64)
    hp = np.zeros(nr, dtype=np.int64)
    hm = np.zeros(nr, dtype=np.int64)
    for c in range(k):
        sig[c, 1] = abs(2 * popcount(cols[c]) - n)
        t = 2
        start = t
        for d in range(k):
            if d != c:
                sig[c, t] = absg[c, d]
                t += 1
        sig[c, start:t].sort()
        m = 0
        for d in range(k):
            if d == c:
                continue
            for e in range(d + 1, k):
                if e == c:
                    continue
                x = cols[c] ^ cols[d] ^ cols[e]
                j3[m] = abs(n - 2 * popcount(x))
                m += 1
        if npair > 0:
            j3.sort()
            sig[c, t:t + npair] = j3[:npair]
        t += npair
        hp[:] = 0
        hm[:] = 0
        for r in range(n):
            if (cols[c] >> np.uint64(r)) & np.uint64(1):
                hp[rowrank[r]] += 1
            else:
                hm[rowrank[r]] += 1
        if _lex_cmp(hp, hm) <= 0:
            sig[c, t:t + nr] = hp
            sig[c, t + nr:t + 2 * nr] = hm
        else:
            sig[c, t:t + nr] = hm
            sig[c, t + nr:t + 2 * nr] = hp
    rank = _dense_rank(sig)
    nclass = rank.max() + 1
    sig2 = np.zeros((k, k), dtype=np.int64)
    for _ in range(k):
        for c in range(k):
            sig2[c, 0] = rank[c]
            t = 1
            for d in range(k):
                if d != c:
                    sig2[c, t] = absg[c, d] * (k + 1) + rank[d]
                    t += 1
            sig2[c, 1:].sort()
        new = _dense_rank(sig2)
        m = new.max() + 1
        rank = new
        if m == nclass:
            break
        nclass = m
    _ = full
    return rank


@numba.njit(cache=True)
def _canon_cols(cols, n):
    """Canonical column words (row 0 is the most significant bit)."""
    k = cols.shape[0]
    one = np.uint64(1)
    full = (one << np.uint64(n)) - one
    rowrank = _row_classes(cols, n)
    colrank = _col_classes(cols, n, rowrank)
    req = np.sort(colrank)

    # partition stack: cells[depth, :ncells[depth]] in order
    cells = np.zeros((k + 1, n), dtype=np.uint64)
    ncells = np.zeros(k + 1, dtype=np.int64)
    nr = rowrank.max() + 1
    for q in range(nr):
        mask = np.uint64(0)
        for r in range(n):
            if rowrank[r] == q:
                mask |= one << np.uint64(r)
        cells[0, q] = mask
    ncells[0] = nr
    used = np.zeros(k + 1, dtype=np.uint64)

    best = np.full(k, _BIG, dtype=np.uint64)
    cand_c = np.zeros((k, 2 * k), dtype=np.int64)
    cand_x = np.zeros((k, 2 * k), dtype=np.uint64)
    ncand = np.zeros(k, dtype=np.int64)
    ptr = np.zeros(k, dtype=np.int64)
    vals = np.zeros(2 * k, dtype=np.uint64)
    xs = np.zeros(2 * k, dtype=np.uint64)
    cs = np.zeros(2 * k, dtype=np.int64)

    depth = 0
    fresh = True
    while depth >= 0:
        if fresh:
            # evaluate all admissible (column, sign) choices at this depth
            m = 0
            vmin = _BIG
            for c in range(k):
                if (used[depth] >> np.uint64(c)) & one:
                    continue
                if colrank[c] != req[depth]:
                    continue
                for s in range(2):
                    x = cols[c] if s == 0 else (~cols[c]) & full
                    v = np.uint64(0)
                    pos = 0
                    for b in range(ncells[depth]):
                        cell = cells[depth, b]
                        sz = popcount(cell)
                        ones = popcount(cell & x)
                        if ones > 0:
                            shift = n - (pos + sz)
                            v |= ((one << np.uint64(ones)) - one) << np.uint64(shift)
                        pos += sz
                    vals[m] = v
                    xs[m] = x
                    cs[m] = c
                    m += 1
                    if v < vmin:
                        vmin = v
            nc = 0
            if vmin <= best[depth]:
                if vmin < best[depth]:
                    best[depth] = vmin
                    for t in range(depth + 1, k):
                        best[t] = _BIG
                discrete = ncells[depth] == n
                for t in range(m):
                    if vals[t] != vmin:
                        continue
                    dup = False
                    for u in range(nc):
                        if cand_x[depth, u] == xs[t]:
                            dup = True
                            break
                    if dup:
                        continue
                    cand_c[depth, nc] = cs[t]
                    cand_x[depth, nc] = xs[t]
                    nc += 1
                    if discrete:
                        break
            ncand[depth] = nc
            ptr[depth] = 0
            fresh = False
        if ptr[depth] >= ncand[depth]:
            depth -= 1
            continue
        t = ptr[depth]
        ptr[depth] += 1
        c = cand_c[depth, t]
        x = cand_x[depth, t]
        if depth + 1 == k:
            continue
        nb = 0
        for b in range(ncells[depth]):
            cell = cells[depth, b]
            lo = cell & ~x
            hi = cell & x
            if lo:
                cells[depth + 1, nb] = lo
                nb += 1
            if hi:
                cells[depth + 1, nb] = hi
                nb += 1
        ncells[depth + 1] = nb
        used[depth + 1] = used[depth] | (one << np.uint64(c))
        depth += 1
        fresh = True
    return best


@numba.njit(cache=True)
def _canon_batch(cols2d, n):
    out = np.empty_like(cols2d)
    for i in range(cols2d.shape[0]):
        out[i] = _canon_cols(cols2d[i], n)
    return out


# --------------------------------------------------------------------------
# public surface


@dataclass(frozen=True, order=True)
class CanonicalKey:
    """Canonical representative of an isomorphism class, as bytes."""

    data: bytes
    scheme: str = SCHEME

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def from_hex(cls, text: str, scheme: str = SCHEME) -> CanonicalKey:
        if scheme != SCHEME:
            raise VersionError(f"canonical scheme {scheme!r} is not {SCHEME!r}")
        return cls(bytes.fromhex(text), scheme)


def _word_bytes(n: int) -> int:
    return (n + 7) // 8


def words_to_key(words: np.ndarray, n: int) -> bytes:
    """Serialise canonical column words big-endian, ceil(N/8) bytes per column."""
    nb = _word_bytes(n)
    be = words.astype(">u8").tobytes()
    if nb == 8:
        return be
    return b"".join(be[8 * i + 8 - nb:8 * i + 8] for i in range(words.shape[0]))


def key_to_design(key: CanonicalKey | bytes, runs: int) -> DesignMatrix:
    """Decode the canonical representative stored in a key."""
    data = key.data if isinstance(key, CanonicalKey) else key
    nb = _word_bytes(runs)
    words = [int.from_bytes(data[i:i + nb], "big") for i in range(0, len(data), nb)]
    cols = []
    for w in words:
        col = 0
        for p in range(runs):
            if (w >> (runs - 1 - p)) & 1:
                col |= 1 << p
        cols.append(col)
    return DesignMatrix(cols, runs)


def canonical_words(d: DesignMatrix) -> np.ndarray:
    return _canon_cols(np.ascontiguousarray(d.cols), d.runs)


def canonical_key(d: DesignMatrix) -> CanonicalKey:
    return CanonicalKey(words_to_key(canonical_words(d), d.runs))


def canonical_keys(designs: Sequence[DesignMatrix]) -> list[CanonicalKey]:
    """Keys for many same-shape designs in one kernel call."""
    if not designs:
        return []
    n, k = designs[0].shape
    if any(d.shape != (n, k) for d in designs):
        raise ShapeError("canonical_keys needs designs of one shape")
    words = _canon_batch(np.stack([d.cols for d in designs]), n)
    return [CanonicalKey(words_to_key(w, n)) for w in words]


def canonical_form(d: DesignMatrix) -> DesignMatrix:
    return key_to_design(canonical_key(d), d.runs)


@dataclass(frozen=True)
class IsomorphismOp:
    """result[r][c] = signs[c] * d[row_perm[r]][col_perm[c]]."""

    row_perm: tuple[int, ...]
    col_perm: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.row_perm) != list(range(len(self.row_perm))):
            raise ShapeError("row_perm is not a permutation")
        if sorted(self.col_perm) != list(range(len(self.col_perm))):
            raise ShapeError("col_perm is not a permutation")
        if len(self.signs) != len(self.col_perm) or any(s not in (-1, 1) for s in self.signs):
            raise ShapeError("signs must be one +-1 entry per column")

    @classmethod
    def identity(cls, runs: int, factors: int) -> IsomorphismOp:
        return cls(tuple(range(runs)), tuple(range(factors)), (1,) * factors)

    @classmethod
    def random(cls, runs: int, factors: int, rng: np.random.Generator) -> IsomorphismOp:
        return cls(
            tuple(int(v) for v in rng.permutation(runs)),
            tuple(int(v) for v in rng.permutation(factors)),
            tuple(int(v) for v in rng.choice([-1, 1], size=factors)),
        )

    def inverse(self) -> IsomorphismOp:
        rinv = [0] * len(self.row_perm)
        for r, p in enumerate(self.row_perm):
            rinv[p] = r
        cinv = [0] * len(self.col_perm)
        for c, p in enumerate(self.col_perm):
            cinv[p] = c
        return IsomorphismOp(tuple(rinv), tuple(cinv), tuple(self.signs[cinv[c]] for c in range(len(cinv))))


def apply(op: IsomorphismOp, d: DesignMatrix) -> DesignMatrix:
    if len(op.row_perm) != d.runs or len(op.col_perm) != d.factors:
        raise ShapeError(f"op of shape {(len(op.row_perm), len(op.col_perm))} on design {d.shape}")
    lv = d.levels
    out = lv[np.array(op.row_perm)][:, np.array(op.col_perm)] * np.array(op.signs, dtype=np.int8)
    return DesignMatrix.from_levels(out)


# --------------------------------------------------------------------------
# independent isomorphism test (no canonical keys)


def _col_signature(info_cols: list[int], n: int, a: int) -> tuple:
    s = abs(2 * bin(info_cols[a]).count("1") - n)
    g = sorted(abs(n - 2 * bin(info_cols[a] ^ info_cols[b]).count("1"))
               for b in range(len(info_cols)) if b != a)
    return (s, tuple(g))


def are_isomorphic(a: DesignMatrix, b: DesignMatrix) -> bool:
    """Backtracking search for a column matching (with signs) and a row bijection.

    Columns of ``a`` are matched to columns of ``b`` one at a time; after each
    assignment the multisets of partial rows must agree, and candidate pairs
    must share |sum| and the multiset of |inner products|.
    """
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    n, k = a.shape
    full = (1 << n) - 1
    ca = [int(v) for v in a.cols]
    cb = [int(v) for v in b.cols]
    siga = [_col_signature(ca, n, i) for i in range(k)]
    sigb = [_col_signature(cb, n, i) for i in range(k)]
    if sorted(siga) != sorted(sigb):
        return False

    def rows(cols):
        out: dict[int, int] = {}
        for r in range(n):
            key = 0
            for x in cols:
                key = (key << 1) | ((x >> r) & 1)
            out[key] = out.get(key, 0) + 1
        return out

    # order a's columns so that the most constrained go first
    order = sorted(range(k), key=lambda i: sum(1 for s in sigb if s == siga[i]))
    chosen_a: list[int] = []
    chosen_b: list[int] = []
    used = [False] * k

    def search(depth: int) -> bool:
        if depth == k:
            return True
        i = order[depth]
        chosen_a.append(ca[i])
        ra = rows(chosen_a)
        for j in range(k):
            if used[j] or sigb[j] != siga[i]:
                continue
            for x in (cb[j], (~cb[j]) & full):
                chosen_b.append(x)
                if rows(chosen_b) == ra:
                    used[j] = True
                    if search(depth + 1):
                        return True
                    used[j] = False
                chosen_b.pop()
        chosen_a.pop()
        return False

    return search(0)
