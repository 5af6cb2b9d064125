"""J-characteristics, confounding frequency vectors and alias-matrix traces.

G-aberration compares the frequency vectors F3 then F4 (F1 and F2 are
fixed within a form bucket).  G2-aberration compares (C2, C3), where
C_i is the squared Frobenius norm of the alias matrix of the main-effects
model with respect to order-i interactions, intercept row removed.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .design import DesignMatrix, FormSpec, form_of
from .errors import OrderError, ShapeError, SingularModelError

REL_TOL = 1e-9
CHUNK = 4096


@dataclass(frozen=True)
class JSpectrum:
    s: int
    values: tuple[int, ...]


@dataclass(frozen=True)
class FrequencyVector:
    """(J value, count) pairs, J values strictly descending."""

    s: int
    entries: tuple[tuple[int, int], ...]

    @property
    def leading(self) -> tuple[int, int] | None:
        return self.entries[0] if self.entries else None

    def counts_on(self, grid: Sequence[int]) -> tuple[int, ...]:
        d = dict(self.entries)
        return tuple(d.get(v, 0) for v in grid)

    def encode(self) -> str:
        return ",".join(f"{v}:{c}" for v, c in self.entries)

    @classmethod
    def decode(cls, s: int, text: str) -> FrequencyVector:
        if not text:
            return cls(s, ())
        pairs = tuple(tuple(int(x) for x in item.split(":")) for item in text.split(","))
        return cls(s, pairs)


@dataclass(frozen=True)
class AliasTrace:
    order: int
    value: float


@dataclass(frozen=True)
class AberrationProfile:
    f3: FrequencyVector
    f4: FrequencyVector
    c2: float
    c3: float
    form: FormSpec | None = None


def _subsets(k: int, s: int) -> np.ndarray:
    return np.array(list(combinations(range(k), s)), dtype=np.intp).reshape(-1, s)


def j_values(cols2d: np.ndarray, n: int, s: int) -> np.ndarray:
    """|J_s| for every s-subset of columns, for a batch of designs (D x k words)."""
    subs = _subsets(cols2d.shape[1], s)
    if subs.shape[0] == 0:
        return np.zeros((cols2d.shape[0], 0), dtype=np.int64)
    x = np.bitwise_xor.reduce(cols2d[:, subs], axis=2)
    return np.abs(n - 2 * np.bitwise_count(x).astype(np.int64))


def j_spectrum(d: DesignMatrix, s: int) -> JSpectrum:
    if not 1 <= s <= d.factors:
        raise OrderError(f"order {s} outside 1..{d.factors}")
    vals = j_values(d.cols[None, :], d.runs, s)[0]
    return JSpectrum(s, tuple(int(v) for v in vals))


def frequency_vector(spec: JSpectrum) -> FrequencyVector:
    vals, counts = np.unique(np.asarray(spec.values, dtype=np.int64), return_counts=True)
    entries = tuple((int(v), int(c)) for v, c in zip(vals[::-1], counts[::-1]))
    return FrequencyVector(spec.s, entries)


def _freq_rows(jv: np.ndarray, s: int) -> list[FrequencyVector]:
    out = []
    for row in jv:
        vals, counts = np.unique(row, return_counts=True)
        out.append(FrequencyVector(s, tuple((int(v), int(c)) for v, c in zip(vals[::-1], counts[::-1]))))
    return out


# --------------------------------------------------------------------------
# alias matrices


def _levels_batch(cols2d: np.ndarray, n: int) -> np.ndarray:
    rows = np.arange(n, dtype=np.uint64)
    bits = (cols2d[:, None, :] >> rows[None, :, None]) & np.uint64(1)
    return np.where(bits == 1, 1.0, -1.0)


def _interaction_matrix(lv: np.ndarray, i: int) -> np.ndarray:
    subs = _subsets(lv.shape[2], i)
    return np.prod(lv[:, :, subs], axis=3)


def _model_matrix(lv: np.ndarray) -> np.ndarray:
    ones = np.ones(lv.shape[:2] + (1,))
    return np.concatenate([ones, lv], axis=2)


def _solve_refined(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(m, b)
    except np.linalg.LinAlgError as exc:
        raise SingularModelError("main-effects information matrix is singular") from exc
    x += np.linalg.solve(m, b - m @ x)
    return x


def alias_matrices(cols2d: np.ndarray, n: int, i: int) -> np.ndarray:
    """Intercept-stripped alias matrices A*_i for a batch of designs."""
    lv = _levels_batch(cols2d, n)
    xm = _model_matrix(lv)
    xi = _interaction_matrix(lv, i)
    xmt = np.swapaxes(xm, 1, 2)
    m = xmt @ xm
    if np.any(np.abs(np.linalg.det(m)) < 0.5):
        raise SingularModelError("main-effects model matrix is rank deficient")
    return _solve_refined(m, xmt @ xi)[:, 1:, :]


def alias_matrix(d: DesignMatrix, i: int) -> np.ndarray:
    if not 2 <= i <= d.factors:
        raise OrderError(f"alias order {i} outside 2..{d.factors}")
    return alias_matrices(d.cols[None, :], d.runs, i)[0]


def alias_traces(cols2d: np.ndarray, n: int, i: int) -> np.ndarray:
    out = np.empty(cols2d.shape[0])
    if comb(cols2d.shape[1], i) == 0:
        out[:] = 0.0
        return out
    for s in range(0, cols2d.shape[0], CHUNK):
        a = alias_matrices(cols2d[s:s + CHUNK], n, i)
        out[s:s + CHUNK] = np.einsum("dij,dij->d", a, a)
    return out


def alias_trace(d: DesignMatrix, i: int) -> AliasTrace:
    if not 2 <= i <= d.factors - 1:
        raise OrderError(f"alias order {i} outside 2..{d.factors - 1}")
    return AliasTrace(i, float(alias_traces(d.cols[None, :], d.runs, i)[0]))


# --------------------------------------------------------------------------
# profiles and ranking


def profiles(designs: Sequence[DesignMatrix], form: FormSpec | None = None) -> list[AberrationProfile]:
    """F3, F4, C2, C3 for many same-shape designs."""
    if not designs:
        return []
    n, k = designs[0].shape
    if any(d.shape != (n, k) for d in designs):
        raise ShapeError("profiles needs designs of one shape")
    cols = np.stack([d.cols for d in designs])
    f3 = _freq_rows(j_values(cols, n, 3), 3)
    f4 = _freq_rows(j_values(cols, n, 4), 4)
    c2 = alias_traces(cols, n, 2)
    c3 = alias_traces(cols, n, 3)
    forms = [form] * len(designs) if form is not None else [form_of(d) for d in designs]
    return [AberrationProfile(a, b, float(x), float(y), f) for a, b, x, y, f in zip(f3, f4, c2, c3, forms)]


def profile(d: DesignMatrix, form: FormSpec | None = None) -> AberrationProfile:
    return profiles([d], form)[0]


def g_key(p: AberrationProfile, runs: int) -> tuple:
    """Sort key for G-aberration: counts of F3 then F4 on the common grid N..0."""
    grid = range(runs, -1, -1)
    return p.f3.counts_on(grid) + p.f4.counts_on(grid)


def _form_rank(form: FormSpec | None) -> int:
    # at even k the (k/2, k/2+1) form has the better F1 vector
    if form is None or form.blocks is None:
        return 0
    i, j = form.blocks
    return 0 if i <= j else 1


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(abs(a), abs(b), 1.0)


def _cmp_g2(a, b):
    pa, pb = a[0], b[0]
    for x, y in ((pa.c2, pb.c2), (pa.c3, pb.c3)):
        if not _close(x, y):
            return -1 if x < y else 1
    ka, kb = a[1:], b[1:]
    return (ka > kb) - (ka < kb)


def order_g(profs: Sequence[AberrationProfile], runs: int, tiebreak: Sequence | None = None) -> list[int]:
    """Indices sorted best-first by G-aberration; form, then ``tiebreak`` break ties."""
    tb = list(tiebreak) if tiebreak is not None else list(range(len(profs)))
    return sorted(range(len(profs)), key=lambda t: (g_key(profs[t], runs), _form_rank(profs[t].form), tb[t]))


def order_g2(profs: Sequence[AberrationProfile], runs: int, tiebreak: Sequence | None = None) -> list[int]:
    """Indices sorted best-first by (C2, C3) within tolerance, then by G-aberration."""
    tb = list(tiebreak) if tiebreak is not None else list(range(len(profs)))
    items = [(profs[t], g_key(profs[t], runs), _form_rank(profs[t].form), tb[t], t) for t in range(len(profs))]
    items.sort(key=functools.cmp_to_key(_cmp_g2))
    return [it[-1] for it in items]


def _check_shapes(designs):
    if not designs:
        return
    shape = designs[0].shape
    if any(d.shape != shape for d in designs):
        raise ShapeError("ranking needs designs sharing (N, k)")


def _tiebreak(designs):
    from .canon import canonical_keys

    return [key.data for key in canonical_keys(designs)]


def rank_g(designs: Sequence[DesignMatrix], forms: Sequence[FormSpec] | None = None) -> list[DesignMatrix]:
    """Designs ordered by minimum G-aberration, ties by form then canonical key."""
    designs = list(designs)
    _check_shapes(designs)
    if not designs:
        return []
    profs = _profiles_with_forms(designs, forms)
    return [designs[t] for t in order_g(profs, designs[0].runs, _tiebreak(designs))]


def rank_g2(designs: Sequence[DesignMatrix], forms: Sequence[FormSpec] | None = None) -> list[DesignMatrix]:
    """Designs ordered by minimum G2-aberration; G2 ties ordered by G-aberration."""
    designs = list(designs)
    _check_shapes(designs)
    if not designs:
        return []
    profs = _profiles_with_forms(designs, forms)
    return [designs[t] for t in order_g2(profs, designs[0].runs, _tiebreak(designs))]


def _profiles_with_forms(designs, forms):
    profs = profiles(designs)
    if forms is not None:
        profs = [AberrationProfile(p.f3, p.f4, p.c2, p.c3, f) for p, f in zip(profs, forms)]
    return profs
