"""Two-level designs, information summaries and optimal-form predicates.

A design is stored column-wise as packed bits (bit r set iff run r is at +1).
The intercept is never materialised: column sums stand in for the first
row of X'X.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._bits import MAX_RUNS, full_mask, pack_levels, unpack_columns
from .errors import FormError, RunSizeResidueError, ShapeError, SpecShapeError


class DesignMatrix:
    """Immutable N x k design over {-1, +1}."""

    __slots__ = ("runs", "cols", "_hash")

    def __init__(self, cols: Iterable[int] | np.ndarray, runs: int):
        if not 2 <= runs <= MAX_RUNS:
            raise ShapeError(f"run size {runs} outside 2..{MAX_RUNS}")
        arr = np.array(cols, dtype=np.uint64).reshape(-1)
        if arr.size < 1:
            raise ShapeError("a design needs at least one factor")
        if np.any(arr > np.uint64(full_mask(runs))):
            raise ShapeError("column word has bits beyond the run size")
        arr.flags.writeable = False
        self.runs = runs
        self.cols = arr
        self._hash = None

    @classmethod
    def from_levels(cls, levels: Sequence[Sequence[int]] | np.ndarray) -> DesignMatrix:
        arr = np.asarray(levels)
        if arr.ndim != 2:
            raise ShapeError("levels must be a 2-d array")
        if not np.all((arr == 1) | (arr == -1)):
            raise ShapeError("levels must be -1 or +1")
        return cls(pack_levels(arr), arr.shape[0])

    @property
    def factors(self) -> int:
        return int(self.cols.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.runs, self.factors

    @property
    def levels(self) -> np.ndarray:
        return unpack_columns(self.cols, self.runs)

    def column(self, a: int) -> int:
        return int(self.cols[a])

    def with_column(self, col: int) -> DesignMatrix:
        return DesignMatrix(np.append(self.cols, np.uint64(col)), self.runs)

    def drop_column(self, a: int) -> DesignMatrix:
        return DesignMatrix(np.delete(self.cols, a), self.runs)

    def drop_rows(self, rows: Iterable[int]) -> DesignMatrix:
        keep = sorted(set(range(self.runs)) - set(rows))
        return DesignMatrix.from_levels(self.levels[keep])

    def __eq__(self, other):
        if not isinstance(other, DesignMatrix):
            return NotImplemented
        return self.runs == other.runs and np.array_equal(self.cols, other.cols)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.runs, self.cols.tobytes()))
        return self._hash

    def __repr__(self):
        return f"DesignMatrix(runs={self.runs}, factors={self.factors})"

    def __str__(self):
        return "\n".join("".join("+" if v > 0 else "-" for v in row) for row in self.levels)


@dataclass(frozen=True)
class InformationSummary:
    column_sums: tuple[int, ...]
    grams: np.ndarray


def information_summary(d: DesignMatrix) -> InformationSummary:
    """Column sums and the k x k gram matrix, both from popcounts."""
    n = d.runs
    cols = d.cols
    sums = 2 * np.bitwise_count(cols).astype(np.int64) - n
    grams = n - 2 * np.bitwise_count(cols[:, None] ^ cols[None, :]).astype(np.int64)
    grams.flags.writeable = False
    return InformationSummary(tuple(int(s) for s in sums), grams)


@dataclass(frozen=True, order=True)
class FormSpec:
    """Which optimal information-matrix form a design is held to.

    ``blocks`` is ``(i, j)`` for the block-diagonal form used at N = 2 mod 4,
    with the intercept counted in the first block, and ``None`` for the
    single form used at N = 1 mod 4.
    """

    variant: str
    blocks: tuple[int, int] | None = None

    def __post_init__(self):
        if self.variant == "N1":
            if self.blocks is not None:
                raise SpecShapeError("the N1 form has no block sizes")
        elif self.variant == "N2":
            if self.blocks is None or len(self.blocks) != 2 or min(self.blocks) < 1:
                raise SpecShapeError("the N2 form needs two positive block sizes")
            object.__setattr__(self, "blocks", (int(self.blocks[0]), int(self.blocks[1])))
        else:
            raise SpecShapeError(f"unknown form variant {self.variant!r}")

    @classmethod
    def n1(cls) -> FormSpec:
        return cls("N1")

    @classmethod
    def n2(cls, i: int, j: int) -> FormSpec:
        return cls("N2", (i, j))

    @property
    def label(self) -> str:
        if self.variant == "N1":
            return "N1"
        return "G{}-{}".format(*self.blocks)

    @classmethod
    def parse(cls, label: str) -> FormSpec:
        if label == "N1":
            return cls.n1()
        if label.startswith("G") and "-" in label:
            i, j = label[1:].split("-")
            return cls.n2(int(i), int(j))
        raise SpecShapeError(f"cannot parse form label {label!r}")

    @property
    def factors(self) -> int | None:
        if self.blocks is None:
            return None
        return self.blocks[0] + self.blocks[1] - 1

    def check(self, runs: int, k: int) -> None:
        """Raise unless this form is admissible for an N x k design."""
        if self.variant == "N1":
            if runs % 4 != 1:
                raise RunSizeResidueError(f"N1 form needs N = 1 mod 4, got {runs}")
            return
        if runs % 4 != 2:
            raise RunSizeResidueError(f"N2 form needs N = 2 mod 4, got {runs}")
        i, j = self.blocks
        if i + j != k + 1:
            raise SpecShapeError(f"blocks {self.blocks} do not fit k={k}")
        if k % 2 == 1 and i != j:
            raise SpecShapeError(f"odd k={k} needs equal blocks, got {self.blocks}")
        if k % 2 == 0 and {i, j} != {k // 2, k // 2 + 1}:
            raise SpecShapeError(f"even k={k} needs blocks {{k/2, k/2+1}}, got {self.blocks}")


def forms_for(runs: int, k: int) -> list[FormSpec]:
    """All optimal forms for an N-run k-factor design, in table order."""
    if runs % 4 == 1:
        return [FormSpec.n1()]
    if runs % 4 == 2:
        if k == 1:
            return [FormSpec.n2(1, 1)]
        if k % 2:
            return [FormSpec.n2((k + 1) // 2, (k + 1) // 2)]
        return [FormSpec.n2(k // 2, k // 2 + 1), FormSpec.n2(k // 2 + 1, k // 2)]
    raise RunSizeResidueError(f"no DA form handled for N={runs}")


def matches_n1_form(d: DesignMatrix) -> bool:
    """X'X == (N-1) I + J, i.e. every column sum and every inner product is 1."""
    if d.runs % 4 != 1:
        raise RunSizeResidueError(f"N1 form needs N = 1 mod 4, got {d.runs}")
    info = information_summary(d)
    if any(s != 1 for s in info.column_sums):
        return False
    g = info.grams
    off = g[~np.eye(d.factors, dtype=bool)]
    return bool(np.all(off == 1))


def matches_n2_form(d: DesignMatrix, spec: FormSpec) -> bool:
    """Block-diagonal form: sum-2 columns and sum-0 columns, orthogonal across."""
    if d.runs % 4 != 2:
        raise RunSizeResidueError(f"N2 form needs N = 2 mod 4, got {d.runs}")
    if spec.variant != "N2":
        raise SpecShapeError("matches_n2_form needs an N2 FormSpec")
    spec.check(d.runs, d.factors)
    info = information_summary(d)
    sums = np.array(info.column_sums)
    if np.any((sums != 0) & (sums != 2)):
        return False
    two = sums == 2
    i, j = spec.blocks
    if two.sum() != i - 1 or (~two).sum() != j:
        return False
    g = info.grams
    same = two[:, None] == two[None, :]
    off = ~np.eye(d.factors, dtype=bool)
    return bool(np.all(g[same & off] == 2) and np.all(g[~same] == 0))


def matches_form(d: DesignMatrix, spec: FormSpec) -> bool:
    if spec.variant == "N1":
        return matches_n1_form(d)
    return matches_n2_form(d, spec)


def form_of(d: DesignMatrix) -> FormSpec | None:
    """The optimal form this exact design satisfies, if any."""
    for spec in forms_for(d.runs, d.factors) if d.runs % 4 in (1, 2) else []:
        if matches_form(d, spec):
            return spec
    return None


def correlation_profile(d: DesignMatrix) -> list[Fraction]:
    """Pairwise column correlations after removing the intercept, as exact rationals.

    Pairs are listed in (a, b) order with a < b.
    """
    if form_of(d) is None:
        raise FormError("design does not match an optimal form")
    n = d.runs
    info = information_summary(d)
    s = info.column_sums
    out = []
    for a in range(d.factors):
        for b in range(a + 1, d.factors):
            num = n * int(info.grams[a, b]) - s[a] * s[b]
            if num == 0:
                out.append(Fraction(0))
            elif abs(s[a]) == abs(s[b]):
                out.append(Fraction(num, n * n - s[a] * s[a]))
            else:
                raise FormError("irrational correlation outside the optimal forms")
    return out


def form_representative(d: DesignMatrix) -> tuple[DesignMatrix, FormSpec] | None:
    """Sign-switch columns so the design lands in an optimal form, if it can.

    Only sign switches are needed: row and column permutations never move a
    design out of (or into) an optimal form.
    """
    if d.runs % 4 not in (1, 2):
        return None
    full = (1 << d.runs) - 1
    cols = [int(c) for c in d.cols]
    sums = information_summary(d).column_sums
    flip = [s < 0 for s in sums]
    if d.runs % 4 == 2:
        zero = [a for a, s in enumerate(sums) if s == 0]
        if zero:
            first = cols[zero[0]]
            for a in zero[1:]:
                ip = d.runs - 2 * bin(first ^ cols[a]).count("1")
                flip[a] = ip < 0
    out = DesignMatrix([(~c) & full if f else c for c, f in zip(cols, flip)], d.runs)
    spec = form_of(out)
    return (out, spec) if spec is not None else None
