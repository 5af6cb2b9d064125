"""Whether a DA design arises from a strength-2 orthogonal array by adding runs.

An N = 1 mod 4 design is OA-derivable when deleting one run leaves an
orthogonal array; an N = 2 mod 4 design when deleting some pair of runs
does.  Deleting runs commutes with the isomorphism group, so the answer is
the same for every member of an isomorphism class.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .design import DesignMatrix, form_representative, information_summary
from .errors import FormError


@dataclass(frozen=True)
class OADerivability:
    derivable: bool
    witness_rows: tuple[int, ...] | None = None


def is_orthogonal_array(d: DesignMatrix) -> bool:
    info = information_summary(d)
    if any(s != 0 for s in info.column_sums):
        return False
    g = info.grams
    return bool(np.all(g[~np.eye(d.factors, dtype=bool)] == 0))


def _scan(levels: np.ndarray, sums: np.ndarray, grams: np.ndarray, width: int):
    n, k = levels.shape
    off = ~np.eye(k, dtype=bool)
    tuples = np.array(list(combinations(range(n), width)), dtype=np.intp)
    picked = levels[tuples]  # (T, width, k)
    rest_sums = sums[None, :] - picked.sum(axis=1)
    ok = np.all(rest_sums == 0, axis=1)
    if not ok.any():
        return None
    cand = np.flatnonzero(ok)
    p = picked[cand].astype(np.int64)
    rest_g = grams[None, :, :] - np.einsum("twa,twb->tab", p, p)
    good = np.all(rest_g[:, off] == 0, axis=1)
    hits = cand[good]
    if hits.size == 0:
        return None
    return tuple(int(r) for r in tuples[hits[0]])


def classify(d: DesignMatrix) -> OADerivability:
    """Scan single runs (N = 1 mod 4) or run pairs (N = 2 mod 4) for a deletion leaving an OA."""
    if form_representative(d) is None:
        raise FormError("classify needs a design isomorphic to an optimal-form DA design")
    info = information_summary(d)
    width = 1 if d.runs % 4 == 1 else 2
    witness = _scan(d.levels.astype(np.int64), np.array(info.column_sums), np.asarray(info.grams), width)
    if witness is None:
        return OADerivability(False)
    return OADerivability(True, witness)
