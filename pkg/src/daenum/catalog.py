"""Catalog files, per-stage persistence and the count / best-design reports.

One file per (N, k, form), named ``n{N}_k{k:02d}_{form}.cat``::

    # schema=1
    # N=17
    # k=5
    # form=N1
    # count=58
    # canon-scheme=lexmin-r1

    # id=0 key=<hex> oa=no f3=1:10 f4=1:5 c2=0.1029... c3=0.1029...
    -++--...
    ...

Header lines come first; each record is a ``#`` metadata line followed by
N lines of k characters from {+, -}; records are separated by blank lines
and sorted by canonical key.
"""

from __future__ import annotations

import csv
import io
import os
import re
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import canon
from .canon import CanonicalKey, canonical_keys
from .criteria import AberrationProfile, FrequencyVector, j_values, order_g, order_g2, profiles
from .design import DesignMatrix, FormSpec, matches_form
from .errors import FormError, MissingDataError, ParseError, VersionError
from .oa import classify

SCHEMA = 1
_NAME = re.compile(r"^n(\d+)_k(\d+)_(N1|G\d+-\d+)\.cat$")
_PLUS, _MINUS = ord("+"), ord("-")


@dataclass(frozen=True)
class CatalogRecord:
    design: DesignMatrix
    form: FormSpec
    key: CanonicalKey
    profile: AberrationProfile | None = None
    oa_derivable: bool | None = None


@dataclass
class CatalogFile:
    runs: int
    factors: int
    form: FormSpec
    records: list[CatalogRecord]
    note: str | None = None


def catalog_name(runs: int, factors: int, form: FormSpec) -> str:
    return f"n{runs}_k{factors:02d}_{form.label}.cat"


def make_records(designs: Sequence[DesignMatrix], form: FormSpec) -> list[CatalogRecord]:
    keys = canonical_keys(designs)
    recs = [CatalogRecord(d, form, key) for d, key in zip(designs, keys)]
    recs.sort(key=lambda r: r.key.data)
    return recs


# --------------------------------------------------------------------------
# writing


def _meta_line(idx: int, rec: CatalogRecord) -> str:
    parts = [f"# id={idx}", f"key={rec.key.hex()}"]
    if rec.oa_derivable is not None:
        parts.append("oa=" + ("yes" if rec.oa_derivable else "no"))
    p = rec.profile
    if p is not None:
        parts += [f"f3={p.f3.encode()}", f"f4={p.f4.encode()}", f"c2={p.c2!r}", f"c3={p.c3!r}"]
    return " ".join(parts)


def _row_blocks(designs: Sequence[DesignMatrix], runs: int) -> list[str]:
    if not designs:
        return []
    cols = np.stack([d.cols for d in designs])
    rows = np.arange(runs, dtype=np.uint64)
    bits = (cols[:, None, :] >> rows[None, :, None]) & np.uint64(1)
    chars = np.where(bits == 1, _PLUS, _MINUS).astype(np.uint8)
    nl = np.full(chars.shape[:2] + (1,), ord("\n"), dtype=np.uint8)
    block = np.concatenate([chars, nl], axis=2).reshape(len(designs), -1)
    return [b.tobytes().decode("ascii") for b in block]


def write_catalog(
    records: Sequence[CatalogRecord],
    path: str | os.PathLike,
    runs: int | None = None,
    factors: int | None = None,
    form: FormSpec | None = None,
    note: str | None = None,
) -> Path:
    """Write records (sorted by key) atomically; bytes depend only on the record set."""
    records = sorted(records, key=lambda r: r.key.data)
    if records:
        runs, factors = records[0].design.shape
        form = records[0].form
    if runs is None or factors is None or form is None:
        raise ValueError("an empty catalog needs runs, factors and form")
    out = io.StringIO()
    out.write(f"# schema={SCHEMA}\n# N={runs}\n# k={factors}\n# form={form.label}\n")
    out.write(f"# count={len(records)}\n# canon-scheme={canon.SCHEME}\n")
    if note:
        out.write(f"# note={note}\n")
    blocks = _row_blocks([r.design for r in records], runs)
    for idx, (rec, block) in enumerate(zip(records, blocks)):
        out.write("\n")
        out.write(_meta_line(idx, rec) + "\n")
        out.write(block)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(out.getvalue())
    # mkstemp creates 0600 files; give the catalog ordinary permissions
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    os.replace(tmp, path)
    return path


# --------------------------------------------------------------------------
# reading


def _parse_meta(text: str, lineno: int) -> dict[str, str]:
    out = {}
    for item in text.lstrip("#").split():
        if "=" not in item:
            raise ParseError(f"expected key=value, got {item!r}", lineno)
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _profile_from(meta: dict[str, str], form: FormSpec, lineno: int) -> AberrationProfile | None:
    if "f3" not in meta:
        return None
    try:
        return AberrationProfile(
            FrequencyVector.decode(3, meta["f3"]),
            FrequencyVector.decode(4, meta.get("f4", "")),
            float(meta["c2"]),
            float(meta["c3"]),
            form,
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad profile fields: {exc}", lineno) from exc


def read_catalog(path: str | os.PathLike, verify: bool = False) -> CatalogFile:
    """Parse a catalog file; with ``verify`` every record's form and key are recomputed."""
    path = Path(path)
    lines = path.read_text().split("\n")
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        header.update(_parse_meta(lines[i], i + 1))
        i += 1
    try:
        schema = int(header["schema"])
        runs, factors = int(header["N"]), int(header["k"])
        form = FormSpec.parse(header["form"])
        count = int(header["count"])
        scheme = header["canon-scheme"]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"incomplete header: {exc}", i) from exc
    if schema != SCHEMA:
        raise VersionError(f"catalog schema {schema} is not {SCHEMA}")
    if scheme != canon.SCHEME:
        raise VersionError(f"catalog canonicalised with {scheme!r}, this build uses {canon.SCHEME!r}")

    metas: list[tuple[dict[str, str], int]] = []
    rows: list[str] = []
    row_lines: list[int] = []
    while i < len(lines):
        line = lines[i]
        if line == "":
            i += 1
            continue
        if not line.startswith("#"):
            raise ParseError("expected a record header line", i + 1)
        metas.append((_parse_meta(line, i + 1), i + 1))
        for t in range(1, runs + 1):
            if i + t >= len(lines) or len(lines[i + t]) != factors:
                raise ParseError(f"expected a run of {factors} characters", i + t + 1)
            rows.append(lines[i + t])
            row_lines.append(i + t + 1)
        i += runs + 1
    if len(metas) != count:
        raise ParseError(f"header count {count} but {len(metas)} records", len(lines))

    records: list[CatalogRecord] = []
    if metas:
        raw = np.frombuffer("".join(rows).encode("ascii", "replace"), dtype=np.uint8)
        raw = raw.reshape(len(metas), runs, factors)
        bad = (raw != _PLUS) & (raw != _MINUS)
        if bad.any():
            d, r, _ = np.argwhere(bad)[0]
            raise ParseError("run levels must be '+' or '-'", row_lines[d * runs + r])
        weights = np.left_shift(np.uint64(1), np.arange(runs, dtype=np.uint64))
        cols = ((raw == _PLUS).astype(np.uint64) * weights[None, :, None]).sum(axis=1, dtype=np.uint64)
        for (meta, lineno), c in zip(metas, cols):
            if "key" not in meta:
                raise ParseError("record without key", lineno)
            oa = meta.get("oa")
            if oa not in (None, "yes", "no"):
                raise ParseError(f"bad oa flag {oa!r}", lineno)
            records.append(CatalogRecord(
                DesignMatrix(c, runs),
                form,
                CanonicalKey(bytes.fromhex(meta["key"])),
                _profile_from(meta, form, lineno),
                None if oa is None else oa == "yes",
            ))
    keys = [r.key.data for r in records]
    if keys != sorted(keys):
        raise ParseError("records are not sorted by canonical key", len(lines))
    if verify:
        verify_records(records)
    return CatalogFile(runs, factors, form, records, header.get("note"))


def verify_records(records: Sequence[CatalogRecord]) -> None:
    """Recompute form, canonical key, profile and OA flag of every record."""
    if not records:
        return
    designs = [r.design for r in records]
    for rec, key in zip(records, canonical_keys(designs)):
        if not matches_form(rec.design, rec.form):
            raise ParseError(f"record {rec.key.hex()} is not in form {rec.form.label}")
        if key != rec.key:
            raise ParseError(f"record {rec.key.hex()} has a stale canonical key")
    with_profile = [r for r in records if r.profile is not None]
    if with_profile:
        fresh = profiles([r.design for r in with_profile], with_profile[0].form)
        for rec, p in zip(with_profile, fresh):
            q = rec.profile
            if (p.f3, p.f4) != (q.f3, q.f4) or not (np.isclose(p.c2, q.c2) and np.isclose(p.c3, q.c3)):
                raise ParseError(f"record {rec.key.hex()} has a stale profile")
    for rec in records:
        if rec.oa_derivable is not None and classify(rec.design).derivable != rec.oa_derivable:
            raise ParseError(f"record {rec.key.hex()} has a stale OA flag")


def catalog_paths(root: str | os.PathLike, runs: int | None = None) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise MissingDataError(f"catalog directory {root} does not exist")
    out = []
    for p in sorted(root.iterdir()):
        m = _NAME.match(p.name)
        if m and (runs is None or int(m.group(1)) == runs):
            out.append(p)
    return out


def _sort_key(cf: CatalogFile):
    return (cf.runs, cf.factors, cf.form.label != "N1", cf.form.blocks or (0, 0))


def load_all(root: str | os.PathLike, runs: int | None = None) -> list[CatalogFile]:
    paths = catalog_paths(root, runs)
    if not paths:
        raise MissingDataError(f"no catalog files in {root}")
    return sorted((read_catalog(p) for p in paths), key=_sort_key)


# --------------------------------------------------------------------------
# characterisation passes


def _check_low_order(designs: Sequence[DesignMatrix]) -> None:
    # F1 and F2 are fixed by the information-matrix form, so one bucket shares them
    if not designs:
        return
    cols = np.stack([d.cols for d in designs])
    n = designs[0].runs
    for s in (1, 2):
        if designs[0].factors < s:
            continue
        jv = np.sort(j_values(cols, n, s), axis=1)
        if np.any(jv != jv[0]):
            raise FormError(f"F{s} differs inside one form bucket")


def characterize_file(path: str | os.PathLike) -> CatalogFile:
    cf = read_catalog(path)
    designs = [r.design for r in cf.records]
    _check_low_order(designs)
    profs = profiles(designs, cf.form)
    cf.records = [replace(r, profile=p) for r, p in zip(cf.records, profs)]
    write_catalog(cf.records, path, cf.runs, cf.factors, cf.form, cf.note)
    return cf


def classify_file(path: str | os.PathLike) -> CatalogFile:
    cf = read_catalog(path)
    cf.records = [replace(r, oa_derivable=classify(r.design).derivable) for r in cf.records]
    write_catalog(cf.records, path, cf.runs, cf.factors, cf.form, cf.note)
    return cf


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CountRow:
    runs: int
    factors: int
    form: str
    total: int
    not_from_oa: int


def report_counts(root: str | os.PathLike, runs: int | None = None) -> list[CountRow]:
    """T and T_no per (N, k, form); OA flags are computed where missing."""
    out = []
    for cf in load_all(root, runs):
        tno = 0
        for r in cf.records:
            derivable = r.oa_derivable if r.oa_derivable is not None else classify(r.design).derivable
            tno += not derivable
        out.append(CountRow(cf.runs, cf.factors, cf.form.label, len(cf.records), tno))
    return out


@dataclass(frozen=True)
class BestRow:
    runs: int
    factors: int
    form: str
    criterion: str
    record_id: int
    key: str
    j3: tuple[int, int] | None
    j4: tuple[int, int] | None
    c2: float
    c3: float
    not_from_oa: bool | None


def _winner(records: list[CatalogRecord], runs: int, criterion: str) -> int:
    profs = [r.profile for r in records]
    tb = [r.key.data for r in records]
    order = order_g(profs, runs, tb) if criterion == "g" else order_g2(profs, runs, tb)
    return order[0]


def report_best(root: str | os.PathLike, criterion: str, runs: int | None = None) -> list[BestRow]:
    """Minimum G (``g``) or G2 (``g2``) aberration design per (N, k, form).

    For even k at N = 2 mod 4 an extra row with form ``*<form>`` gives the
    winner across both forms.
    """
    if criterion not in ("g", "g2"):
        raise ValueError(f"criterion must be g or g2, got {criterion!r}")
    rows = []
    by_nk: dict[tuple[int, int], list[CatalogFile]] = {}
    for cf in load_all(root, runs):
        if not cf.records:
            continue
        if any(r.profile is None for r in cf.records):
            raise MissingDataError(f"{catalog_name(cf.runs, cf.factors, cf.form)} is not characterised")
        ids = list(range(len(cf.records)))
        rows.append(_best_row(cf.runs, cf.factors, cf.records, ids, criterion, combined=False))
        by_nk.setdefault((cf.runs, cf.factors), []).append(cf)
    for (n, k), cfs in by_nk.items():
        if len(cfs) > 1:
            recs = [r for cf in cfs for r in cf.records]
            ids = [i for cf in cfs for i in range(len(cf.records))]
            rows.append(_best_row(n, k, recs, ids, criterion, combined=True))
    rows.sort(key=lambda r: (r.runs, r.factors, r.form.startswith("*"), r.form))
    return rows


def _best_row(runs, factors, records, ids, criterion, combined) -> BestRow:
    t = _winner(records, runs, criterion)
    rec = records[t]
    p = rec.profile
    derivable = rec.oa_derivable if rec.oa_derivable is not None else classify(rec.design).derivable
    form = ("*" if combined else "") + rec.form.label
    return BestRow(runs, factors, form, criterion, ids[t], rec.key.hex(),
                   p.f3.leading, p.f4.leading, p.c2, p.c3, not derivable)


def _fmt_pair(p: tuple[int, int] | None) -> str:
    return "" if p is None else f"({p[0]}, {p[1]})"


def counts_table(rows: Iterable[CountRow], tsv: bool) -> str:
    header = ["N", "k", "form", "T", "T_no"]
    body = [[str(r.runs), str(r.factors), r.form, str(r.total), str(r.not_from_oa)] for r in rows]
    return _table(header, body, tsv)


def best_table(rows: Iterable[BestRow], tsv: bool) -> str:
    header = ["N", "k", "form", "crit", "id", "nOA", "J3m_f", "J4m_f", "C2", "C3", "key"]
    body = []
    for r in rows:
        body.append([
            str(r.runs), str(r.factors), r.form, "m" + r.criterion.upper(), str(r.record_id),
            "x" if r.not_from_oa else "", _fmt_pair(r.j3), _fmt_pair(r.j4),
            f"{r.c2:.3f}", f"{r.c3:.3f}", r.key,
        ])
    return _table(header, body, tsv)


def _table(header: list[str], body: list[list[str]], tsv: bool) -> str:
    if tsv:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in [header] + body]
    return "\n".join(lines) + "\n"
