"""Command-line driver: enumerate, characterize, classify, rank, report, verify."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import catalog
from .canon import are_isomorphic
from .catalog import CatalogRecord, catalog_name, write_catalog
from .criteria import order_g, order_g2
from .design import FormSpec, forms_for
from .enumerator import WORKERS_ENV, default_workers, enumerate_catalog, saturated_form_missing
from .errors import DesignError, MissingDataError
from .oracle import brute_force_catalog

log = logging.getLogger("daenum")

LONG_RUNS = 18
LONG_FACTORS = 9
EMPTY_NOTE = "no-design-has-the-optimal-information-matrix-form"


def _stage_writer(out: Path, runs: int):
    def write(h, form, state):
        records = [CatalogRecord(d, form, key) for key, d in state.sorted_items()]
        note = EMPTY_NOTE if not records and saturated_form_missing(runs, h) else None
        write_catalog(records, out / catalog_name(runs, h, form), runs, h, form, note)
    return write


def _last_complete_stage(out: Path, runs: int, k_max: int):
    best = None
    for h in range(3, k_max + 1):
        if all((out / catalog_name(runs, h, f)).exists() for f in forms_for(runs, h)):
            best = h
        else:
            break
    return best


def cmd_enumerate(args) -> int:
    if args.runs >= LONG_RUNS and args.max_factors >= LONG_FACTORS and not args.allow_long:
        raise SystemExit(
            f"N={args.runs} with k >= {LONG_FACTORS} runs for days; pass --allow-long to proceed"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resume = resume_h = None
    if args.resume:
        resume_h = _last_complete_stage(out, args.runs, args.max_factors)
        if resume_h is not None:
            resume = {f: [r.design for r in catalog.read_catalog(out / catalog_name(args.runs, resume_h, f)).records]
                      for f in forms_for(args.runs, resume_h)}
            log.info("resuming after stage %d", resume_h)
    if resume_h is not None and resume_h >= args.max_factors:
        print(f"catalog already complete up to k={resume_h}")
        return 0
    workers = args.workers or default_workers()
    result = enumerate_catalog(args.runs, args.max_factors, workers=workers,
                               on_stage=_stage_writer(out, args.runs), resume=resume, resume_h=resume_h)
    for (k, form), designs in result.items():
        note = "  (optimal form does not exist)" if not designs and saturated_form_missing(args.runs, k) else ""
        print(f"N={args.runs} k={k} {form.label}: {len(designs)}{note}")
    return 0


def cmd_characterize(args) -> int:
    paths = catalog.catalog_paths(args.input)
    if not paths:
        raise MissingDataError(f"no catalog files in {args.input}")
    for p in paths:
        cf = catalog.characterize_file(p)
        print(f"{p.name}: {len(cf.records)} profiles")
    return 0


def cmd_classify(args) -> int:
    paths = catalog.catalog_paths(args.input)
    if not paths:
        raise MissingDataError(f"no catalog files in {args.input}")
    for p in paths:
        cf = catalog.classify_file(p)
        tno = sum(not r.oa_derivable for r in cf.records)
        print(f"{p.name}: T={len(cf.records)} T_no={tno}")
    return 0


def cmd_rank(args) -> int:
    for cf in catalog.load_all(args.input, args.runs):
        if not cf.records:
            continue
        if any(r.profile is None for r in cf.records):
            raise MissingDataError(f"{catalog_name(cf.runs, cf.factors, cf.form)} is not characterised")
        profs = [r.profile for r in cf.records]
        tb = [r.key.data for r in cf.records]
        order = order_g(profs, cf.runs, tb) if args.criterion == "g" else order_g2(profs, cf.runs, tb)
        for pos, t in enumerate(order[: args.top]):
            p = profs[t]
            print(f"N={cf.runs} k={cf.factors} {cf.form.label} #{pos + 1}: id={t} "
                  f"J3m={p.f3.leading} J4m={p.f4.leading or '-'} C2={p.c2:.3f} C3={p.c3:.3f}")
    return 0


def cmd_report(args) -> int:
    if args.what == "counts":
        text = catalog.counts_table(catalog.report_counts(args.input, args.runs), args.tsv)
    else:
        text = catalog.best_table(catalog.report_best(args.input, args.criterion, args.runs), args.tsv)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    if args.oracle:
        if args.runs is None or args.factors is None:
            raise SystemExit("verify --oracle needs --runs and --factors")
        ours = enumerate_catalog(args.runs, args.factors, workers=1)
        ok = True
        for form, oc in brute_force_catalog(args.runs, args.factors).items():
            mine = ours.get((args.factors, form), [])
            matched = [sum(are_isomorphic(o, d) for d in mine) for o in oc.classes]
            good = len(mine) == len(oc) and all(m == 1 for m in matched)
            ok &= good
            print(f"N={args.runs} k={args.factors} {form.label}: oracle={len(oc)} "
                  f"enumerator={len(mine)} {'OK' if good else 'MISMATCH'}")
        return 0 if ok else 1
    if args.input is None:
        raise SystemExit("verify needs --oracle or --in DIR")
    for p in catalog.catalog_paths(args.input, args.runs):
        cf = catalog.read_catalog(p, verify=True)
        print(f"{p.name}: {len(cf.records)} records OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="daenum", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="enumerate all non-isomorphic DA designs")
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--max-factors", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: ${WORKERS_ENV} or all cores)")
    p.add_argument("--allow-long", action="store_true", help="permit multi-day enumerations")
    p.add_argument("--resume", action="store_true", help="continue from the last complete stage in --out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("characterize", help="add F3, F4, C2, C3 to every record")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("classify-oa", help="flag records obtainable from an orthogonal array")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("rank", help="rank characterised catalogs")
    p.add_argument("--criterion", choices=["g", "g2"], required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--top", type=int, default=1)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("report", help="count or best-design tables")
    p.add_argument("what", choices=["counts", "best"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--criterion", choices=["g", "g2"], default="g")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--tsv", action="store_true", help="tab-separated machine table")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="oracle cross-check or catalog re-validation")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--factors", type=int, default=None)
    p.add_argument("--in", dest="input", default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except DesignError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
