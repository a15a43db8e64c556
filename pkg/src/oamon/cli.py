"""``oamon`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 pipeline step failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .classifier import (
    Hyperparams,
    evaluate,
    load_model,
    read_corpus,
    save_model,
    train,
    train_test_split,
    write_corpus,
)
from .errors import DuplicateOrStale, OamonError, StepFailed
from .ingest import SourceTag, parse_publication_record
from .oa import apply_update, read_doi_list, read_histories, resolve_status, write_histories
from .pipeline import (
    append_transitions,
    build_report,
    read_detections,
    read_disciplines,
    run_pipeline,
    step_classify_assign,
    step_detect,
    step_ingest,
    step_oa_resolve,
)
from .report import join_inputs, render
from .sampling import (
    SampleSpec,
    draw_sample,
    estimate_precision,
    fn_breakdown,
    matches_filter,
    parse_filter,
    read_annotations,
    read_feed_status,
    write_sample,
)
from .store import atomic_write_text, iter_store

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STEP = 0, 1, 2, 3

logger = logging.getLogger("oamon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {value!r}")


def _ks(value: str) -> list[int]:
    try:
        ks = [int(k) for k in value.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be positive")
    return ks


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


# --- handlers ------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    result = step_ingest([{"source": args.source, "path": args.input, "snapshot_date": args.snapshot_date}],
                         Path(args.store), args.year_min, args.year_max, args.genre_map)
    _print_json(result.counts)
    return EXIT_OK


def cmd_detect(args) -> int:
    result = step_detect(Path(args.store), Path(args.out), args.rules, args.html_dir, args.hal_countries,
                         args.prefilter or ())
    _print_json(result.counts)
    return EXIT_OK


def cmd_classify_train(args) -> int:
    corpus = read_corpus(args.corpus)
    hyper = Hyperparams(dim=args.dim, buckets=args.buckets, learning_rate=args.lr, epochs=args.epochs,
                        min_token_count=args.min_count, seed=args.seed, use_bigrams=not args.no_bigrams)
    model = train(corpus, hyper)
    save_model(model, args.out)
    _print_json({"examples": len(corpus), "labels": len(model.labels), "vocab": len(model.vocab),
                 "loss_history": model.loss_history})
    return EXIT_OK


def cmd_classify_eval(args) -> int:
    model = load_model(args.model)
    report = evaluate(model, read_corpus(args.test), args.k)
    _print_json(report.to_dict())
    return EXIT_OK


def cmd_classify_split(args) -> int:
    examples = read_corpus(args.corpus)
    train_set, test_set = train_test_split(examples, args.test_fraction, args.seed, args.stratify)
    write_corpus(train_set, args.train_out)
    write_corpus(test_set, args.test_out)
    _print_json({"train": len(train_set), "test": len(test_set), "stratified": args.stratify})
    return EXIT_OK


def cmd_classify_assign(args) -> int:
    result = step_classify_assign(Path(args.store), Path(args.model), Path(args.mapping), Path(args.out), args.tau)
    _print_json(result.counts)
    return EXIT_OK


def cmd_oa_resolve(args) -> int:
    result = step_oa_resolve(Path(args.store), Path(args.out), args.snapshot_date, args.hal_fulltext)
    _print_json(result.counts)
    return EXIT_OK


def cmd_oa_update(args) -> int:
    histories = read_histories(args.history)
    fulltext = read_doi_list(args.hal_fulltext) if args.hal_fulltext else set()
    updated = dict(histories)
    transitions = []
    skipped = applied = 0
    with open(args.snapshot, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = parse_publication_record(line, SourceTag.UNPAYWALL, args.snapshot_date)
            if rec.doi not in histories:
                skipped += 1
                continue
            status = resolve_status(rec, rec.doi in fulltext, args.snapshot_date)
            updated[rec.doi], transition = apply_update(updated[rec.doi], status)
            applied += 1
            if transition is not None:
                transitions.append(transition)
    write_histories(args.history, updated.values())
    append_transitions(Path(args.history) / "transitions.jsonl", transitions)
    _print_json({"updated": applied, "transitions": len(transitions), "outside_perimeter": skipped})
    return EXIT_OK


def cmd_report(args) -> int:
    rows = build_report(Path(args.store), Path(args.detections), args.disciplines, args.oa_history,
                        args.dimension, args.year, args.top, args.genre)
    atomic_write_text(Path(args.out), render(rows, args.format))
    return EXIT_OK


def _joined(args):
    dets = {doi: d.is_target_country for doi, d in read_detections(Path(args.detections)).items()}
    discs = read_disciplines(args.disciplines) if args.disciplines else {}
    hist = read_histories(args.oa_history) if args.oa_history else {}
    records = list(iter_store(args.store))
    return records, join_inputs(records, dets, discs, hist)


def cmd_sample_draw(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"{out} exists; sample campaigns are immutable (use --force to redraw)")
    terms = parse_filter(args.filter)
    records, joined = _joined(args)
    population = [jr.doi for jr in joined if matches_filter(jr, terms)]
    spec = SampleSpec(terms, args.n, args.seed)
    dois = draw_sample(population, spec.n, spec.seed)
    titles = {r.doi: r.title for r in records}
    write_sample(out, dois, titles, spec, len(set(population)))
    _print_json({"population": len(set(population)), "drawn": len(dois), "out": str(out)})
    return EXIT_OK


def cmd_sample_precision(args) -> int:
    est = estimate_precision(read_annotations(args.annotations))
    _print_json(est.__dict__)
    return EXIT_OK


def cmd_sample_fn(args) -> int:
    br = fn_breakdown(read_annotations(args.annotations), read_feed_status(args.feed_status))
    _print_json(br.__dict__)
    return EXIT_OK


def cmd_run(args) -> int:
    manifest = run_pipeline(Path(args.config), args.store, args.out_dir, True if args.overwrite else None)
    _print_json({"run_id": manifest["run_id"], "status": manifest["status"],
                 "steps": [s["subcommand"] for s in manifest["steps"]]})
    return EXIT_OK


# --- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oamon", description="National open access monitoring pipeline")
    p.add_argument("--version", action="version", version=f"oamon {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse a snapshot file into the record store")
    s.add_argument("--source", required=True, choices=[t.value for t in SourceTag])
    s.add_argument("--snapshot-date", required=True, type=_date)
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--year-min", type=int, default=2013)
    s.add_argument("--year-max", type=int, default=2017)
    s.add_argument("--genre-map", type=Path, help="JSON table of source genre -> genre bucket")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("detect", help="decide the country affiliation of stored records")
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--rules", type=Path, help="rules file (JSON or TOML); default: bundled French rules")
    s.add_argument("--html-dir", type=Path)
    s.add_argument("--hal-countries", type=Path, help="TSV: doi TAB code[,code]")
    s.add_argument("--prefilter", type=Path, nargs="*", help="TSV name lists: family TAB given")
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_detect)

    c = sub.add_parser("classify", help="discipline classifier").add_subparsers(
        dest="classify_command", required=True, parser_class=_Parser)
    s = c.add_parser("train")
    s.add_argument("--corpus", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--dim", type=int, default=100)
    s.add_argument("--buckets", type=int, default=2_000_000)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--epochs", type=int, default=5)
    s.add_argument("--min-count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-bigrams", action="store_true")
    s.set_defaults(func=cmd_classify_train)
    s = c.add_parser("eval")
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--test", required=True, type=Path)
    s.add_argument("--k", type=_ks, default=[1, 5])
    s.set_defaults(func=cmd_classify_eval)
    s = c.add_parser("split", help="seeded train/test split of a corpus TSV")
    s.add_argument("--corpus", required=True, type=Path)
    s.add_argument("--train-out", required=True, type=Path)
    s.add_argument("--test-out", required=True, type=Path)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stratify", action="store_true")
    s.set_defaults(func=cmd_classify_split)
    s = c.add_parser("assign")
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--mapping", required=True, type=Path)
    s.add_argument("--tau", type=float, default=0.5)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_classify_assign)

    o = sub.add_parser("oa", help="OA status resolution and history updates").add_subparsers(
        dest="oa_command", required=True, parser_class=_Parser)
    s = o.add_parser("resolve")
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--hal-fulltext", type=Path, help="one DOI per line with HAL fulltext")
    s.add_argument("--snapshot-date", required=True, type=_date)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_oa_resolve)
    s = o.add_parser("update")
    s.add_argument("--history", required=True, type=Path)
    s.add_argument("--snapshot", required=True, type=Path)
    s.add_argument("--snapshot-date", required=True, type=_date)
    s.add_argument("--hal-fulltext", type=Path)
    s.set_defaults(func=cmd_oa_update)

    s = sub.add_parser("report", help="grouped OA rates")
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--detections", required=True, type=Path)
    s.add_argument("--disciplines", type=Path)
    s.add_argument("--oa-history", type=Path)
    s.add_argument("--dimension", required=True, choices=["year", "genre", "discipline", "publisher"])
    s.add_argument("--year", type=int)
    s.add_argument("--genre", help="restrict to one genre bucket")
    s.add_argument("--top", type=int)
    s.add_argument("--format", required=True, choices=["csv", "json", "svg"])
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_report)

    sm = sub.add_parser("sample", help="manual-check samples and error estimates").add_subparsers(
        dest="sample_command", required=True, parser_class=_Parser)
    s = sm.add_parser("draw")
    s.add_argument("--store", required=True, type=Path)
    s.add_argument("--detections", required=True, type=Path)
    s.add_argument("--disciplines", type=Path)
    s.add_argument("--oa-history", type=Path)
    s.add_argument("--filter", default="", help="e.g. year=2017,detected=true or status=closed")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_sample_draw)
    s = sm.add_parser("precision")
    s.add_argument("--annotations", required=True, type=Path)
    s.set_defaults(func=cmd_sample_precision)
    s = sm.add_parser("fn")
    s.add_argument("--annotations", required=True, type=Path)
    s.add_argument("--feed-status", required=True, type=Path)
    s.set_defaults(func=cmd_sample_fn)

    s = sub.add_parser("run", help="run the whole pipeline from a config file")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--store", type=Path)
    s.add_argument("--out-dir", type=Path)
    s.add_argument("--overwrite", action="store_true", help="replace outputs of a previous run")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"oamon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StepFailed as exc:
        print(f"oamon: {exc}", file=sys.stderr)
        return EXIT_STEP
    except (OamonError, DuplicateOrStale, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"oamon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
