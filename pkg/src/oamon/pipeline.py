"""File-to-file pipeline steps and the config-driven runner that records a run manifest.

Steps only talk through files, so any one of them can be rerun on its own.
Each step function returns the paths it wrote plus record counts; the
runner hashes inputs and outputs into the manifest.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from ._compat import tomllib
from .affiliation import (
    AuthorNameIndex,
    DetectionResult,
    FixtureDirectorySource,
    detect_records,
    load_ruleset,
    read_hal_countries,
)
from .classifier import assign_disciplines, load_model, read_mapping
from .errors import OamonError, StepFailed
from .ingest import SourceTag
from .oa import read_doi_list, read_histories, resolve_records, write_histories
from .report import Dimension, aggregate, join_inputs, render, top_groups
from .store import INDEX_NAME, MANIFEST_NAME, atomic_write_text, dumps_line, iter_store, iter_store_views, partition_files, paused_gc, read_manifest
from .store import ingest as ingest_file

logger = logging.getLogger(__name__)

STEPS = ("ingest", "detect", "classify-assign", "oa-resolve", "report")


@dataclass
class StepResult:
    outputs: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)


# --- steps -----------------------------------------------------------------------

def step_ingest(inputs: Sequence[dict], store: Path, year_min: int = 2013, year_max: int = 2017,
                genre_map: Path | None = None) -> StepResult:
    result = StepResult()
    written: dict[str, Path] = {}
    for spec in inputs:
        path = Path(spec["path"])
        if not path.exists():
            raise FileNotFoundError(f"ingest input not found: {path}")
        stats, files = ingest_file(path, SourceTag(spec["source"]), _as_date(spec["snapshot_date"]), store,
                                   year_min, year_max, genre_map)
        for f in files:
            written[str(f)] = f
        for key in ("read", "parsed", "rejected", "out_of_window"):
            result.counts[key] = result.counts.get(key, 0) + getattr(stats, key)
    result.counts["merged"] = read_manifest(store).get("merged", 0)
    result.outputs = sorted(p for p in written.values() if p.exists())
    return result


def step_detect(store: Path, out: Path, rules: Path | None = None, html_dir: Path | None = None,
                hal_countries: Path | None = None, prefilter: Sequence[Path] = ()) -> StepResult:
    ruleset = load_ruleset(rules)
    documents = FixtureDirectorySource(html_dir) if html_dir else None
    hal = read_hal_countries(hal_countries) if hal_countries else None
    index = AuthorNameIndex.from_tsv(prefilter) if prefilter else None
    counts = {"records": 0, "positive": 0, "hal": 0, "scraped-html": 0}
    lines = []
    with paused_gc():
        for det in detect_records(iter_store_views(store), ruleset, documents, hal, index):
            counts["records"] += 1
            if det.is_target_country:
                counts["positive"] += 1
                counts[det.source._value_] += 1
            lines.append(dumps_line(det.to_dict()) + "\n")
    atomic_write_text(out, "".join(lines))
    return StepResult([out], counts)


def read_detections(path: Path) -> dict[str, DetectionResult]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                det = DetectionResult.from_dict(json.loads(line))
                out[det.doi] = det
    return out


def step_classify_assign(store: Path, model: Path, mapping: Path, out: Path, tau: float = 0.5) -> StepResult:
    clf = load_model(model)
    table = read_mapping(mapping)
    assignments = assign_disciplines(iter_store(store), clf, table, tau)
    counts = {"records": len(assignments), "confident": sum(a.confident for a in assignments.values())}
    atomic_write_text(out, "".join(dumps_line(assignments[doi].to_dict(doi)) + "\n" for doi in sorted(assignments)))
    return StepResult([out], counts)


def read_disciplines(path: Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out[d["doi"]] = d["discipline"]
    return out


def step_oa_resolve(store: Path, out_dir: Path, snapshot_date: date, hal_fulltext: Path | None = None) -> StepResult:
    existing = read_histories(out_dir) if out_dir.exists() else {}
    fulltext = read_doi_list(hal_fulltext) if hal_fulltext else set()
    histories = dict(existing)
    transitions = []
    counts = {"records": 0, "oa": 0, "transitions": 0}
    for history, transition in resolve_records(iter_store(store), snapshot_date, fulltext, existing):
        histories[history.doi] = history
        counts["records"] += 1
        counts["oa"] += history.latest.is_oa
        if transition is not None:
            transitions.append(transition)
    counts["transitions"] = len(transitions)
    outputs = write_histories(out_dir, histories.values())
    if transitions:
        outputs.append(append_transitions(out_dir / "transitions.jsonl", transitions))
    return StepResult(outputs, counts)


def append_transitions(path: Path, transitions: Iterable) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        for t in sorted(transitions, key=lambda t: t.doi):
            fh.write(dumps_line(t.to_dict()) + "\n")
    return path


def build_report(store: Path, detections: Path, disciplines: Path | None, oa_history: Path | None,
                 dimension: str, year: int | None = None, top: int | None = None, genre: str | None = None):
    dets = {doi: d.is_target_country for doi, d in read_detections(detections).items()}
    discs = read_disciplines(disciplines) if disciplines else {}
    hist = read_histories(oa_history) if oa_history else {}
    joined = join_inputs(iter_store(store), dets, discs, hist)
    rows = aggregate(joined, Dimension(dimension), year=year, genre=genre)
    if top is not None:
        rows = top_groups(rows, top)
    return rows


def step_report(store: Path, detections: Path, disciplines: Path | None, oa_history: Path | None,
                out_dir: Path, dimensions: Sequence[str], formats: Sequence[str], year: int | None = None,
                top: int | None = None) -> StepResult:
    outputs = []
    counts = {}
    for dim in dimensions:
        rows = build_report(store, detections, disciplines, oa_history, dim, year, top)
        counts[dim] = sum(r.n_total for r in rows)
        for fmt in formats:
            suffix = f"_{year}" if year is not None else ""
            path = out_dir / f"{dim}{suffix}.{fmt}"
            atomic_write_text(path, render(rows, fmt))
            outputs.append(path)
    return StepResult(outputs, counts)


# --- run manifest -----------------------------------------------------------------

def _as_date(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def digest_path(path: Path) -> str:
    """Content hash of a file, or of a directory's (relative name, file hash) listing."""
    path = Path(path)
    if path.is_dir():
        h = hashlib.sha256()
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(f.relative_to(path).as_posix().encode())
            h.update(sha256_file(f).encode())
        return "sha256:" + h.hexdigest()
    return sha256_file(path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _rel(path: Path, *roots: Path) -> str:
    for root in roots:
        try:
            return Path(path).resolve().relative_to(root.resolve()).as_posix()
        except ValueError:
            continue
    return str(path)


def load_config(path: Path) -> dict:
    text = Path(path).read_text("utf-8")
    if Path(path).suffix == ".json":
        return json.loads(text)
    return tomllib.loads(text)


@dataclass
class RunConfig:
    root: Path
    out_dir: Path
    store: Path
    year_min: int
    year_max: int
    genre_map: Path | None
    ingest_inputs: list
    detect: dict
    classify: dict
    oa: dict
    report: dict
    overwrite: bool

    @classmethod
    def from_file(cls, path: Path, store: Path | None = None, out_dir: Path | None = None,
                  overwrite: bool | None = None) -> "RunConfig":
        cfg = load_config(path)
        root = Path(path).resolve().parent

        def resolve(p):
            return None if p in (None, "") else (root / p).resolve()

        run = cfg.get("run", {})
        out = Path(out_dir).resolve() if out_dir else resolve(run.get("out_dir", "out"))
        st = Path(store).resolve() if store else (resolve(run["store"]) if run.get("store") else out / "store")
        ingest_inputs = [
            {**spec, "path": resolve(spec["path"])} for spec in cfg.get("ingest", {}).get("inputs", [])
        ]
        detect = dict(cfg.get("detect", {}))
        for key in ("rules", "html_dir", "hal_countries"):
            detect[key] = resolve(detect.get(key))
        detect["prefilter"] = [resolve(p) for p in detect.get("prefilter", [])]
        classify = dict(cfg.get("classify", {}))
        for key in ("model", "mapping"):
            classify[key] = resolve(classify.get(key))
        oa = dict(cfg.get("oa", {}))
        oa["hal_fulltext"] = resolve(oa.get("hal_fulltext"))
        return cls(
            root=root, out_dir=out, store=st,
            year_min=int(run.get("year_min", 2013)), year_max=int(run.get("year_max", 2017)),
            genre_map=resolve(run.get("genre_map")),
            ingest_inputs=ingest_inputs, detect=detect, classify=classify, oa=oa,
            report=dict(cfg.get("report", {})),
            overwrite=bool(run.get("overwrite", False)) if overwrite is None else overwrite,
        )


def _clear_owned_outputs(cfg: RunConfig) -> None:
    """Remove files a previous run of this pipeline wrote; refuse unless overwrite is set."""
    owned = []
    if cfg.store.exists():
        owned += partition_files(cfg.store)
        owned += [p for p in (cfg.store / INDEX_NAME, cfg.store / MANIFEST_NAME) if p.exists()]
    for name in ("detections.jsonl", "disciplines.jsonl", "run_manifest.json"):
        if (cfg.out_dir / name).exists():
            owned.append(cfg.out_dir / name)
    for sub in ("oa_history", "reports"):
        d = cfg.out_dir / sub
        if d.exists():
            owned += [p for p in d.iterdir() if p.is_file()]
    if owned and not cfg.overwrite:
        raise OamonError(f"{cfg.out_dir} already holds pipeline outputs; pass --overwrite to replace them")
    for p in owned:
        p.unlink()


def run_pipeline(config_path: Path, store: Path | None = None, out_dir: Path | None = None,
                 overwrite: bool | None = None) -> dict:
    """Run ingest, detect, classify-assign, oa-resolve and report in order.

    The manifest is written to ``<out_dir>/run_manifest.json`` whether the run
    succeeds or not. A failing step raises :class:`StepFailed` after its
    failure is recorded; outputs of earlier steps are left in place.
    """
    cfg = RunConfig.from_file(Path(config_path), store, out_dir, overwrite)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _clear_owned_outputs(cfg)

    config_digest = sha256_file(Path(config_path))
    started = datetime.now(timezone.utc)
    manifest: dict[str, Any] = {
        "run_id": f"run-{started.strftime('%Y%m%dT%H%M%S%fZ')}-{config_digest[7:15]}",
        "config": str(Path(config_path).resolve()),
        "config_digest": config_digest,
        "status": "running",
        "steps": [],
    }
    manifest_path = cfg.out_dir / "run_manifest.json"
    det_path = cfg.out_dir / "detections.jsonl"
    disc_path = cfg.out_dir / "disciplines.jsonl"
    hist_dir = cfg.out_dir / "oa_history"
    report_dir = cfg.out_dir / "reports"
    rep = cfg.report

    plan: list[tuple[str, dict, list, Callable[[], StepResult]]] = [
        ("ingest",
         {"inputs": [{**s, "path": str(s["path"])} for s in cfg.ingest_inputs],
          "year_min": cfg.year_min, "year_max": cfg.year_max},
         [s["path"] for s in cfg.ingest_inputs] + ([cfg.genre_map] if cfg.genre_map else []),
         lambda: step_ingest(cfg.ingest_inputs, cfg.store, cfg.year_min, cfg.year_max, cfg.genre_map)),
        ("detect",
         {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.detect.items() if k != "prefilter"},
         [p for p in (cfg.detect.get("rules"), cfg.detect.get("html_dir"), cfg.detect.get("hal_countries"))
          if p] + list(cfg.detect["prefilter"]),
         lambda: step_detect(cfg.store, det_path, cfg.detect.get("rules"), cfg.detect.get("html_dir"),
                             cfg.detect.get("hal_countries"), cfg.detect["prefilter"])),
        ("classify-assign",
         {"tau": cfg.classify.get("tau", 0.5)},
         [cfg.classify["model"], cfg.classify["mapping"]],
         lambda: step_classify_assign(cfg.store, cfg.classify["model"], cfg.classify["mapping"], disc_path,
                                      float(cfg.classify.get("tau", 0.5)))),
        ("oa-resolve",
         {"snapshot_date": str(cfg.oa.get("snapshot_date"))},
         [p for p in (cfg.oa.get("hal_fulltext"),) if p],
         lambda: step_oa_resolve(cfg.store, hist_dir, _as_date(cfg.oa["snapshot_date"]), cfg.oa.get("hal_fulltext"))),
        ("report",
         {"dimensions": rep.get("dimensions", ["year"]), "formats": rep.get("formats", ["csv"]),
          "year": rep.get("year"), "top": rep.get("top")},
         [det_path, disc_path, hist_dir],
         lambda: step_report(cfg.store, det_path, disc_path, hist_dir, report_dir,
                             rep.get("dimensions", ["year"]), rep.get("formats", ["csv"]),
                             rep.get("year"), rep.get("top"))),
    ]
    pipeline_inputs_before = {"detect", "classify-assign", "oa-resolve", "report"}

    for name, args, inputs, fn in plan:
        entry: dict[str, Any] = {
            "subcommand": name,
            "args_digest": "sha256:" + hashlib.sha256(json.dumps(args, sort_keys=True, default=str).encode()).hexdigest(),
            "started": _now(),
        }
        manifest["steps"].append(entry)
        try:
            step_inputs = list(inputs)
            if name in pipeline_inputs_before:
                step_inputs.append(cfg.store)
            entry["input_digests"] = {_rel(p, cfg.out_dir, cfg.root): digest_path(p) for p in step_inputs if Path(p).exists()}
            missing = [str(p) for p in step_inputs if not Path(p).exists()]
            if missing:
                raise FileNotFoundError(f"missing input(s): {', '.join(missing)}")
            result = fn()
        except Exception as exc:  # recorded, then re-raised with the step name
            entry.update(status="failed", error=f"{type(exc).__name__}: {exc}", finished=_now())
            manifest["status"] = "failed"
            manifest["failed_step"] = name
            _write_manifest(manifest_path, manifest)
            raise StepFailed(name, exc) from exc
        entry.update(
            status="completed",
            finished=_now(),
            record_counts=result.counts,
            output_digests={_rel(p, cfg.out_dir): digest_path(p) for p in result.outputs},
        )
        logger.info("step %s done: %s", name, result.counts)
    manifest["status"] = "completed"
    _write_manifest(manifest_path, manifest)
    return manifest


def _write_manifest(path: Path, manifest: dict) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
