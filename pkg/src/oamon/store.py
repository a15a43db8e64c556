"""On-disk record store: ``<year>.jsonl`` partitions, a DOI index and an ingest manifest."""
from __future__ import annotations

import gc
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import asdict
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator

import orjson

from .ingest import (
    Author,
    IngestStats,
    PublicationRecord,
    SourceTag,
    filter_window,
    load_genre_map,
    merge_by_doi,
    read_snapshot,
    record_from_dict,
    record_to_dict,
)

logger = logging.getLogger(__name__)

INDEX_NAME = "index.tsv"
MANIFEST_NAME = "manifest.json"


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def dumps_line(obj) -> str:
    """Compact, key-sorted, UTF-8 JSON: the canonical line format of every JSONL output."""
    return orjson.dumps(obj, option=orjson.OPT_SORT_KEYS).decode("utf-8")


@contextmanager
def paused_gc():
    """Suspend the cyclic collector during bulk loads.

    Records are acyclic and freed by refcounting, but building 1e5 of them
    triggers repeated full collections that dominate the runtime.
    """
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def partition_files(store: Path) -> list[Path]:
    return sorted(p for p in Path(store).glob("*.jsonl") if p.stem.isdigit())


def iter_store(store: str | Path) -> Iterator[PublicationRecord]:
    for part in partition_files(Path(store)):
        with open(part, "rb") as fh:
            for line in fh:
                if line.strip():
                    yield record_from_dict(orjson.loads(line))


class StoredRecordView:
    """Read-only view of one store line, decoding fields only when asked.

    Offers the attributes detection needs (``doi``, ``hal_countries``,
    ``authors``) without building a full :class:`PublicationRecord`.
    """

    __slots__ = ("doi", "_row")

    def __init__(self, row: dict):
        self._row = row
        self.doi = row["doi"]

    @property
    def hal_countries(self) -> tuple:
        return tuple(self._row.get("structures_countries") or ())

    @property
    def authors(self) -> tuple:
        return tuple(Author(a["family"], a.get("given")) for a in self._row.get("z_authors") or ())

    def record(self) -> PublicationRecord:
        return record_from_dict(self._row)


def iter_store_views(store: str | Path) -> Iterator[StoredRecordView]:
    for part in partition_files(Path(store)):
        with open(part, "rb") as fh:
            for line in fh:
                if line.strip():
                    yield StoredRecordView(orjson.loads(line))


def read_store(store: str | Path) -> list[PublicationRecord]:
    return list(iter_store(store))


def read_manifest(store: str | Path) -> dict:
    path = Path(store) / MANIFEST_NAME
    if path.exists():
        return json.loads(path.read_text("utf-8"))
    return {"ingests": []}


def write_store(store: str | Path, records: Iterable[PublicationRecord], manifest: dict) -> list[Path]:
    """Rewrite every partition from ``records`` (assumed merged) and return the files written."""
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    by_year: dict[int, list[PublicationRecord]] = {}
    for rec in records:
        by_year.setdefault(rec.publication_year, []).append(rec)

    written = []
    for stale in partition_files(store):
        if int(stale.stem) not in by_year:
            stale.unlink()
    index_lines = []
    for year in sorted(by_year):
        recs = sorted(by_year[year], key=lambda r: r.doi)
        path = store / f"{year}.jsonl"
        atomic_write_text(path, "".join(dumps_line(record_to_dict(r)) + "\n" for r in recs))
        written.append(path)
        index_lines.extend(f"{r.doi}\t{year}\n" for r in recs)
    index_lines.sort()
    atomic_write_text(store / INDEX_NAME, "".join(index_lines))
    atomic_write_text(store / MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written + [store / INDEX_NAME, store / MANIFEST_NAME]


def ingest(
    input_path: str | Path,
    source: SourceTag | str,
    snapshot_date: date,
    store: str | Path,
    year_min: int = 2013,
    year_max: int = 2017,
    genre_map_path: str | Path | None = None,
) -> tuple[IngestStats, list[Path]]:
    """Parse one snapshot file, merge it into the store and rewrite the store."""
    source = SourceTag(source)
    stats = IngestStats()
    genre_map = load_genre_map(genre_map_path)
    with paused_gc():
        parsed = read_snapshot(input_path, source, snapshot_date, stats, genre_map)
        kept = []
        for rec in parsed:
            if year_min <= rec.publication_year <= year_max:
                kept.append(rec)
            else:
                stats.out_of_window += 1
        existing = read_store(store) if Path(store).exists() else []
        merged = list(filter_window(merge_by_doi(existing + kept), year_min, year_max))

        manifest = read_manifest(store)
        entry = asdict(stats)
        entry.update({
            "source": source.value,
            "snapshot_date": snapshot_date.isoformat(),
            "input": Path(input_path).name,
            "year_min": year_min,
            "year_max": year_max,
        })
        manifest["ingests"].append(entry)
        manifest["merged"] = len(merged)
        files = write_store(store, merged, manifest)
    logger.info("ingested %s: read=%d parsed=%d rejected=%d merged=%d",
                input_path, stats.read, stats.parsed, stats.rejected, len(merged))
    return stats, files
