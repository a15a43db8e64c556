"""OA status per snapshot, per-DOI status histories and first-observed-OA memory.

Host categories collapse the gold/green/hybrid/bronze taxonomy into two:
anything free on the publisher site is publisher-hosted, and only
publications with no publisher copy count as repository-hosted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DuplicateOrStale
from .ingest import PublicationRecord, normalize_doi


class HostCategory(str, Enum):
    PUBLISHER = "publisher-hosted"
    REPOSITORY = "repository-hosted"
    CLOSED = "closed"


@dataclass(frozen=True)
class OAStatus:
    doi: str
    is_oa: bool
    host_category: HostCategory
    observed_at: date
    license: str | None = None

    def __post_init__(self):
        if self.is_oa == (self.host_category is HostCategory.CLOSED):
            raise ValueError("is_oa must be false exactly when host_category is closed")

    def to_dict(self) -> dict:
        return {"doi": self.doi, "is_oa": self.is_oa, "host_category": self.host_category.value,
                "license": self.license, "observed_at": self.observed_at.isoformat()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "OAStatus":
        return cls(doi=d["doi"], is_oa=bool(d["is_oa"]), host_category=HostCategory(d["host_category"]),
                   observed_at=date.fromisoformat(d["observed_at"]), license=d.get("license"))


@dataclass(frozen=True)
class OATransition:
    doi: str
    from_category: HostCategory
    to_category: HostCategory
    from_date: date
    to_date: date

    def to_dict(self) -> dict:
        return {"doi": self.doi, "from": self.from_category.value, "to": self.to_category.value,
                "from_date": self.from_date.isoformat(), "to_date": self.to_date.isoformat()}


@dataclass
class OAHistory:
    doi: str
    statuses: list = field(default_factory=list)
    first_observed_oa: date | None = None
    publication_year: int | None = None

    @property
    def latest(self) -> OAStatus | None:
        return self.statuses[-1] if self.statuses else None

    def to_dict(self) -> dict:
        return {
            "doi": self.doi,
            "publication_year": self.publication_year,
            "first_observed_oa": self.first_observed_oa.isoformat() if self.first_observed_oa else None,
            "statuses": [
                {k: v for k, v in s.to_dict().items() if k != "doi"} for s in self.statuses
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OAHistory":
        first = d.get("first_observed_oa")
        return cls(
            doi=d["doi"],
            statuses=[OAStatus.from_dict({**s, "doi": d["doi"]}) for s in d.get("statuses") or ()],
            first_observed_oa=date.fromisoformat(first) if first else None,
            publication_year=d.get("publication_year"),
        )


def resolve_status(record: PublicationRecord, hal_fulltext: bool, observed_at: date) -> OAStatus:
    publisher = [loc for loc in record.oa_locations if loc.host_type == "publisher"]
    repository = [loc for loc in record.oa_locations if loc.host_type == "repository"]
    if publisher:
        category = HostCategory.PUBLISHER
    elif repository or hal_fulltext:
        category = HostCategory.REPOSITORY
    else:
        category = HostCategory.CLOSED
    license = None
    if publisher:
        license = publisher[0].license
    elif repository:
        license = repository[0].license
    return OAStatus(record.doi, category is not HostCategory.CLOSED, category, observed_at, license)


def apply_update(history: OAHistory, new: OAStatus) -> tuple[OAHistory, OATransition | None]:
    """Append ``new`` to a copy of ``history``.

    Emits a transition when the host category changes, and records
    ``first_observed_oa`` the first time an OA status is seen. Updates
    must be strictly later than the last recorded one.
    """
    if new.doi != history.doi:
        raise ValueError(f"status for {new.doi} applied to history of {history.doi}")
    last = history.latest
    if last is not None and new.observed_at <= last.observed_at:
        raise DuplicateOrStale(f"{new.doi}: update at {new.observed_at} not after {last.observed_at}")
    transition = None
    if last is not None and last.host_category is not new.host_category:
        transition = OATransition(new.doi, last.host_category, new.host_category, last.observed_at, new.observed_at)
    first = history.first_observed_oa
    if first is None and new.is_oa:
        first = new.observed_at
    updated = replace(history, statuses=history.statuses + [new], first_observed_oa=first)
    return updated, transition


def time_to_oa(history: OAHistory, publication_year: int) -> int | None:
    """Days from January 1 of the publication year to the first OA observation.

    Publication dates are year-only, so the anchor is January 1. The result
    also includes however long it took for the open copy to be noticed.
    """
    if history.first_observed_oa is None:
        return None
    return (history.first_observed_oa - date(publication_year, 1, 1)).days


def read_histories(directory: str | Path) -> dict[str, OAHistory]:
    out = {}
    for part in sorted(Path(directory).glob("*.jsonl")):
        if part.name == "transitions.jsonl":
            continue
        with open(part, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    h = OAHistory.from_dict(json.loads(line))
                    out[h.doi] = h
    return out


def history_partition(h: OAHistory) -> str:
    return f"{h.publication_year}.jsonl" if h.publication_year is not None else "unknown.jsonl"


def read_doi_list(path: str | Path) -> set[str]:
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.add(normalize_doi(line.split("\t")[0]))
    return out


def resolve_records(records: Iterable[PublicationRecord], observed_at: date,
                    hal_fulltext: set[str] | None = None,
                    existing: Mapping[str, OAHistory] | None = None) -> Iterator[tuple[OAHistory, OATransition | None]]:
    hal_fulltext = hal_fulltext or set()
    existing = existing or {}
    for rec in records:
        status = resolve_status(rec, rec.hal_fulltext or rec.doi in hal_fulltext, observed_at)
        history = existing.get(rec.doi) or OAHistory(rec.doi, publication_year=rec.publication_year)
        yield apply_update(history, status)


def write_histories(directory: str | Path, histories: Iterable[OAHistory]) -> list[Path]:
    from .store import atomic_write_text, dumps_line

    directory = Path(directory)
    parts: dict[str, list[OAHistory]] = {}
    for h in histories:
        parts.setdefault(history_partition(h), []).append(h)
    written = []
    for name in sorted(parts):
        rows = sorted(parts[name], key=lambda h: h.doi)
        path = directory / name
        atomic_write_text(path, "".join(dumps_line(h.to_dict()) + "\n" for h in rows))
        written.append(path)
    return written
