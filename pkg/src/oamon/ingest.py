"""Publication records: parsing snapshot lines, DOI normalization, merging and window filtering.

Two snapshot flavours are understood. Unpaywall-style lines carry the
bibliographic metadata and OA locations; HAL-style lines carry structure
countries and fulltext availability. Both are keyed by DOI and merged with
Unpaywall taking precedence for scalar fields.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, NamedTuple

import orjson

from .errors import MalformedDoi, ParseError

logger = logging.getLogger(__name__)

_DOI_PREFIXES = ("https://doi.org/", "http://doi.org/", "doi:")


class Genre(str, Enum):
    JOURNAL_ARTICLE = "journal-article"
    BOOK_CHAPTER = "book-chapter"
    PROCEEDINGS_ARTICLE = "proceedings-article"
    BOOK_MONOGRAPH = "book-monograph"
    OTHER = "other"


class SourceTag(str, Enum):
    UNPAYWALL = "unpaywall"
    HAL = "hal"


# lower rank wins when merging scalar fields
SOURCE_RANK = {SourceTag.UNPAYWALL: 0, SourceTag.HAL: 1}

HOST_TYPES = ("publisher", "repository")


class Author(NamedTuple):
    # a NamedTuple rather than a dataclass: millions get built during ingest
    family: str
    given: str | None = None


@dataclass(frozen=True, slots=True)
class OALocation:
    url: str
    host_type: str
    license: str | None = None
    version: str | None = None

    def __post_init__(self):
        if not self.url:
            raise ValueError("OA location without url")
        if self.host_type not in HOST_TYPES:
            raise ValueError(f"unknown host_type {self.host_type!r}")


@dataclass(frozen=True, slots=True)
class PublicationRecord:
    doi: str
    sources: frozenset
    title: str = ""
    publication_year: int | None = None
    genre: Genre | None = None
    journal_name: str | None = None
    issns: tuple = ()
    publisher: str | None = None
    authors: tuple = ()
    oa_locations: tuple = ()
    snapshot_date: date | None = None
    # HAL evidence, kept on the record so later steps need no side files
    hal_countries: tuple = ()
    hal_fulltext: bool = False

    @property
    def genre_or_other(self) -> Genre:
        return self.genre or Genre.OTHER


def normalize_doi(raw: str) -> str:
    """Canonical DOI form: trimmed, lowercase, resolver prefix removed.

    Raises MalformedDoi when the result is not a ``10.xxx/yyy`` string.
    """
    if raw is None:
        raise MalformedDoi("empty DOI")
    doi = str(raw).strip().lower()
    if doi.startswith("10.") and "/" in doi:
        return doi
    changed = True
    while changed:
        changed = False
        for prefix in _DOI_PREFIXES:
            if doi.startswith(prefix):
                doi = doi[len(prefix):].strip()
                changed = True
    if not doi.startswith("10.") or "/" not in doi:
        raise MalformedDoi(f"not a DOI: {raw!r}")
    return doi


_default_genre_map: dict[str, Genre] | None = None


def load_genre_map(path: str | Path | None = None) -> dict[str, Genre]:
    """Read a ``{source genre: Genre}`` JSON table. ``None`` loads the bundled default."""
    global _default_genre_map
    if path is None:
        if _default_genre_map is None:
            raw = json.loads(resources.files("oamon.data").joinpath("genres.json").read_text("utf-8"))
            _default_genre_map = {k.lower(): Genre(v) for k, v in raw.items()}
        return _default_genre_map
    raw = json.loads(Path(path).read_text("utf-8"))
    return {k.lower(): Genre(v) for k, v in raw.items()}


def map_genre(value: str | None, genre_map: Mapping[str, Genre] | None = None) -> Genre | None:
    if value is None or value == "":
        return None
    table = genre_map if genre_map is not None else load_genre_map()
    return table.get(str(value).strip().lower(), Genre.OTHER)


def _opt_str(value: Any) -> str | None:
    if type(value) is str:
        value = value.strip()
        return value or None
    if isinstance(value, list):
        value = value[0] if value else None
    if value is None:
        return None
    value = str(value).strip()
    return value or None


def _parse_year(value: Any) -> int | None:
    if type(value) is int:
        return value if 1000 <= value <= 9999 else None
    if value is None or isinstance(value, bool):
        return None
    try:
        year = int(str(value).strip()[:4])
    except ValueError:
        return None
    return year if 1000 <= year <= 9999 else None


def _parse_authors(raw: Any) -> tuple:
    if not raw:
        return ()
    authors = []
    for a in raw:
        if not isinstance(a, dict):
            continue
        family = a.get("family")
        family = family.strip() if type(family) is str else _opt_str(family)
        if not family:
            continue
        given = a.get("given")
        given = (given.strip() or None) if type(given) is str else _opt_str(given)
        authors.append(Author(family, given))
    return tuple(authors)


def _parse_locations(raw: Any) -> tuple:
    if not raw:
        return ()
    locations = []
    for loc in raw:
        if not isinstance(loc, dict):
            continue
        try:
            locations.append(OALocation(
                _opt_str(loc.get("url")) or "",
                str(loc.get("host_type") or ""),
                _opt_str(loc.get("license")),
                _opt_str(loc.get("version")),
            ))
        except ValueError as exc:
            logger.debug("dropping OA location: %s", exc)
    return tuple(locations)


def _parse_issns(raw: Any) -> tuple:
    if not raw:
        return ()
    if type(raw) is str and "," not in raw:
        raw = raw.strip().upper()
        return (raw,) if raw else ()
    parts = raw if isinstance(raw, list) else str(raw).split(",")
    return tuple(p.strip().upper() for p in parts if p and p.strip())


def parse_publication_record(
    line: str | Mapping[str, Any],
    source: SourceTag | str,
    snapshot_date: date | None,
    genre_map: Mapping[str, Genre] | None = None,
) -> PublicationRecord:
    """Build a record from one snapshot line (JSON text or an already decoded dict)."""
    source = source if isinstance(source, SourceTag) else SourceTag(source)
    if isinstance(line, dict):
        obj = line
    else:
        try:
            obj = orjson.loads(line)
        except (orjson.JSONDecodeError, TypeError) as exc:
            raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object")
    get = obj.get
    raw_doi = get("doi")
    if raw_doi is None:
        raise ParseError("record has no doi")
    doi = normalize_doi(raw_doi)

    title = _opt_str(get("title")) or ""
    year = _parse_year(get("year"))
    genre = map_genre(_opt_str(get("genre")), genre_map)
    sources = _sources((source._value_,))
    if source is SourceTag.HAL:
        countries = tuple(sorted({str(c).strip().lower() for c in get("structures_countries") or () if c}))
        return PublicationRecord(doi, sources, title, year, genre, None, (), None, (), (), snapshot_date,
                                 countries, bool(get("fulltext_available")))
    return PublicationRecord(
        doi, sources, title, year, genre,
        _opt_str(get("journal_name")),
        _parse_issns(get("journal_issns")),
        _opt_str(get("publisher")),
        _parse_authors(get("z_authors")),
        _parse_locations(get("oa_locations")),
        snapshot_date,
    )


@lru_cache(maxsize=64)
def _isodate(d: date | None) -> str | None:
    return d.isoformat() if d else None


def record_to_dict(rec: PublicationRecord) -> dict[str, Any]:
    """Serialize with the Unpaywall-style input field names plus provenance fields."""
    d: dict[str, Any] = {
        "doi": rec.doi,
        "title": rec.title,
        "year": rec.publication_year,
        "genre": rec.genre._value_ if rec.genre else None,
        "journal_name": rec.journal_name,
        "journal_issns": ",".join(rec.issns) if rec.issns else None,
        "publisher": rec.publisher,
        "z_authors": [{"given": a.given, "family": a.family} for a in rec.authors],
        "oa_locations": [
            {"url": loc.url, "host_type": loc.host_type, "license": loc.license, "version": loc.version}
            for loc in rec.oa_locations
        ],
        "sources": sorted(s._value_ for s in rec.sources),
        "snapshot_date": _isodate(rec.snapshot_date),
    }
    if rec.hal_countries:
        d["structures_countries"] = list(rec.hal_countries)
    if rec.hal_fulltext:
        d["fulltext_available"] = True
    return d


_GENRE_BY_VALUE = {g.value: g for g in Genre}
_source_sets: dict[tuple, frozenset] = {}


def _sources(values) -> frozenset:
    key = tuple(values or ("unpaywall",))
    found = _source_sets.get(key)
    if found is None:
        found = _source_sets[key] = frozenset(SourceTag(s) for s in key)
    return found


def record_from_dict(d: Mapping[str, Any]) -> PublicationRecord:
    """Inverse of :func:`record_to_dict`.

    Meant for store lines, which are already normalized, so the DOI is only
    lowercased rather than fully re-validated.
    """
    snap = d.get("snapshot_date")
    genre = d.get("genre")
    issns = d.get("journal_issns")
    return PublicationRecord(
        d["doi"].lower(),
        _sources(d.get("sources")),
        d.get("title") or "",
        _parse_year(d.get("year")),
        _GENRE_BY_VALUE[genre] if genre else None,
        d.get("journal_name"),
        tuple(issns.split(",")) if issns else (),
        d.get("publisher"),
        tuple([Author(a["family"], a.get("given")) for a in d.get("z_authors") or ()]),
        tuple([OALocation(loc["url"], loc["host_type"], loc.get("license"), loc.get("version"))
               for loc in d.get("oa_locations") or ()]),
        date.fromisoformat(snap) if snap else None,
        tuple(d.get("structures_countries") or ()),
        bool(d.get("fulltext_available")),
    )


_SCALARS = ("title", "publication_year", "genre", "journal_name", "publisher", "snapshot_date")
_SEQUENCES = ("issns", "authors")


def _precedence_key(rec: PublicationRecord):
    rank = min(SOURCE_RANK[s] for s in rec.sources)
    # newer snapshots first, then a canonical dump so equal-rank duplicates still order deterministically
    ordinal = rec.snapshot_date.toordinal() if rec.snapshot_date else 0
    return (rank, -ordinal, orjson.dumps(record_to_dict(rec), option=orjson.OPT_SORT_KEYS))


def _merge_group(group: list[PublicationRecord]) -> PublicationRecord:
    if len(group) == 1:
        rec = group[0]
        return rec if rec.genre is not None else replace(rec, genre=Genre.OTHER)
    group = sorted(group, key=_precedence_key)
    values: dict[str, Any] = {}
    for name in _SCALARS:
        values[name] = next((getattr(r, name) for r in group if getattr(r, name) not in (None, "")), None)
    for name in _SEQUENCES:
        values[name] = next((getattr(r, name) for r in group if getattr(r, name)), ())
    seen_urls: set[str] = set()
    locations = []
    for r in group:
        for loc in r.oa_locations:
            if loc.url not in seen_urls:
                seen_urls.add(loc.url)
                locations.append(loc)
    return PublicationRecord(
        doi=group[0].doi,
        sources=frozenset().union(*(r.sources for r in group)),
        title=values["title"] or "",
        publication_year=values["publication_year"],
        genre=values["genre"] or Genre.OTHER,
        journal_name=values["journal_name"],
        issns=values["issns"],
        publisher=values["publisher"],
        authors=values["authors"],
        oa_locations=tuple(locations),
        snapshot_date=values["snapshot_date"],
        hal_countries=tuple(sorted(set().union(*(r.hal_countries for r in group)))),
        hal_fulltext=any(r.hal_fulltext for r in group),
    )


def merge_by_doi(records: Iterable[PublicationRecord]) -> list[PublicationRecord]:
    """One record per DOI, sorted by DOI.

    Sources and OA locations are unioned (locations deduplicated on url).
    Scalars take the first present value in precedence order: unpaywall
    before hal, then newest snapshot first. The result does not depend on
    input order, and merging an already merged collection is a no-op.
    """
    groups: dict[str, list[PublicationRecord]] = {}
    for rec in records:
        groups.setdefault(rec.doi, []).append(rec)
    return [_merge_group(groups[doi]) for doi in sorted(groups)]


def filter_window(records: Iterable[PublicationRecord], year_min: int, year_max: int) -> Iterator[PublicationRecord]:
    if year_min > year_max:
        raise ValueError(f"empty window [{year_min}, {year_max}]")
    for rec in records:
        if rec.publication_year is not None and year_min <= rec.publication_year <= year_max:
            yield rec


@dataclass
class IngestStats:
    read: int = 0
    parsed: int = 0
    rejected: int = 0
    out_of_window: int = 0
    errors: dict = field(default_factory=dict)


def read_snapshot(
    path: str | Path,
    source: SourceTag | str,
    snapshot_date: date | None,
    stats: IngestStats | None = None,
    genre_map: Mapping[str, Genre] | None = None,
) -> Iterator[PublicationRecord]:
    """Stream records out of a JSONL snapshot, counting bad lines instead of aborting."""
    stats = stats if stats is not None else IngestStats()
    source = SourceTag(source)
    with open(path, "rb") as fh:
        for line in fh:
            if not line.strip():
                continue
            stats.read += 1
            try:
                rec = parse_publication_record(line, source, snapshot_date, genre_map)
            except (ParseError, MalformedDoi) as exc:
                stats.rejected += 1
                kind = type(exc).__name__
                stats.errors[kind] = stats.errors.get(kind, 0) + 1
                continue
            if rec.publication_year is None:
                stats.rejected += 1
                stats.errors["MissingYear"] = stats.errors.get("MissingYear", 0) + 1
                continue
            stats.parsed += 1
            yield rec
