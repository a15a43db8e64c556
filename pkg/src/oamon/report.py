"""Grouped counts and OA rates (publisher-/repository-hosted split), rendered as CSV, JSON or SVG."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from html import escape
from typing import Iterable, Mapping, Sequence

from .errors import UnsupportedFormat
from .ingest import Genre, PublicationRecord
from .oa import HostCategory, OAHistory

UNKNOWN = "unknown"
CSV_HEADER = ("dimension", "group", "n_total", "n_publisher_hosted", "n_repository_hosted", "oa_rate")


class Dimension(str, Enum):
    YEAR = "year"
    GENRE = "genre"
    DISCIPLINE = "discipline"
    PUBLISHER = "publisher"


@dataclass(frozen=True)
class JoinedRecord:
    """One publication with everything the report needs, after joining the step outputs on DOI."""

    doi: str
    year: int | None
    genre: str
    discipline: str
    publisher: str
    host_category: HostCategory
    detected: bool

    def group(self, dimension: Dimension) -> str:
        if dimension is Dimension.YEAR:
            return str(self.year) if self.year is not None else UNKNOWN
        return getattr(self, dimension.value)


@dataclass(frozen=True)
class ReportRow:
    dimension: str
    group: str
    n_total: int
    n_publisher_hosted: int
    n_repository_hosted: int

    def __post_init__(self):
        if min(self.n_total, self.n_publisher_hosted, self.n_repository_hosted) < 0:
            raise ValueError("negative count")
        if self.n_publisher_hosted + self.n_repository_hosted > self.n_total:
            raise ValueError("more OA publications than publications")

    @property
    def zero_population(self) -> bool:
        return self.n_total == 0

    @property
    def oa_rate(self) -> float:
        if self.n_total == 0:
            return 0.0
        return (self.n_publisher_hosted + self.n_repository_hosted) / self.n_total

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "group": self.group,
            "n_total": self.n_total,
            "n_publisher_hosted": self.n_publisher_hosted,
            "n_repository_hosted": self.n_repository_hosted,
            "oa_rate": self.oa_rate,
        }


def join_inputs(
    records: Iterable[PublicationRecord],
    detections: Mapping[str, bool],
    disciplines: Mapping[str, str],
    histories: Mapping[str, OAHistory],
) -> list[JoinedRecord]:
    """Join on DOI. Missing discipline/publisher become ``unknown``; no OA history counts as closed."""
    out = []
    for rec in records:
        history = histories.get(rec.doi)
        latest = history.latest if history is not None else None
        out.append(JoinedRecord(
            doi=rec.doi,
            year=rec.publication_year,
            genre=(rec.genre or Genre.OTHER).value,
            discipline=disciplines.get(rec.doi) or UNKNOWN,
            publisher=rec.publisher or UNKNOWN,
            host_category=latest.host_category if latest is not None else HostCategory.CLOSED,
            detected=bool(detections.get(rec.doi, False)),
        ))
    return out


def aggregate(joined: Iterable[JoinedRecord], dimension: Dimension | str, year: int | None = None,
              genre: str | None = None) -> list[ReportRow]:
    """Rows for every observed group among detected publications, largest first (ties by name)."""
    dimension = Dimension(dimension)
    totals: Counter = Counter()
    publisher: Counter = Counter()
    repository: Counter = Counter()
    for jr in joined:
        if not jr.detected:
            continue
        if year is not None and jr.year != year:
            continue
        if genre is not None and jr.genre != genre:
            continue
        g = jr.group(dimension)
        totals[g] += 1
        if jr.host_category is HostCategory.PUBLISHER:
            publisher[g] += 1
        elif jr.host_category is HostCategory.REPOSITORY:
            repository[g] += 1
    rows = [ReportRow(dimension.value, g, totals[g], publisher[g], repository[g]) for g in totals]
    rows.sort(key=lambda r: (-r.n_total, r.group))
    return rows


def top_groups(rows: Sequence[ReportRow], n: int = 10) -> list[ReportRow]:
    if n <= 0:
        return []
    return sorted(rows, key=lambda r: (-r.n_total, r.group))[:n]


def render(rows: Sequence[ReportRow], fmt: str) -> str:
    if fmt == "csv":
        return _render_csv(rows)
    if fmt == "json":
        return json.dumps([r.to_dict() for r in rows], indent=2, ensure_ascii=False) + "\n"
    if fmt == "svg":
        return _render_svg(rows)
    raise UnsupportedFormat(f"unsupported report format {fmt!r}")


def _render_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.dimension, r.group, r.n_total, r.n_publisher_hosted, r.n_repository_hosted,
                         f"{r.oa_rate:.4f}"])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ReportRow]:
    return [
        ReportRow(d["dimension"], d["group"], int(d["n_total"]), int(d["n_publisher_hosted"]),
                  int(d["n_repository_hosted"]))
        for d in csv.DictReader(io.StringIO(text))
    ]


def rows_from_json(text: str) -> list[ReportRow]:
    return [
        ReportRow(d["dimension"], d["group"], d["n_total"], d["n_publisher_hosted"], d["n_repository_hosted"])
        for d in json.loads(text)
    ]


_BAR_W = 400
_ROW_H = 24
_LABEL_W = 260
_PUBLISHER_FILL = "#f2a900"
_REPOSITORY_FILL = "#2c7fb8"


def _render_svg(rows: Sequence[ReportRow]) -> str:
    width = _LABEL_W + _BAR_W + 160
    if not rows:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="40">'
                f'<text x="10" y="25" class="empty">empty: no publications in this selection</text></svg>\n')
    height = 40 + _ROW_H * len(rows)
    title = escape(f"OA rate by {rows[0].dimension}")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="10" y="18" font-weight="bold">{title}</text>',
        f'<text x="{_LABEL_W}" y="18" fill="{_PUBLISHER_FILL}">publisher-hosted</text>',
        f'<text x="{_LABEL_W + 120}" y="18" fill="{_REPOSITORY_FILL}">repository-hosted</text>',
    ]
    for i, r in enumerate(rows):
        y = 30 + i * _ROW_H
        pub_w = _BAR_W * r.n_publisher_hosted / r.n_total if r.n_total else 0.0
        rep_w = _BAR_W * r.n_repository_hosted / r.n_total if r.n_total else 0.0
        parts.append(f'<text x="10" y="{y + 14}">{escape(r.group)}</text>')
        parts.append(f'<rect x="{_LABEL_W}" y="{y}" width="{_BAR_W}" height="{_ROW_H - 6}" fill="#eeeeee"/>')
        parts.append(f'<rect x="{_LABEL_W}" y="{y}" width="{pub_w:.2f}" height="{_ROW_H - 6}" '
                     f'fill="{_PUBLISHER_FILL}"><title>{r.n_publisher_hosted}</title></rect>')
        parts.append(f'<rect x="{_LABEL_W + pub_w:.2f}" y="{y}" width="{rep_w:.2f}" height="{_ROW_H - 6}" '
                     f'fill="{_REPOSITORY_FILL}"><title>{r.n_repository_hosted}</title></rect>')
        parts.append(f'<text x="{_LABEL_W + _BAR_W + 8}" y="{y + 14}">'
                     f'{100 * r.oa_rate:.1f}% ({r.n_publisher_hosted}+{r.n_repository_hosted}/{r.n_total})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
