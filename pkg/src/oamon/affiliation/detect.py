"""Country verdicts: HAL structure countries first, then scraped landing-page affiliations."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from ..ingest import PublicationRecord, normalize_doi
from .names import AuthorNameIndex, prefilter_author_match
from .parsers import AffiliationParser, default_parsers, extract_affiliations
from .rules import AffiliationString, CountryRuleset, Origin, match_country
from .sources import DocumentSource


class DetectionSource(str, Enum):
    HAL = "hal"
    SCRAPED_HTML = "scraped-html"
    NONE = "none"


@dataclass(frozen=True)
class DetectionResult:
    doi: str
    is_target_country: bool
    source: DetectionSource
    matched_token: str | None = None
    affiliation: AffiliationString | None = None
    prefilter_passed: bool | None = None

    def __post_init__(self):
        if self.is_target_country and (self.matched_token is None or self.affiliation is None):
            raise ValueError("positive verdict without evidence")
        if self.source is DetectionSource.NONE and self.is_target_country:
            raise ValueError("positive verdict without a source")

    def to_dict(self) -> dict:
        # _value_ skips the Enum.value descriptor, which shows up when writing 1e5 verdicts
        d = {"doi": self.doi, "is_target_country": self.is_target_country, "source": self.source._value_}
        if self.matched_token is not None:
            d["matched_token"] = self.matched_token
        if self.affiliation is not None:
            d["affiliation_text"] = self.affiliation.text
            d["affiliation_origin"] = self.affiliation.origin._value_
        if self.prefilter_passed is not None:
            d["prefilter_passed"] = self.prefilter_passed
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DetectionResult":
        aff = None
        if d.get("affiliation_text"):
            aff = AffiliationString(d["affiliation_text"], d.get("affiliation_origin") or Origin.HTML_ELEMENT)
        return cls(
            doi=d["doi"],
            is_target_country=bool(d["is_target_country"]),
            source=DetectionSource(d["source"]),
            matched_token=d.get("matched_token"),
            affiliation=aff,
            prefilter_passed=d.get("prefilter_passed"),
        )


def detect_country(
    record: PublicationRecord,
    hal_countries: Sequence[str] | None,
    html: str | None,
    rules: CountryRuleset,
    parsers: Iterable[AffiliationParser] | None = None,
) -> DetectionResult:
    code = rules.country_code
    if hal_countries and code in {c.lower() for c in hal_countries}:
        return DetectionResult(
            doi=record.doi,
            is_target_country=True,
            source=DetectionSource.HAL,
            matched_token=code,
            affiliation=AffiliationString(",".join(sorted(c.lower() for c in hal_countries)), Origin.HAL),
        )
    if html:
        for aff in extract_affiliations(html, parsers):
            token = match_country(aff, rules)
            if token is not None:
                return DetectionResult(record.doi, True, DetectionSource.SCRAPED_HTML, token, aff)
    # source names the evidence behind a positive; negatives have none
    return DetectionResult(record.doi, False, DetectionSource.NONE)


def read_hal_countries(path: str | Path) -> dict[str, tuple]:
    """TSV ``doi TAB code[,code...]``."""
    out: dict[str, tuple] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            doi, _, codes = line.rstrip("\n").partition("\t")
            key = normalize_doi(doi)
            out[key] = tuple(sorted(set(out.get(key, ())) | {c.strip().lower() for c in codes.split(",") if c.strip()}))
    return out


def detect_records(
    records: Iterable[PublicationRecord],
    rules: CountryRuleset,
    documents: DocumentSource | None = None,
    hal_countries: Mapping[str, Sequence[str]] | None = None,
    name_index: AuthorNameIndex | None = None,
    parsers: Iterable[AffiliationParser] | None = None,
) -> Iterator[DetectionResult]:
    """Verdict per record.

    HAL evidence is checked first. Records failing the optional author
    prefilter are not scraped (a negative with source ``none``).
    """
    parsers = default_parsers() if parsers is None else tuple(parsers)
    code = rules.country_code
    for rec in records:
        countries = rec.hal_countries
        if hal_countries:
            extra = hal_countries.get(rec.doi)
            if extra:
                countries = tuple(sorted(set(countries).union(extra)))
        passed = None
        if code not in countries and name_index is not None:
            passed = prefilter_author_match(rec, name_index)
            if not passed:
                yield DetectionResult(rec.doi, False, DetectionSource.NONE, prefilter_passed=False)
                continue
        html = None
        if code not in countries and documents is not None:
            html = documents.get(rec.doi)
        result = detect_country(rec, countries, html, rules, parsers)
        if passed is not None:
            result = DetectionResult(result.doi, result.is_target_country, result.source,
                                     result.matched_token, result.affiliation, passed)
        yield result
