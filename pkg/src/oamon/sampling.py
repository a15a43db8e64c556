"""Reproducible manual-check samples and the error estimates computed from their annotations."""
from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MissingVerdicts, PopulationTooSmall
from .ingest import normalize_doi
from .oa import HostCategory, OAHistory, OAStatus
from .report import JoinedRecord

Z_95 = 1.96
SAMPLE_COLUMNS = ("doi", "title", "url")
ANNOTATION_COLUMNS = SAMPLE_COLUMNS + ("verdict", "note")


class Verdict(str, Enum):
    CONFIRMED = "confirmed"
    REFUTED = "refuted"


@dataclass(frozen=True)
class Annotation:
    """Human verdict on one sampled DOI.

    For a detected-positive sample, ``confirmed`` means the affiliation is
    really in the target country. For a closed-status sample, ``confirmed``
    means the publication really is closed and ``refuted`` that it is open.
    """

    doi: str
    verdict: Verdict | None
    note: str | None = None


@dataclass(frozen=True)
class SampleSpec:
    filter: tuple
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample size must be at least 1")


@dataclass(frozen=True)
class PrecisionEstimate:
    correct: int
    total: int
    point: float
    wilson_low: float
    wilson_high: float


@dataclass(frozen=True)
class FalseNegativeBreakdown:
    n: int
    pct_now_oa_in_feed: float
    pct_still_closed_but_oa: float
    pct_total_false_negative: float


def draw_sample(population: Iterable[str], n: int, seed: int) -> list[str]:
    """Uniform draw without replacement.

    The population is deduplicated and sorted first, then a seeded partial
    Fisher-Yates shuffle picks ``n`` items, so the result depends only on the
    population as a set.
    """
    pool = sorted(set(population))
    if n > len(pool):
        raise PopulationTooSmall(f"cannot draw {n} from a population of {len(pool)}")
    if n < 0:
        raise ValueError("negative sample size")
    rng = random.Random(seed)
    for i in range(n):
        j = rng.randrange(i, len(pool))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:n]


def wilson_interval(successes: int, total: int, z: float = Z_95) -> tuple[float, float]:
    if total <= 0:
        raise ValueError("empty sample")
    p = successes / total
    z2 = z * z
    denom = 1 + z2 / total
    center = (p + z2 / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z2 / (4 * total * total)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == total else min(1.0, center + half)
    return low, high


def _require_verdicts(annotations: Sequence[Annotation]) -> None:
    if not annotations:
        raise MissingVerdicts("no annotations")
    missing = [a.doi for a in annotations if a.verdict is None]
    if missing:
        raise MissingVerdicts(f"{len(missing)} annotations without verdict, e.g. {missing[0]}")


def estimate_precision(annotations: Sequence[Annotation]) -> PrecisionEstimate:
    _require_verdicts(annotations)
    correct = sum(a.verdict is Verdict.CONFIRMED for a in annotations)
    total = len(annotations)
    low, high = wilson_interval(correct, total)
    return PrecisionEstimate(correct, total, correct / total, low, high)


def fn_breakdown(annotations: Sequence[Annotation], feed_status: Mapping[str, OAStatus]) -> FalseNegativeBreakdown:
    """Split open-but-marked-closed publications by what the later feed says about them."""
    _require_verdicts(annotations)
    now_oa = still_closed = 0
    for a in annotations:
        if a.verdict is not Verdict.REFUTED:
            continue
        status = feed_status.get(a.doi)
        if status is None:
            raise MissingVerdicts(f"no feed status for {a.doi}")
        if status.is_oa:
            now_oa += 1
        else:
            still_closed += 1
    n = len(annotations)
    pct_now = 100 * now_oa / n
    pct_still = 100 * still_closed / n
    return FalseNegativeBreakdown(n, pct_now, pct_still, pct_now + pct_still)


# --- filters over joined records ------------------------------------------------

def parse_filter(text: str) -> tuple:
    """``"year=2017,detected=true"`` -> sorted ``(key, value)`` pairs."""
    pairs = []
    for part in (text or "").split(","):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad filter term {part!r}")
        pairs.append((key.strip(), value.strip()))
    return tuple(sorted(pairs))


def _truthy(value: str) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def matches_filter(jr: JoinedRecord, terms: Sequence[tuple]) -> bool:
    for key, value in terms:
        if key == "year":
            if jr.year != int(value):
                return False
        elif key == "detected":
            if jr.detected != _truthy(value):
                return False
        elif key == "status":
            if value == "oa":
                if jr.host_category is HostCategory.CLOSED:
                    return False
            elif jr.host_category is not HostCategory(value):
                return False
        elif key in ("genre", "discipline", "publisher"):
            if getattr(jr, key) != value:
                return False
        else:
            raise ValueError(f"unknown filter key {key!r}")
    return True


# --- files ---------------------------------------------------------------------

def write_sample(path: str | Path, dois: Sequence[str], titles: Mapping[str, str], spec: SampleSpec,
                 population_size: int) -> list[Path]:
    """Sample CSV plus a ``.campaign.json`` sidecar recording how it was drawn."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for doi in dois:
            w.writerow([doi, titles.get(doi, ""), "https://doi.org/" + doi])
    sidecar = path.with_name(path.name + ".campaign.json")
    sidecar.write_text(json.dumps({
        "filter": ",".join(f"{k}={v}" for k, v in spec.filter),
        "n": spec.n,
        "seed": spec.seed,
        "population_size": population_size,
        "dois": list(dois),
    }, indent=2) + "\n", encoding="utf-8")
    return [path, sidecar]


def read_annotations(path: str | Path) -> list[Annotation]:
    out = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            doi = normalize_doi(row["doi"])
            if doi in seen:
                raise ValueError(f"duplicate annotation for {doi}")
            seen.add(doi)
            raw = (row.get("verdict") or "").strip().lower()
            out.append(Annotation(doi, Verdict(raw) if raw else None, (row.get("note") or "").strip() or None))
    return out


def write_annotations(path: str | Path, annotations: Sequence[Annotation], titles: Mapping[str, str] | None = None):
    titles = titles or {}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANNOTATION_COLUMNS)
        for a in annotations:
            w.writerow([a.doi, titles.get(a.doi, ""), "https://doi.org/" + a.doi,
                        a.verdict.value if a.verdict else "", a.note or ""])


def read_feed_status(path: str | Path) -> dict[str, OAStatus]:
    """JSONL of OA statuses, or of OA histories (their latest status is used)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            if "statuses" in d:
                latest = OAHistory.from_dict(d).latest
                if latest is not None:
                    out[latest.doi] = latest
            else:
                status = OAStatus.from_dict(d)
                out[status.doi] = status
    return out
