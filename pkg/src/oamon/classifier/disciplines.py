"""Tag to macro-discipline mapping and journal-level consolidation of unsure predictions."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from ..ingest import PublicationRecord
from ..text import normalize_text
from .model import ClassifierModel, predict_topk


class MacroDiscipline(str, Enum):
    BIOLOGY = "Biology"
    ENGINEERING = "Engineering"
    SOCIAL_SCIENCES = "Social sciences"
    MATHEMATICS = "Mathematics"
    COMPUTER_SCIENCE = "Computer and information sciences"
    CHEMISTRY = "Chemistry"
    MEDICAL_RESEARCH = "Medical research"
    PHYSICAL_SCIENCES = "Physical sciences / Astronomy"
    EARTH_ECOLOGY = "Earth / Ecology / Energy / Applied biology"
    HUMANITIES = "Humanities"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, value: str) -> "MacroDiscipline":
        wanted = normalize_text(value)
        for member in cls:
            if normalize_text(member.value) == wanted or member.name.lower() == wanted.replace(" ", "_"):
                return member
        raise ValueError(f"unknown macro-discipline {value!r}")


_ORDER = {m: i for i, m in enumerate(MacroDiscipline)}


def read_mapping(path: str | Path) -> dict[str, MacroDiscipline]:
    """TSV ``tag TAB macro-discipline``."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            tag, sep, macro = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: missing TAB")
            mapping[tag.strip()] = MacroDiscipline.parse(macro)
    return mapping


def map_tag_to_macro(tag: str, mapping: Mapping[str, MacroDiscipline]) -> MacroDiscipline:
    if not tag:
        return MacroDiscipline.UNKNOWN
    return mapping.get(tag, MacroDiscipline.UNKNOWN)


@dataclass(frozen=True)
class DisciplineAssignment:
    discipline: MacroDiscipline
    confident: bool
    probability: float = 0.0

    def to_dict(self, doi: str) -> dict:
        return {"doi": doi, "discipline": self.discipline.value, "confident": self.confident,
                "probability": round(self.probability, 6)}


def journal_key(record: PublicationRecord) -> str | None:
    if record.issns:
        return "issn:" + record.issns[0]
    name = normalize_text(record.journal_name or "")
    return "name:" + name if name else None


def assign_disciplines(
    publications: Iterable[PublicationRecord],
    model: ClassifierModel,
    mapping: Mapping[str, MacroDiscipline],
    tau: float = 0.5,
) -> dict[str, DisciplineAssignment]:
    """Discipline per DOI.

    Pass 1 keeps the top-1 prediction when its probability reaches ``tau``.
    Pass 2 gives every other publication the most common confident
    discipline of its journal (ISSN first, else normalized name), ties
    resolved by enumeration order; no journal evidence leaves it Unknown.
    Confident publications whose tag is unmapped do not vote.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must be in (0, 1)")
    pubs = list(publications)
    first: dict[str, DisciplineAssignment] = {}
    votes: dict[str, Counter] = {}
    for rec in pubs:
        top = predict_topk(model, rec.title, 1)
        prob = top[0].probability if top else 0.0
        if top and prob >= tau:
            macro = map_tag_to_macro(top[0].label, mapping)
            first[rec.doi] = DisciplineAssignment(macro, True, prob)
            key = journal_key(rec)
            if key is not None and macro is not MacroDiscipline.UNKNOWN:
                votes.setdefault(key, Counter())[macro] += 1
        else:
            first[rec.doi] = DisciplineAssignment(MacroDiscipline.UNKNOWN, False, prob)

    out = {}
    for rec in pubs:
        a = first[rec.doi]
        if not a.confident:
            key = journal_key(rec)
            counter = votes.get(key) if key is not None else None
            if counter:
                best = min(counter, key=lambda m: (-counter[m], _ORDER[m]))
                a = DisciplineAssignment(best, False, a.probability)
        out[rec.doi] = a
    return out
