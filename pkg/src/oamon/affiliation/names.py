"""Author-name prefilter used to skip scraping records with no known national author."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable

from ..ingest import PublicationRecord
from ..text import normalize_text


def name_key(family: str, given: str | None = None) -> str:
    return f"{normalize_text(family)}|{normalize_text(given or '')}"


class AuthorNameIndex:
    """Set of ``family|given`` keys with a family-only side table.

    Homonyms collapse to a single key; several spellings of one person
    simply become several keys.
    """

    def __init__(self, names: Iterable[tuple[str, str | None]] = ()):
        self._keys: set[str] = set()
        self._families: set[str] = set()
        for family, given in names:
            self.add(family, given)

    def add(self, family: str, given: str | None = None) -> None:
        family_n = normalize_text(family)
        if not family_n:
            return
        self._keys.add(name_key(family, given))
        self._families.add(family_n)

    def __contains__(self, key: str) -> bool:
        family, _, given = key.partition("|")
        return name_key(family, given) in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def has_name(self, family: str, given: str | None) -> bool:
        return name_key(family, given) in self._keys

    def has_family(self, family: str) -> bool:
        return normalize_text(family) in self._families

    @classmethod
    def from_tsv(cls, paths: Iterable[str | Path]) -> "AuthorNameIndex":
        index = cls()
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line.strip() or line.startswith("#"):
                        continue
                    family, _, given = line.partition("\t")
                    index.add(family, given or None)
        return index


def prefilter_author_match(record: PublicationRecord, index: AuthorNameIndex) -> bool:
    """True when some author is known to the index. Authorless records pass (fail-open)."""
    if not record.authors:
        return True
    for author in record.authors:
        if author.given:
            if index.has_name(author.family, author.given):
                return True
        elif index.has_family(author.family):
            return True
    return False
