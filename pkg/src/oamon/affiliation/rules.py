"""Keyword/city rules deciding whether an affiliation string points to the target country."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from ..text import normalize_text


class Origin(str, Enum):
    HTML_META = "html-meta"
    HTML_JSONLD = "html-jsonld"
    HTML_ELEMENT = "html-element"
    HAL = "hal"


@dataclass(frozen=True)
class AffiliationString:
    text: str
    origin: Origin

    def __post_init__(self):
        text = " ".join(str(self.text).split())
        if not text:
            raise ValueError("empty affiliation string")
        object.__setattr__(self, "text", text)
        object.__setattr__(self, "origin", Origin(self.origin))


def read_name_list(path) -> list[str]:
    """One entry per line; blank lines and ``#`` comments skipped."""
    source = path if hasattr(path, "read_text") else Path(path)
    text = source.read_text("utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _default_cities() -> tuple:
    return tuple(read_name_list(resources.files("oamon.data").joinpath("cities_fr.txt")))


def _dedup(items) -> tuple:
    out = []
    for item in items:
        norm = normalize_text(item)
        if norm and norm not in out:
            out.append(norm)
    return tuple(out)


_LETTER_BEFORE = r"(?<![^\W\d_])"
_LETTER_AFTER = r"(?![^\W\d_])"


@dataclass(frozen=True)
class CountryRuleset:
    """Immutable rule set; every entry is stored normalized.

    Keywords are tried before city names. An exclusion pattern occurring
    anywhere in the (normalized) affiliation vetoes the match.
    """

    country_keywords: tuple = ("france",)
    city_names: tuple = field(default_factory=_default_cities)
    exclusion_patterns: tuple = ()
    country_code: str = "fr"

    def __post_init__(self):
        object.__setattr__(self, "country_keywords", _dedup(self.country_keywords))
        object.__setattr__(self, "city_names", _dedup(self.city_names))
        object.__setattr__(self, "exclusion_patterns", _dedup(self.exclusion_patterns))
        object.__setattr__(self, "country_code", self.country_code.strip().lower())
        tokens = self.country_keywords + tuple(c for c in self.city_names if c not in self.country_keywords)
        compiled = tuple(
            (tok, re.compile(_LETTER_BEFORE + re.escape(tok) + _LETTER_AFTER)) for tok in tokens
        )
        object.__setattr__(self, "_patterns", compiled)


def load_ruleset(path: str | Path | None = None) -> CountryRuleset:
    """Load a JSON or TOML rules file; ``None`` loads the bundled French rules.

    Recognised keys: ``country_code``, ``country_keywords``, ``city_names``,
    ``city_names_file`` (resolved relative to the rules file),
    ``exclusion_patterns``.
    """
    if path is None:
        base = resources.files("oamon.data")
        cfg = json.loads(base.joinpath("rules.json").read_text("utf-8"))
    else:
        path = Path(path)
        base = path.parent
        if path.suffix == ".toml":
            from .._compat import tomllib

            cfg = tomllib.loads(path.read_text("utf-8"))
        else:
            cfg = json.loads(path.read_text("utf-8"))
    cities = list(cfg.get("city_names", ()))
    if cfg.get("city_names_file"):
        cities.extend(read_name_list(base.joinpath(cfg["city_names_file"])))
    return CountryRuleset(
        country_keywords=tuple(cfg.get("country_keywords", ("france",))),
        city_names=tuple(cities),
        exclusion_patterns=tuple(cfg.get("exclusion_patterns", ())),
        country_code=cfg.get("country_code", "fr"),
    )


def match_country(aff: AffiliationString | str, rules: CountryRuleset) -> str | None:
    """Return the first keyword/city found as a whole word, or None.

    A word boundary is any non-letter character (or string edge), so
    ``Francesco`` does not match ``france`` while ``91405Orsay`` matches
    ``orsay``.
    """
    text = normalize_text(aff.text if isinstance(aff, AffiliationString) else aff)
    if not text:
        return None
    for pattern in rules.exclusion_patterns:
        if pattern in text:
            return None
    for token, rx in rules._patterns:
        if token in text and rx.search(text):
            return token
    return None
