"""Affiliation extraction from publisher landing pages.

The page is tokenized once by :class:`PageCollector` into the pieces the
parsers need (meta tags, JSON scripts, text of affiliation-marked elements).
Each parser then reads that summary. Three generic parsers always run;
publisher plug-ins run only when their domain marker appears in the page.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

from lxml import etree

from ..errors import ParserError
from ..text import normalize_text
from .rules import AffiliationString, Origin

logger = logging.getLogger(__name__)

AFFILIATION_META_NAMES = frozenset({
    "citation_author_institution",
    "citation_affiliation",
    "citation_author_affiliation",
})

_VOID = frozenset({"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
                   "meta", "param", "source", "track", "wbr"})
_INLINE = frozenset({"b", "i", "em", "strong", "u", "small"})
_MARKER_ATTRS = ("class", "id", "itemprop")
_CAMEL = re.compile(r"([a-z])([A-Z])")
_SPLIT = re.compile(r"[^a-z0-9]+")
_AFF_TOKEN = re.compile(r"aff\d*|affil\w*")


def is_affiliation_marker(value: str) -> bool:
    """True for class/id-like values naming an affiliation (``aff1``, ``author-affiliations``).

    Substrings inside unrelated words (``staff``, ``giraffe``) do not count.
    """
    if not value:
        return False
    lowered = _CAMEL.sub(r"\1 \2", value).lower()
    if "affiliation" in lowered:
        return True
    return any(_AFF_TOKEN.fullmatch(tok) for tok in _SPLIT.split(lowered) if tok)


@dataclass
class _Capture:
    depth: int
    parts: list = field(default_factory=list)
    nested: bool = False


@dataclass
class Page:
    raw: str
    meta: list = field(default_factory=list)            # (name, content)
    json_scripts: list = field(default_factory=list)    # (type, text)
    inline_scripts: list = field(default_factory=list)
    elements: list = field(default_factory=list)        # captured affiliation element texts


class PageCollector:
    """lxml parser target gathering what the parsers need in one pass.

    libxml2 balances tags, so every start event has a matching end event.
    """

    def __init__(self):
        self.reset()

    def reset(self):
        self.page = Page(raw="")
        self._depth = 0
        self._captures: list[_Capture] = []
        self._script: str | None = None
        self._script_parts: list[str] = []

    def start(self, tag, attrib):
        tag = tag.lower() if isinstance(tag, str) else ""
        self._depth += 1
        if tag == "meta":
            name = (attrib.get("name") or attrib.get("property") or "").strip().lower()
            if name:
                self.page.meta.append((name, attrib.get("content") or ""))
            return
        if tag in ("script", "style"):
            self._script = (attrib.get("type") or tag).strip().lower()
            self._script_parts = []
            return
        if tag in _VOID:
            if tag == "br":
                self._add_text(" ")
            return
        if tag not in _INLINE:
            self._add_text(" ")
        if not attrib:
            return
        items = attrib.items()
        # cheap pre-check: every marker or marker-named attribute contains "aff"
        if "aff" not in " ".join(f"{n} {v}" for n, v in items).lower():
            return
        marked = False
        for name, value in items:
            lname = name.lower()
            # data-affiliation="..." style attributes carry the text itself; skip bare ids
            if (value and "affiliation" in lname and lname not in _MARKER_ATTRS
                    and any(ch.isalpha() for ch in value) and " " in value.strip()):
                self.page.elements.append(value)
            if (lname in _MARKER_ATTRS or lname.startswith("data-")) and is_affiliation_marker(value or ""):
                marked = True
        if marked:
            for cap in self._captures:
                cap.nested = True
            self._captures.append(_Capture(depth=self._depth))

    def end(self, tag):
        tag = tag.lower() if isinstance(tag, str) else ""
        if tag in ("script", "style") and self._script is not None:
            text = "".join(self._script_parts)
            if "json" in self._script:
                self.page.json_scripts.append((self._script, text))
            else:
                self.page.inline_scripts.append(text)
            self._script = None
        elif tag not in _INLINE and tag not in _VOID:
            self._add_text(" ")
        self._depth -= 1
        self._close_captures(self._depth)

    def data(self, data):
        if self._script is not None:
            self._script_parts.append(data)
        else:
            self._add_text(data)

    def comment(self, text):
        pass

    def _close_captures(self, depth: int):
        while self._captures and self._captures[-1].depth > depth:
            cap = self._captures.pop()
            if not cap.nested:
                self.page.elements.append("".join(cap.parts))

    def _add_text(self, text):
        for cap in self._captures:
            cap.parts.append(text)

    def close(self):
        self._close_captures(0)
        page = self.page
        self.reset()
        return page


# lxml inspects the target on every parser construction, so keep one per thread
_local = threading.local()


def _parser():
    parser = getattr(_local, "parser", None)
    if parser is None:
        parser = _local.parser = etree.HTMLParser(target=PageCollector(), recover=True)
    return parser


def parse_page(html: str) -> Page:
    parser = _parser()
    try:
        parser.feed(html)
        page = parser.close()
    except etree.ParserError:
        # libxml2 gives up on documents without any markup
        page = Page(raw="")
        _local.parser = None
    page.raw = html
    return page


# --- parsers -----------------------------------------------------------------

@dataclass(frozen=True)
class AffiliationParser:
    """A named strategy turning a :class:`Page` into affiliation strings.

    ``domains`` empty means the parser is generic and always runs; otherwise
    it runs only when one of the markers occurs in the raw page.
    """

    name: str
    origin: Origin
    extract: Callable[[Page], Iterable[str]]
    domains: tuple = ()

    def applies(self, page: Page) -> bool:
        return not self.domains or any(d in page.raw for d in self.domains)


def meta_affiliations(page: Page) -> list[str]:
    return [content for name, content in page.meta if name in AFFILIATION_META_NAMES]


def _affiliation_text(value) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        return [t for v in value for t in _affiliation_text(v)]
    if isinstance(value, dict):
        parts = [value.get("name")]
        address = value.get("address")
        if isinstance(address, dict):
            country = address.get("addressCountry")
            if isinstance(country, dict):
                country = country.get("name")
            parts += [address.get("addressLocality"), country]
        elif isinstance(address, str):
            parts.append(address)
        text = ", ".join(p for p in parts if isinstance(p, str) and p.strip())
        return [text] if text else []
    return []


def _walk_jsonld(node, out: list):
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "affiliation":
                out.extend(_affiliation_text(value))
            else:
                _walk_jsonld(value, out)
    elif isinstance(node, list):
        for item in node:
            _walk_jsonld(item, out)


def jsonld_affiliations(page: Page) -> list[str]:
    out: list[str] = []
    for kind, text in page.json_scripts:
        if kind != "application/ld+json":
            continue
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParserError(f"bad JSON-LD block: {exc}") from exc
        _walk_jsonld(data, out)
    return out


_FOOTNOTE_MARK = re.compile(r"^\s*(?:\d{1,2}|[*\u2020\u2021\u00a7])\s+")


def element_affiliations(page: Page) -> list[str]:
    # drop the leading footnote number most layouts put before each affiliation
    return [_FOOTNOTE_MARK.sub("", text) for text in page.elements]


_IEEE_METADATA = re.compile(r"xplGlobal\.document\.metadata\s*=\s*(\{.*?\});\s*(?:\n|$)", re.S)


def ieee_affiliations(page: Page) -> list[str]:
    """IEEE Xplore embeds author metadata as a JS assignment."""
    out = []
    for script in page.inline_scripts:
        m = _IEEE_METADATA.search(script)
        if not m:
            continue
        try:
            meta = json.loads(m.group(1))
        except json.JSONDecodeError as exc:
            raise ParserError(f"bad xplGlobal metadata: {exc}") from exc
        for author in meta.get("authors") or ():
            out.extend(_affiliation_text(author.get("affiliation")))
    return out


def _collect_sd_text(node) -> str:
    if isinstance(node, dict):
        own = node.get("_") if isinstance(node.get("_"), str) else ""
        kids = node.get("$$") or ()
        if node.get("#name") == "label":
            return ""
        return " ".join(t for t in [own] + [_collect_sd_text(k) for k in kids] if t)
    if isinstance(node, list):
        return " ".join(_collect_sd_text(n) for n in node)
    return ""


def _walk_sd(node, out: list):
    if isinstance(node, dict):
        if node.get("#name") == "affiliation":
            text = _collect_sd_text(node)
            if text:
                out.append(text)
            return
        for value in node.values():
            _walk_sd(value, out)
    elif isinstance(node, list):
        for item in node:
            _walk_sd(item, out)


def sciencedirect_affiliations(page: Page) -> list[str]:
    """ScienceDirect ships the article tree as ``application/json`` preloaded state."""
    out: list[str] = []
    for kind, text in page.json_scripts:
        if kind != "application/json":
            continue
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParserError(f"bad preloaded state: {exc}") from exc
        _walk_sd(data, out)
    return out


GENERIC_PARSERS = (
    AffiliationParser("meta", Origin.HTML_META, meta_affiliations),
    AffiliationParser("jsonld", Origin.HTML_JSONLD, jsonld_affiliations),
    AffiliationParser("element", Origin.HTML_ELEMENT, element_affiliations),
)

_plugins: list[AffiliationParser] = [
    AffiliationParser("ieee", Origin.HTML_JSONLD, ieee_affiliations, domains=("ieeexplore.ieee.org",)),
    AffiliationParser("sciencedirect", Origin.HTML_JSONLD, sciencedirect_affiliations,
                      domains=("sciencedirect.com",)),
]


def register_plugin(parser: AffiliationParser) -> None:
    if not parser.domains:
        raise ValueError("publisher plug-ins need at least one domain marker")
    _plugins.append(parser)


def default_parsers() -> tuple:
    return GENERIC_PARSERS + tuple(_plugins)


def extract_affiliations(html: str, parsers: Iterable[AffiliationParser] | None = None) -> list[AffiliationString]:
    """Run every applicable parser in order and union the results.

    Duplicates (same normalized text) keep the origin of the first parser
    that produced them. A failing parser is logged and skipped.
    """
    if not html:
        return []
    parsers = default_parsers() if parsers is None else tuple(parsers)
    page = parse_page(html)
    seen: set[str] = set()
    out: list[AffiliationString] = []
    for parser in parsers:
        if not parser.applies(page):
            continue
        try:
            texts = parser.extract(page)
        except (ParserError, ValueError, KeyError, TypeError, AttributeError) as exc:
            logger.warning("parser %s failed: %s", parser.name, exc)
            continue
        for text in texts:
            key = normalize_text(text)
            if not key or key in seen:
                continue
            seen.add(key)
            out.append(AffiliationString(text, parser.origin))
    return out
