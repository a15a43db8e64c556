"""Text normalization shared by affiliation matching, name lookup and tokenization."""
from __future__ import annotations

import re
import unicodedata

_WS = re.compile(r"\s+")


def strip_diacritics(s: str) -> str:
    decomposed = unicodedata.normalize("NFKD", s)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def normalize_text(s: str) -> str:
    """Lowercase, drop combining marks, collapse whitespace and trim.

    >>> normalize_text("  Orléans ")
    'orleans'
    """
    if not s:
        return ""
    s = s.lower()
    if not s.isascii():
        s = strip_diacritics(s)
    return _WS.sub(" ", s).strip()
