"""Where landing-page HTML comes from: a fixture directory, or a polite HTTP fetcher."""
from __future__ import annotations

import logging
import os
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Callable, Protocol
from urllib.parse import quote, unquote

logger = logging.getLogger(__name__)


class DocumentSource(Protocol):
    def get(self, doi: str) -> str | None: ...


def fixture_filename(doi: str) -> str:
    return quote(doi, safe="") + ".html"


class FixtureDirectorySource:
    """Serves ``<quoted-doi>.html`` files from one directory; missing DOIs yield None."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        names = os.listdir(self.directory) if self.directory.is_dir() else ()
        # keyed by the decoded DOI so lookups need no quoting
        self._files = {unquote(n[:-5]).lower(): n for n in names if n.endswith(".html")}

    def get(self, doi: str) -> str | None:
        name = self._files.get(doi)
        if name is None:
            return None
        return (self.directory / name).read_text(encoding="utf-8", errors="replace")


class TokenBucket:
    """Blocking token bucket: ``rate`` tokens per second, at most ``capacity`` banked."""

    def __init__(self, rate: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Take one token, sleeping as needed. Returns the time slept."""
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            wait = 0.0
            if self._tokens < 1:
                wait = (1 - self._tokens) / self.rate
                self._sleep(wait)
                self._last = self._clock()
                self._tokens = 1.0
            self._tokens -= 1
            return wait


class HttpDocumentSource:
    """Fetch ``http://doi.org/<doi>`` under a shared politeness limit."""

    def __init__(self, requests_per_second: float = 1.0, timeout: float = 20.0,
                 resolver: str = "http://doi.org/", user_agent: str = "oamon/0.1",
                 bucket: TokenBucket | None = None):
        self.bucket = bucket or TokenBucket(requests_per_second)
        self.timeout = timeout
        self.resolver = resolver
        self.user_agent = user_agent

    def get(self, doi: str) -> str | None:
        self.bucket.acquire()
        req = urllib.request.Request(self.resolver + doi, headers={"User-Agent": self.user_agent})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                charset = resp.headers.get_content_charset() or "utf-8"
                return resp.read().decode(charset, errors="replace")
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            logger.warning("fetch failed for %s: %s", doi, exc)
            return None
