"""Fetch and cache the CAD backend's API documentation for repair hints.

One configured reference page is fetched over HTTP (or read from a local
file path), stripped to plain text, and cached on disk under a hash of the
URL. A stale cache beats no docs: on network failure the cached copy is
returned with a warning flag, and the repair loop degrades to empty hints
only when both fetch and cache fail.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Callable

import httpx

from .errors import DocsUnavailable

logger = logging.getLogger(__name__)

DEFAULT_TTL_S = 7 * 24 * 3600  # docs pages change rarely

_HEADING_TAGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
_SKIP_TAGS = {"script", "style"}


@dataclass
class DocCorpus:
    source_url: str
    fetched_at: float
    text: str
    byte_size: int
    stale: bool = False


class _TextExtractor(HTMLParser):
    """Strips markup; headings become '# ' lines so sections stay findable."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0
        self._in_heading = False

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _HEADING_TAGS:
            self._in_heading = True
            self.chunks.append("\n# ")
        elif tag in ("p", "div", "li", "tr", "br", "section", "dt", "dd", "pre"):
            self.chunks.append("\n")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS and self._skip_depth:
            self._skip_depth -= 1
        elif tag in _HEADING_TAGS:
            self._in_heading = False
            self.chunks.append("\n")

    def handle_data(self, data):
        if not self._skip_depth:
            self.chunks.append(data)

    def text(self) -> str:
        return "".join(self.chunks)


def html_to_text(markup: str) -> str:
    """Plain text with normalized whitespace; '# ' marks section headings."""
    if "<" not in markup:
        body = markup
    else:
        extractor = _TextExtractor()
        extractor.feed(markup)
        extractor.close()
        body = extractor.text()
    lines = []
    for raw_line in body.splitlines():
        line = re.sub(r"\s+", " ", raw_line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def bundled_snapshot_path() -> Path:
    """Offline documentation snapshot shipped with the package."""
    return Path(resources.files("cadteam").joinpath("data/backend_docs.html"))


def _cache_paths(url: str, cache_dir: Path) -> tuple[Path, Path]:
    digest = hashlib.sha256(url.encode("utf-8")).hexdigest()
    base = Path(cache_dir) / digest
    return base.with_suffix(".txt"), base.with_suffix(".meta")


def _fetch_url(url: str, timeout: float = 30.0) -> str:
    if url.startswith(("http://", "https://")):
        response = httpx.get(url, timeout=timeout, follow_redirects=True)
        response.raise_for_status()
        return response.text
    path = Path(url[len("file://"):] if url.startswith("file://") else url)
    return path.read_text(encoding="utf-8")


def retrieve(url: str, cache_dir: Path | str, ttl_s: float = DEFAULT_TTL_S,
             fetch: Callable[[str], str] | None = None,
             now: Callable[[], float] = time.time) -> DocCorpus:
    """Return the documentation corpus for `url`, from cache when fresh.

    Raises DocsUnavailable only when both the fetch and the cache fail.
    """
    cache_dir = Path(cache_dir)
    text_path, meta_path = _cache_paths(url, cache_dir)

    cached: DocCorpus | None = None
    if text_path.exists() and meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            text = text_path.read_text(encoding="utf-8")
            cached = DocCorpus(source_url=url, fetched_at=float(meta["fetched_at"]),
                               text=text, byte_size=len(text.encode("utf-8")))
        except (OSError, ValueError, KeyError):
            cached = None
    if cached is not None and now() - cached.fetched_at < ttl_s:
        return cached

    fetch = fetch or _fetch_url
    try:
        markup = fetch(url)
        text = html_to_text(markup)
        if not text:
            raise ValueError("documentation page produced no text")
    except Exception as exc:
        if cached is not None:
            logger.warning("docs fetch failed (%s); serving stale cache for %s", exc, url)
            cached.stale = True
            return cached
        raise DocsUnavailable(f"cannot fetch {url} and no cached copy exists: {exc}") from exc

    fetched_at = now()
    cache_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(text_path, text)
    _atomic_write(meta_path, json.dumps({"url": url, "fetched_at": fetched_at}))
    return DocCorpus(source_url=url, fetched_at=fetched_at, text=text,
                     byte_size=len(text.encode("utf-8")))


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    tmp.rename(path)


def _split_sections(text: str) -> list[tuple[str, str]]:
    """(heading, body) pairs; text before the first heading gets heading ''."""
    sections: list[tuple[str, list[str]]] = [("", [])]
    for line in text.splitlines():
        if line.startswith("# "):
            sections.append((line[2:], [line]))
        else:
            sections[-1][1].append(line)
    return [(head, "\n".join(body).strip()) for head, body in sections if body]


def truncate_for_context(corpus: DocCorpus, budget: int, code: str) -> str:
    """At most `budget` characters of documentation, in document order,
    preferring sections whose headings share identifiers with the code."""
    if budget <= 0:
        raise ValueError("budget must be > 0")
    if not corpus.text:
        return ""
    if len(corpus.text) <= budget:
        return corpus.text

    identifiers = {token.lower() for token in re.findall(r"\w+", code)}
    sections = _split_sections(corpus.text)
    scored = []
    for position, (heading, body) in enumerate(sections):
        words = {w.lower() for w in re.findall(r"\w+", heading)}
        scored.append((-len(words & identifiers), position, body))
    scored.sort()

    chosen: list[tuple[int, str]] = []
    used = 0
    for _score, position, body in scored:
        cost = len(body) + (1 if chosen else 0)  # joining newline
        if used + cost <= budget:
            chosen.append((position, body))
            used += cost
    if not chosen:
        # Nothing fits whole; take a prefix of the most relevant section.
        return scored[0][2][:budget]
    chosen.sort()
    return "\n".join(body for _pos, body in chosen)
