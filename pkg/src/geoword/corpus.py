"""Corpus ingestion: tokenization, geotagged post readers, occurrence streams.

File formats (UTF-8, one record per line, tab-separated):

  geotagged posts / labeled documents:  id <TAB> lat <TAB> lon <TAB> text
  untagged documents:                   id <TAB> text

A line whose id field starts with '#' is a comment and is ignored.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .geo import GeoPoint


class CorpusFormatError(ValueError):
    """Corpus file is missing, unreadable, or mostly malformed."""


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    location: Optional[GeoPoint] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("post id must be non-empty")
        if not self.text.strip():
            raise ValueError("post text must be non-empty")


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]
    gold_location: Optional[GeoPoint] = None


@dataclass(frozen=True)
class TokenOccurrence:
    token: str
    location: GeoPoint
    post_id: str


@dataclass
class IngestStats:
    """Mutable counters a reader fills in while streaming."""

    read: int = 0
    skipped: int = 0
    reasons: dict = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


def _keep_leading(ch: str) -> bool:
    # '#' and '@' prefixes carry signal (hash tags, user names) and survive
    return ch in "#@"


def _is_strippable(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def _clean_token(raw: str) -> str:
    start, end = 0, len(raw)
    while start < end and _is_strippable(raw[start]) and not _keep_leading(raw[start]):
        start += 1
    while end > start + 1 and _is_strippable(raw[end - 1]):
        end -= 1
    # a single remaining strippable char (e.g. a bare '#') is dropped too
    if end == start + 1 and _is_strippable(raw[start]) and not _keep_leading(raw[start]):
        return ""
    if end == start + 1 and raw[start] in "#@":
        return ""
    return raw[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, stripping edge punctuation.

    Leading '#'/'@' are kept (hash tags and user names are locational),
    internal hyphens and apostrophes are kept, empty results are dropped.
    """
    out = []
    for raw in text.lower().split():
        tok = _clean_token(raw)
        if tok:
            out.append(tok)
    return out


def _parse_latlon(lat_s: str, lon_s: str) -> GeoPoint:
    return GeoPoint(float(lat_s), float(lon_s))


def read_geotagged(path: str | Path, stats: Optional[IngestStats] = None) -> Iterator[Post]:
    """Stream posts from a geotagged corpus file.

    Malformed lines (wrong field count, unparseable or out-of-range
    coordinates, empty text) are skipped and counted in ``stats``. If more
    than half of all data lines were malformed once the file is exhausted,
    the whole file is rejected with CorpusFormatError.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusFormatError(f"corpus file not found: {path}")
    if stats is None:
        stats = IngestStats()
    n_lines = 0
    n_bad = 0

    def bad(reason: str) -> None:
        nonlocal n_bad
        n_bad += 1
        stats.skip(reason)

    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                continue
            n_lines += 1
            fields = line.split("\t", 3)
            if len(fields) != 4:
                bad("field-count")
                continue
            pid, lat_s, lon_s, text = fields
            try:
                loc = _parse_latlon(lat_s, lon_s)
            except ValueError:
                bad("bad-coordinates")
                continue
            if not pid or not text.strip():
                bad("empty-field")
                continue
            stats.read += 1
            yield Post(id=pid, text=text, location=loc)
    if n_lines > 0 and n_bad > n_lines / 2:
        raise CorpusFormatError(
            f"{path}: {n_bad} of {n_lines} lines malformed ({stats.reasons})"
        )


def read_documents(path: str | Path) -> Iterator[Document]:
    """Stream untagged documents (id <TAB> text), tokenized."""
    path = Path(path)
    if not path.exists():
        raise CorpusFormatError(f"document file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t", 1)
            if len(fields) != 2:
                raise CorpusFormatError(f"{path}: expected 'id<TAB>text', got: {line[:60]!r}")
            pid, text = fields
            yield Document(id=pid, tokens=tuple(tokenize(text)))


def read_labeled_documents(path: str | Path, stats: Optional[IngestStats] = None) -> Iterator[Document]:
    """Stream gold-labeled documents from the geotagged 4-field format."""
    for post in read_geotagged(path, stats):
        yield Document(id=post.id, tokens=tuple(tokenize(post.text)), gold_location=post.location)


def occurrences(posts: Iterable[Post]) -> Iterator[TokenOccurrence]:
    """One TokenOccurrence per token instance of every located post."""
    for post in posts:
        if post.location is None:
            continue
        for tok in tokenize(post.text):
            yield TokenOccurrence(token=tok, location=post.location, post_id=post.id)
