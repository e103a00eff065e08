"""Known-place list with coordinates.

Backs the baseline predictor and anchors construction mining. Coordinates
ship inside the gazetteer file (name <TAB> lat <TAB> lon, optional fourth
column with a population rank); there is no online geocoding. A stop-list
removes place names that are homographs of common words and would
otherwise flood the models with noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .corpus import Document, tokenize
from .geo import GeoPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    location: GeoPoint
    population_rank: Optional[int] = None


def load_stoplist(path: str | Path) -> set[str]:
    """One name per line; '#' comments and blank lines ignored."""
    names = set()
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                names.add(line.lower())
    return names


def load_gazetteer(path: str | Path, stoplist: Optional[set[str]] = None) -> dict[str, GazetteerEntry]:
    """Load a gazetteer TSV into a name -> entry map.

    Names are lowercased. Names that do not survive tokenization as a
    single identical token (multi-word names, punctuation-only names) are
    dropped with a warning, as are stop-listed names. Duplicates keep the
    first occurrence.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"gazetteer file not found: {path}")
    stoplist = stoplist or set()
    entries: dict[str, GazetteerEntry] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                logger.warning("%s:%d: malformed gazetteer line, skipped", path, lineno)
                continue
            name = fields[0].lower()
            try:
                loc = GeoPoint(float(fields[1]), float(fields[2]))
            except ValueError:
                logger.warning("%s:%d: bad coordinates for %r, skipped", path, lineno, name)
                continue
            rank = None
            if len(fields) == 4 and fields[3]:
                try:
                    rank = int(fields[3])
                except ValueError:
                    rank = None
            if tokenize(name) != [name]:
                logger.warning("%s:%d: %r is not a single clean token, skipped", path, lineno, name)
                continue
            if name in stoplist:
                continue
            if name in entries:
                logger.warning("%s:%d: duplicate name %r, keeping first", path, lineno, name)
                continue
            entries[name] = GazetteerEntry(name=name, location=loc, population_rank=rank)
    return entries


def gazetteer_hits(doc: Document, gaz: Mapping[str, GazetteerEntry]) -> dict[str, tuple[GeoPoint, int]]:
    """Per-token counts of gazetteer matches in a document."""
    hits: dict[str, tuple[GeoPoint, int]] = {}
    for tok in doc.tokens:
        entry = gaz.get(tok)
        if entry is None:
            continue
        if tok in hits:
            loc, n = hits[tok]
            hits[tok] = (loc, n + 1)
        else:
            hits[tok] = (entry.location, 1)
    return hits
