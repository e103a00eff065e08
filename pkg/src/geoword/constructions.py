"""Mining and applying locational context-window constructions.

A construction is a short contiguous token pattern with one free slot,
e.g. ("bor", "i", SLOT). Candidates are harvested from context windows
around gazetteer-token occurrences, the most frequent ones are scored by
how often the words they return (corpus-wide, in slot position) have high
placeness, and the best are kept as a filter that picks locationally
indicative words out of arbitrary text.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Document, Post, tokenize
from .gazetteer import GazetteerEntry
from .wordmodel import ModelStore

SLOT = "<slot>"

DEFAULT_WINDOW_SHAPES = ("6+0", "3+3", "0+6")
DEFAULT_CANDIDATE_CAP = 900
DEFAULT_RETAIN_CAP = 150
DEFAULT_YIELD_LOG_PLACENESS = 20.0
DEFAULT_BAND_LOW = 0.00008
DEFAULT_BAND_DIVISOR = 300.0


class NoAnchorsError(ValueError):
    """No gazetteer token occurs in the mining corpus."""


def parse_window_shape(shape: str) -> tuple[int, int]:
    """'6+0' -> (6, 0): tokens taken before and after the anchor."""
    try:
        pre_s, post_s = shape.split("+")
        pre, post = int(pre_s), int(post_s)
    except ValueError:
        raise ValueError(f"bad window shape {shape!r}, expected 'N+M'") from None
    if pre < 0 or post < 0 or pre + post == 0:
        raise ValueError(f"bad window shape {shape!r}")
    return pre, post


@dataclass(frozen=True)
class Construction:
    """A token pattern with exactly one slot."""

    pattern: tuple[str, ...]
    window_shape: str
    frequency: int
    yield_score: float

    def __post_init__(self) -> None:
        if self.pattern.count(SLOT) != 1:
            raise ValueError("pattern must contain exactly one slot")
        if len(self.pattern) > 7:
            raise ValueError("pattern too long (max 7 tokens including slot)")
        if not 0.0 <= self.yield_score <= 1.0:
            raise ValueError("yield_score must be in [0, 1]")

    @property
    def slot_index(self) -> int:
        return self.pattern.index(SLOT)

    @property
    def context(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        i = self.slot_index
        return self.pattern[:i], self.pattern[i + 1 :]


@dataclass(frozen=True)
class FilterLexicon:
    """Words admitted by the retained constructions, with placeness vectors.

    Entry order is the order words first matched in the document.
    """

    entries: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def words(self) -> list[str]:
        return list(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __getitem__(self, word: str) -> tuple[float, float, float]:
        return self.entries[word]

    def __len__(self) -> int:
        return len(self.entries)


def _windows_around(tokens: Sequence[str], i: int, shapes: Sequence[tuple[int, int]]):
    """The context-window patterns anchored at position i, one per shape.

    Windows never cross the token sequence's ends; at the edges the
    pattern is simply shorter and tabulates as its own pattern.
    """
    for pre, post in shapes:
        before = tuple(tokens[max(0, i - pre) : i])
        after = tuple(tokens[i + 1 : i + 1 + post])
        yield f"{pre}+{post}", before + (SLOT,) + after


class _ContextIndex:
    """Lookup from (before, after) context pairs to pattern ids."""

    def __init__(self, contexts: Iterable[tuple[tuple[str, ...], tuple[str, ...], int]]):
        self.by_context: dict[tuple, list[int]] = {}
        self.spans: set[tuple[int, int]] = set()
        for before, after, ident in contexts:
            self.by_context.setdefault((before, after), []).append(ident)
            self.spans.add((len(before), len(after)))

    def matches_at(self, tokens: Sequence[str], i: int) -> list[int]:
        found: list[int] = []
        n = len(tokens)
        for pre_len, post_len in self.spans:
            if i - pre_len < 0 or i + post_len >= n:
                continue
            key = (tuple(tokens[i - pre_len : i]), tuple(tokens[i + 1 : i + 1 + post_len]))
            ids = self.by_context.get(key)
            if ids:
                found.extend(ids)
        return found


def mine_constructions(
    posts: Iterable[Post],
    gaz: Mapping[str, GazetteerEntry],
    store: ModelStore,
    *,
    window_shapes: Sequence[str] = DEFAULT_WINDOW_SHAPES,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
    retain_cap: int = DEFAULT_RETAIN_CAP,
    yield_log_placeness: float = DEFAULT_YIELD_LOG_PLACENESS,
) -> list[Construction]:
    """Mine, score and rank slot constructions from a post corpus.

    Candidate patterns come from context windows around gazetteer tokens;
    the candidate_cap most frequent are scored by the fraction of distinct
    word types they return corpus-wide (slot position, any token) whose
    top-component log placeness exceeds yield_log_placeness. The
    retain_cap best by that score are returned, ties broken by higher
    frequency, then pattern, then shape.
    """
    shapes = [parse_window_shape(s) for s in window_shapes]
    token_lists = [tokenize(p.text) for p in posts]

    window_counts: Counter = Counter()
    for tokens in token_lists:
        for i, tok in enumerate(tokens):
            if tok not in gaz:
                continue
            for shape_str, pattern in _windows_around(tokens, i, shapes):
                window_counts[(shape_str, pattern)] += 1
    if not window_counts:
        raise NoAnchorsError("no gazetteer token occurs in the corpus")

    candidates = sorted(window_counts, key=lambda sp: (-window_counts[sp], sp[1], sp[0]))
    candidates = candidates[:candidate_cap]

    index = _ContextIndex(
        (pattern[: pattern.index(SLOT)], pattern[pattern.index(SLOT) + 1 :], ident)
        for ident, (_, pattern) in enumerate(candidates)
    )
    fillers: list[set[str]] = [set() for _ in candidates]
    for tokens in token_lists:
        for i in range(len(tokens)):
            for ident in index.matches_at(tokens, i):
                fillers[ident].add(tokens[i])

    def score(words: set[str]) -> float:
        if not words:
            return 0.0
        high = sum(
            1 for w in words if w in store and store[w].max_log_placeness > yield_log_placeness
        )
        return high / len(words)

    scored = [
        Construction(
            pattern=pattern,
            window_shape=shape_str,
            frequency=window_counts[(shape_str, pattern)],
            yield_score=score(fillers[ident]),
        )
        for ident, (shape_str, pattern) in enumerate(candidates)
    ]
    scored.sort(key=lambda c: (-c.yield_score, -c.frequency, c.pattern, c.window_shape))
    return scored[:retain_cap]


def extract_candidates(doc: Document, constructions: Sequence[Construction]) -> Counter:
    """Slot fillers of every construction match in the document.

    Each (construction, position) match counts once, so a token matched by
    two constructions contributes two counts. Key order is first-match
    order, scanning positions left to right.
    """
    index = _ContextIndex(
        (c.context[0], c.context[1], ident) for ident, c in enumerate(constructions)
    )
    found: Counter = Counter()
    tokens = doc.tokens
    for i in range(len(tokens)):
        n_matches = len(index.matches_at(tokens, i))
        if n_matches:
            found[tokens[i]] += n_matches
    return found


def frequency_filter(
    candidates: Mapping[str, int],
    n_tokens: int,
    *,
    band_low: float = DEFAULT_BAND_LOW,
    band_divisor: float = DEFAULT_BAND_DIVISOR,
) -> set[str]:
    """Keep words whose frequency sits inside the document-length band.

    A word passes iff band_low * N <= f <= N / band_divisor (both bounds
    inclusive), with N the document's token count. Too-rare words are
    noise, too-frequent ones are function words.
    """
    if n_tokens <= 0:
        raise ValueError("document token count must be positive")
    # epsilon keeps the bounds inclusive under decimal constants that are
    # inexact in binary (0.00008 * 300000 evaluates just above 24)
    lo = band_low * n_tokens - 1e-9
    hi = n_tokens / band_divisor + 1e-9
    return {w for w, f in candidates.items() if lo <= f <= hi}


def filter_document(
    doc: Document,
    constructions: Sequence[Construction],
    store: ModelStore,
    log_t: float,
    *,
    band_low: float = DEFAULT_BAND_LOW,
    band_divisor: float = DEFAULT_BAND_DIVISOR,
) -> FilterLexicon:
    """Reduce a document to its locationally indicative words.

    Stages: construction slot extraction, document-frequency band (on the
    word's raw count in the document), store membership, and the placeness
    threshold (top component's log placeness must exceed log_t). An empty
    result is valid and means the caller should abstain.
    """
    if not doc.tokens:
        return FilterLexicon()
    matched = extract_candidates(doc, constructions)
    doc_counts = Counter(doc.tokens)
    in_band = frequency_filter(
        {w: doc_counts[w] for w in matched},
        len(doc.tokens),
        band_low=band_low,
        band_divisor=band_divisor,
    )
    entries: dict[str, tuple[float, float, float]] = {}
    for word in matched:
        if word not in in_band:
            continue
        model = store.get(word)
        if model is None or model.max_log_placeness <= log_t:
            continue
        entries[word] = model.placeness
    return FilterLexicon(entries=entries)


def save_constructions(constructions: Sequence[Construction], path: str | Path) -> None:
    """Persist as TSV: shape <TAB> pattern <TAB> frequency <TAB> yield."""
    lines = [
        "\t".join((c.window_shape, " ".join(c.pattern), str(c.frequency), repr(c.yield_score)))
        for c in constructions
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_constructions(path: str | Path) -> list[Construction]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"constructions file not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
        shape, pattern_s, freq_s, yield_s = fields
        out.append(
            Construction(
                pattern=tuple(pattern_s.split(" ")),
                window_shape=shape,
                frequency=int(freq_s),
                yield_score=float(yield_s),
            )
        )
    return out
