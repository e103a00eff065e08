"""Document location predictors and batch enrichment.

Four models: the gazetteer baseline (most frequent known place name),
"total" (placeness-weighted centroid over every store word in the text),
filtered centroid (same, but only over construction-filtered words), and
filtered vote (filtered words vote with their placeness into grid cells).

Abstention is a first-class outcome: when nothing in a document carries
locational signal the predictor returns an empty Prediction rather than a
made-up fallback point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .constructions import Construction, filter_document
from .corpus import Document
from .gazetteer import GazetteerEntry, gazetteer_hits
from .geo import GeoPoint, Grid, OutsideGridError, PlanarPoint, unproject
from .wordmodel import ModelStore, WordModel

MODEL_GAZETTEER = "gazetteer"
MODEL_TOTAL = "total"
MODEL_FILTERED_CENTROID = "filtered-centroid"
MODEL_FILTERED_VOTE = "filtered-vote"
MODEL_NAMES = (MODEL_GAZETTEER, MODEL_TOTAL, MODEL_FILTERED_CENTROID, MODEL_FILTERED_VOTE)

Predictor = Callable[[Document], "Prediction"]


class NoSignalError(ValueError):
    """No usable locational evidence (empty input or all-zero placeness)."""


@dataclass(frozen=True)
class Prediction:
    """A predicted location with provenance, or an abstention."""

    location: Optional[GeoPoint]
    model_name: str
    contributors: tuple[tuple[str, float], ...] = ()
    abstained: bool = False

    def __post_init__(self) -> None:
        if self.abstained != (self.location is None):
            raise ValueError("abstained must be true exactly when location is absent")
        if (self.location is not None) != bool(self.contributors):
            raise ValueError("contributors must be non-empty exactly when a location is present")


def _abstain(model_name: str) -> Prediction:
    return Prediction(location=None, model_name=model_name, abstained=True)


def predict_gazetteer(doc: Document, gaz: Mapping[str, GazetteerEntry]) -> Prediction:
    """Location of the document's most frequent gazetteer token.

    Ties go to the token occurring first in the document; no gazetteer
    token means abstention. Contributors list every matched place name
    with its count, winner first.
    """
    hits = gazetteer_hits(doc, gaz)
    if not hits:
        return _abstain(MODEL_GAZETTEER)
    first_pos = {}
    for i, tok in enumerate(doc.tokens):
        if tok in hits and tok not in first_pos:
            first_pos[tok] = i
    ranked = sorted(hits, key=lambda t: (-hits[t][1], first_pos[t]))
    winner = ranked[0]
    return Prediction(
        location=hits[winner][0],
        model_name=MODEL_GAZETTEER,
        contributors=tuple((t, float(hits[t][1])) for t in ranked),
    )


def planar_centroid(models: Sequence[WordModel]) -> PlanarPoint:
    """Placeness-weighted mean of all component means, in planar km.

    Every component of every word contributes its mean weighted by that
    component's placeness; the normalizer is the total placeness mass.
    """
    sx = sy = mass = 0.0
    for m in models:
        for comp, p in zip(m.components, m.placeness):
            sx += comp.mean.x * p
            sy += comp.mean.y * p
            mass += p
    if mass <= 0.0:
        raise NoSignalError("no positive placeness mass")
    return PlanarPoint(sx / mass, sy / mass)


def centroid(models: Sequence[WordModel], origin: GeoPoint) -> GeoPoint:
    """planar_centroid unprojected back to latitude/longitude."""
    return unproject(planar_centroid(models), origin)


def grid_vote(models: Sequence[WordModel], grid: Grid, origin: GeoPoint) -> GeoPoint:
    """Center of the grid cell collecting the most placeness votes.

    Each component casts its placeness into the cell containing its mean;
    component means outside the grid do not vote. Ties go to the lowest
    (row, col) index.
    """
    scores: dict[tuple[int, int], float] = {}
    for m in models:
        for comp, p in zip(m.components, m.placeness):
            if p <= 0.0:
                continue
            try:
                cell = grid.cell_of(unproject(comp.mean, origin))
            except (OutsideGridError, ValueError):
                continue
            scores[cell] = scores.get(cell, 0.0) + p
    if not scores:
        raise NoSignalError("no component mean votes inside the grid")
    winner = min(scores, key=lambda rc: (-scores[rc], rc))
    return grid.cell_center(winner)


def _thresholded_doc_models(doc: Document, store: ModelStore, log_t: float) -> list[WordModel]:
    """Store models of the document's distinct words above the placeness
    threshold, in first-occurrence order."""
    models = []
    seen = set()
    for tok in doc.tokens:
        if tok in seen:
            continue
        seen.add(tok)
        m = store.get(tok)
        if m is not None and m.max_log_placeness > log_t:
            models.append(m)
    return models


def predict_total(doc: Document, store: ModelStore, log_t: float = 20.0) -> Prediction:
    """Centroid over all store words in the document above the threshold."""
    models = _thresholded_doc_models(doc, store, log_t)
    if not models:
        return _abstain(MODEL_TOTAL)
    try:
        loc = centroid(models, store.origin)
    except NoSignalError:
        return _abstain(MODEL_TOTAL)
    return Prediction(
        location=loc,
        model_name=MODEL_TOTAL,
        contributors=tuple((m.word, m.total_placeness()) for m in models),
    )


def predict_filtered_centroid(
    doc: Document,
    constructions: Sequence[Construction],
    store: ModelStore,
    log_t: float = 20.0,
    *,
    band_low: float = 0.00008,
    band_divisor: float = 300.0,
) -> Prediction:
    """Centroid over construction-filtered words."""
    lex = filter_document(
        doc, constructions, store, log_t, band_low=band_low, band_divisor=band_divisor
    )
    models = [store[w] for w in lex.words()]
    if not models:
        return _abstain(MODEL_FILTERED_CENTROID)
    try:
        loc = centroid(models, store.origin)
    except NoSignalError:
        return _abstain(MODEL_FILTERED_CENTROID)
    return Prediction(
        location=loc,
        model_name=MODEL_FILTERED_CENTROID,
        contributors=tuple((m.word, m.total_placeness()) for m in models),
    )


def predict_filtered_vote(
    doc: Document,
    constructions: Sequence[Construction],
    store: ModelStore,
    grid: Grid,
    log_t: float = 20.0,
    *,
    band_low: float = 0.00008,
    band_divisor: float = 300.0,
) -> Prediction:
    """Grid vote over construction-filtered words."""
    lex = filter_document(
        doc, constructions, store, log_t, band_low=band_low, band_divisor=band_divisor
    )
    models = [store[w] for w in lex.words()]
    if not models:
        return _abstain(MODEL_FILTERED_VOTE)
    try:
        loc = grid_vote(models, grid, store.origin)
    except NoSignalError:
        return _abstain(MODEL_FILTERED_VOTE)
    return Prediction(
        location=loc,
        model_name=MODEL_FILTERED_VOTE,
        contributors=tuple((m.word, m.total_placeness()) for m in models),
    )


@dataclass(frozen=True)
class EnrichSummary:
    n_docs: int
    n_predicted: int

    @property
    def coverage(self) -> float:
        return self.n_predicted / self.n_docs if self.n_docs else 0.0


def enrich(docs: Iterable[Document], predictor: Predictor, out_path: str | Path) -> EnrichSummary:
    """Attach predicted coordinates to unlabeled documents.

    Writes 'id <TAB> lat <TAB> lon' for every non-abstaining document and
    reports how much of the stream could be located.
    """
    n_docs = n_predicted = 0
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            n_docs += 1
            pred = predictor(doc)
            if pred.abstained or pred.location is None:
                continue
            n_predicted += 1
            fh.write(f"{doc.id}\t{pred.location.lat!r}\t{pred.location.lon!r}\n")
    return EnrichSummary(n_docs=n_docs, n_predicted=n_predicted)


def write_prediction_dump(
    rows: Iterable[tuple[str, Prediction]], out_path: str | Path
) -> None:
    """Debug dump: id, model, lat, lon, abstained, contributor count."""
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for doc_id, pred in rows:
            lat = repr(pred.location.lat) if pred.location else ""
            lon = repr(pred.location.lon) if pred.location else ""
            fh.write(
                "\t".join(
                    (doc_id, pred.model_name, lat, lon,
                     "true" if pred.abstained else "false", str(len(pred.contributors)))
                )
                + "\n"
            )


def read_prediction_dump(path: str | Path) -> list[tuple[str, Prediction]]:
    """Parse a debug dump back into predictions.

    The dump keeps only the contributor count, so contributors are
    reconstructed as placeholders; locations and abstentions are exact.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 tab-separated fields")
        doc_id, model, lat_s, lon_s, abstained_s, n_contrib_s = fields
        if abstained_s == "true":
            pred = Prediction(location=None, model_name=model, abstained=True)
        else:
            pred = Prediction(
                location=GeoPoint(float(lat_s), float(lon_s)),
                model_name=model,
                contributors=(("(dump)", 0.0),) * max(1, int(n_contrib_s)),
            )
        rows.append((doc_id, pred))
    return rows
