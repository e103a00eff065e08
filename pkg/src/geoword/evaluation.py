"""Error-distribution evaluation of predictors against gold locations.

Errors are great-circle distances in km, computed only over documents the
predictor actually located. Precision and recall at a radius share the
same numerator (predictions within the radius) but different denominators
(located vs all documents), so abstention trades recall for precision.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .corpus import Document
from .geo import GeoPoint, Grid, OutsideGridError, haversine
from .predict import Prediction, Predictor

DEFAULT_RADIUS_KM = 100.0

# fixed-width error histogram: 14 buckets of 100 km, overflow in the last
_HIST_BUCKETS = 14
_HIST_WIDTH_KM = 100.0

CSV_COLUMNS = (
    "model", "log_T", "median_km", "mean_km", "p25", "p50", "p75",
    "precision", "recall", "n_total", "n_predicted",
)


@dataclass(frozen=True)
class EvalReport:
    """Summary statistics of a prediction run.

    Error statistics are NaN when nothing was predicted; precision and
    recall are then 0.
    """

    n_total: int
    n_predicted: int
    median_error_km: float
    mean_error_km: float
    percentiles_km: dict[int, float]
    precision_at_r: float
    recall_at_r: float
    radius_r_km: float
    histogram: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n_predicted > self.n_total:
            raise ValueError("n_predicted cannot exceed n_total")


def evaluate(
    predictions: Sequence[tuple[Prediction, GeoPoint]],
    radius_km: float = DEFAULT_RADIUS_KM,
) -> EvalReport:
    """Score (prediction, gold) pairs.

    Percentiles use linear interpolation between order statistics; the
    'within radius' criterion is a strict inequality (error < R).
    """
    if not predictions:
        raise ValueError("cannot evaluate an empty prediction list")
    n_total = len(predictions)
    errors = [
        haversine(pred.location, gold)
        for pred, gold in predictions
        if pred.location is not None
    ]
    n_predicted = len(errors)
    hist = [0] * _HIST_BUCKETS
    for e in errors:
        hist[min(int(e // _HIST_WIDTH_KM), _HIST_BUCKETS - 1)] += 1
    if n_predicted:
        arr = np.asarray(errors)
        pct = {q: float(np.percentile(arr, q)) for q in (25, 50, 75)}
        mean = float(arr.mean())
        correct = int((arr < radius_km).sum())
        precision = correct / n_predicted
        recall = correct / n_total
    else:
        pct = {25: math.nan, 50: math.nan, 75: math.nan}
        mean = math.nan
        precision = recall = 0.0
    return EvalReport(
        n_total=n_total,
        n_predicted=n_predicted,
        median_error_km=pct[50],
        mean_error_km=mean,
        percentiles_km=pct,
        precision_at_r=precision,
        recall_at_r=recall,
        radius_r_km=radius_km,
        histogram=tuple(hist),
    )


def threshold_sweep(
    docs: Sequence[Document],
    predictor_family: Callable[[float], Predictor],
    log_t_values: Sequence[float],
    radius_km: float = DEFAULT_RADIUS_KM,
) -> list[tuple[float, EvalReport]]:
    """One report per placeness threshold over gold-labeled documents."""
    gold_docs = [d for d in docs if d.gold_location is not None]
    if not gold_docs:
        raise ValueError("threshold_sweep needs gold-labeled documents")
    out = []
    for log_t in log_t_values:
        predictor = predictor_family(log_t)
        pairs = [(predictor(d), d.gold_location) for d in gold_docs]
        out.append((log_t, evaluate(pairs, radius_km)))
    return out


def term_map(
    docs: Iterable[Document],
    terms: Iterable[str],
    grid: Grid,
) -> dict[tuple[int, int], dict[str, int]]:
    """Per-cell occurrence counts of the given terms over located documents.

    Documents without a location or outside the grid are skipped. The
    table is dense: every cell appears, absent terms count zero.
    """
    term_set = set(terms)
    table = {
        (r, c): {t: 0 for t in sorted(term_set)}
        for r in range(grid.n_rows)
        for c in range(grid.n_cols)
    }
    for doc in docs:
        if doc.gold_location is None:
            continue
        try:
            cell = grid.cell_of(doc.gold_location)
        except OutsideGridError:
            continue
        row = table[cell]
        for tok in doc.tokens:
            if tok in term_set:
                row[tok] += 1
    return table


def term_map_geojson(table: dict[tuple[int, int], dict[str, int]], grid: Grid) -> dict:
    """GeoJSON FeatureCollection of cell rectangles with count properties.

    Term counts sit under properties.counts to avoid clashing with the
    row/col keys.
    """
    features = []
    for (row, col) in sorted(table):
        sw, ne = grid.cell_bounds((row, col))
        ring = [
            [sw.lon, sw.lat],
            [ne.lon, sw.lat],
            [ne.lon, ne.lat],
            [sw.lon, ne.lat],
            [sw.lon, sw.lat],
        ]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"row": row, "col": col, "counts": dict(table[(row, col)])},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def format_report_table(rows: Sequence[tuple[str, Optional[float], EvalReport]]) -> str:
    """Human-readable metrics table for (model, log_T, report) rows."""
    header = f"{'model':<18} {'logT':>5} {'median':>8} {'mean':>8} {'p25':>8} {'p50':>8} {'p75':>8} {'prec':>6} {'rec':>6} {'pred/total':>11}"
    lines = [header, "-" * len(header)]
    for model, log_t, rep in rows:
        log_t_s = "-" if log_t is None else f"{log_t:g}"
        lines.append(
            f"{model:<18} {log_t_s:>5} {rep.median_error_km:>8.1f} {rep.mean_error_km:>8.1f} "
            f"{rep.percentiles_km[25]:>8.1f} {rep.percentiles_km[50]:>8.1f} {rep.percentiles_km[75]:>8.1f} "
            f"{rep.precision_at_r:>6.2f} {rep.recall_at_r:>6.2f} {rep.n_predicted:>5}/{rep.n_total:<5}"
        )
    return "\n".join(lines)


def reports_to_csv(rows: Sequence[tuple[str, Optional[float], EvalReport]]) -> str:
    """Machine CSV with the fixed column set, floats written exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for model, log_t, rep in rows:
        writer.writerow(
            [
                model,
                "" if log_t is None else repr(float(log_t)),
                repr(rep.median_error_km),
                repr(rep.mean_error_km),
                repr(rep.percentiles_km[25]),
                repr(rep.percentiles_km[50]),
                repr(rep.percentiles_km[75]),
                repr(rep.precision_at_r),
                repr(rep.recall_at_r),
                rep.n_total,
                rep.n_predicted,
            ]
        )
    return buf.getvalue()


def parse_report_csv(text: str) -> list[tuple[str, Optional[float], EvalReport]]:
    """Inverse of reports_to_csv (histogram is not persisted)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns: {header}")
    rows = []
    for rec in reader:
        model, log_t_s, med, mean, p25, p50, p75, prec, rec_, n_tot, n_pred = rec
        pct = {25: float(p25), 50: float(p50), 75: float(p75)}
        report = EvalReport(
            n_total=int(n_tot),
            n_predicted=int(n_pred),
            median_error_km=float(med),
            mean_error_km=float(mean),
            percentiles_km=pct,
            precision_at_r=float(prec),
            recall_at_r=float(rec_),
            radius_r_km=DEFAULT_RADIUS_KM,
            histogram=(),
        )
        rows.append((model, None if log_t_s == "" else float(log_t_s), report))
    return rows
