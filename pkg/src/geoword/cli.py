"""Command-line pipeline: train, mine, predict, evaluate, enrich, termmap.

Stage outputs are files so stages can be rerun independently. Every
command is deterministic for a fixed config and seed. Exit statuses:
0 success, 2 input or configuration error, 3 data-insufficiency error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import constructions as cx
from . import evaluation as ev
from . import predict as pr
from .config import Config, ConfigError, load_config
from .corpus import (
    CorpusFormatError,
    Document,
    IngestStats,
    occurrences,
    read_documents,
    read_geotagged,
    read_labeled_documents,
)
from .gazetteer import load_gazetteer, load_stoplist
from .geo import GeoPoint, Grid, unproject
from .wordmodel import (
    InsufficientSupportError,
    ModelStore,
    StoreFormatError,
    build_store,
    load_store,
    save_store,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA = 3


class DataInsufficiencyError(ValueError):
    """Pipeline cannot proceed for lack of usable data (exit status 3)."""


def _file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_gaz(cfg: Config):
    stop = load_stoplist(cfg.stoplist) if cfg.stoplist else None
    return load_gazetteer(cfg.gazetteer, stop)


def _grid_for(cfg: Config, store: Optional[ModelStore]) -> Grid:
    """Grid from explicit config bounds, else padded around the store's
    component means."""
    bounds = cfg.grid_bounds
    if bounds is not None:
        return Grid.from_bbox(bounds[0], bounds[1], cfg.grid_cell_km)
    if store is None or not store.models:
        raise ConfigError("grid bounds are not configured and no model store is available")
    lat_min = lon_min = math.inf
    lat_max = lon_max = -math.inf
    for model in store.models.values():
        for comp in model.components:
            g = unproject(comp.mean, store.origin)
            lat_min, lat_max = min(lat_min, g.lat), max(lat_max, g.lat)
            lon_min, lon_max = min(lon_min, g.lon), max(lon_max, g.lon)
    return Grid.from_bbox(GeoPoint(lat_min, lon_min), GeoPoint(lat_max, lon_max), cfg.grid_cell_km)


def _read_any_documents(path: str | Path) -> list[Document]:
    """Documents from either the labeled (4-field) or untagged (2-field)
    format, sniffed from the first data line."""
    path = Path(path)
    if not path.exists():
        raise CorpusFormatError(f"document file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            n_fields = len(line.rstrip("\n").split("\t"))
            break
        else:
            return []
    if n_fields >= 4:
        return list(read_labeled_documents(path))
    return list(read_documents(path))


def _make_predictor(cfg: Config, model: str, log_t: float) -> pr.Predictor:
    if model == pr.MODEL_GAZETTEER:
        gaz = _load_gaz(cfg)
        return lambda doc: pr.predict_gazetteer(doc, gaz)
    store = load_store(cfg.model_store)
    if model == pr.MODEL_TOTAL:
        return lambda doc: pr.predict_total(doc, store, log_t)
    cons = cx.load_constructions(cfg.constructions)
    if model == pr.MODEL_FILTERED_CENTROID:
        return lambda doc: pr.predict_filtered_centroid(
            doc, cons, store, log_t, band_low=cfg.band_low, band_divisor=cfg.band_divisor
        )
    if model == pr.MODEL_FILTERED_VOTE:
        grid = _grid_for(cfg, store)
        return lambda doc: pr.predict_filtered_vote(
            doc, cons, store, grid, log_t, band_low=cfg.band_low, band_divisor=cfg.band_divisor
        )
    raise ConfigError(f"unknown model {model!r}, expected one of {', '.join(pr.MODEL_NAMES)}")


def cmd_train(cfg: Config) -> int:
    stats = IngestStats()
    corpus_hash = _file_sha256(cfg.train_corpus) if Path(cfg.train_corpus).exists() else ""
    posts = read_geotagged(cfg.train_corpus, stats)
    try:
        store = build_store(
            occurrences(posts),
            k=cfg.k,
            seed=cfg.seed,
            min_support=cfg.min_support,
            max_vocab=cfg.max_vocab,
            origin=cfg.origin,
            corpus_hash=corpus_hash,
            min_per_component=cfg.k_min_per_component,
            covariance_floor_km2=cfg.covariance_floor_km2,
            placeness_constant=cfg.placeness_constant,
        )
    except InsufficientSupportError as exc:
        raise DataInsufficiencyError(str(exc)) from exc
    save_store(store, cfg.model_store)
    print(f"trained {len(store)} word models from {stats.read} posts "
          f"({stats.skipped} lines skipped) -> {cfg.model_store}")
    return EXIT_OK


def cmd_mine(cfg: Config) -> int:
    store = load_store(cfg.model_store)
    gaz = _load_gaz(cfg)
    posts = read_geotagged(cfg.train_corpus)
    try:
        cons = cx.mine_constructions(
            posts,
            gaz,
            store,
            window_shapes=cfg.window_shapes,
            candidate_cap=cfg.candidate_cap,
            retain_cap=cfg.retain_cap,
            yield_log_placeness=cfg.yield_log_placeness,
        )
    except cx.NoAnchorsError as exc:
        raise DataInsufficiencyError(str(exc)) from exc
    cx.save_constructions(cons, cfg.constructions)
    print(f"retained {len(cons)} constructions -> {cfg.constructions}")
    return EXIT_OK


def cmd_predict(cfg: Config, model: str, input_path: str, output_path: str) -> int:
    predictor = _make_predictor(cfg, model, cfg.log_t)
    docs = _read_any_documents(input_path)
    rows = [(doc.id, predictor(doc)) for doc in docs]
    pr.write_prediction_dump(rows, output_path)
    n_located = sum(1 for _, p in rows if not p.abstained)
    print(f"predicted {n_located}/{len(rows)} documents with {model} -> {output_path}")
    return EXIT_OK


def _gold_by_id(path: str) -> dict[str, GeoPoint]:
    gold = {}
    for doc in read_labeled_documents(path):
        gold[doc.id] = doc.gold_location
    return gold


def cmd_evaluate(
    cfg: Config,
    predictions_path: Optional[str],
    gold_path: str,
    sweep: Optional[str],
    model: Optional[str],
    csv_out: Optional[str],
) -> int:
    if sweep:
        if not model:
            raise ConfigError("--sweep requires --model")
        thresholds = [float(t) for t in sweep.split(",") if t.strip()]
        docs = [d for d in read_labeled_documents(gold_path)]
        if not docs:
            raise DataInsufficiencyError(f"no gold-labeled documents in {gold_path}")
        results = ev.threshold_sweep(
            docs, lambda t: _make_predictor(cfg, model, t), thresholds, cfg.radius_km
        )
        rows = [(model, t, rep) for t, rep in results]
    else:
        if not predictions_path:
            raise ConfigError("either --predictions or --sweep is required")
        dump = pr.read_prediction_dump(predictions_path)
        gold = _gold_by_id(gold_path)
        pairs = []
        model_name = None
        for doc_id, pred in dump:
            if doc_id not in gold:
                raise ConfigError(f"prediction for unknown document id {doc_id!r}")
            model_name = pred.model_name
            pairs.append((pred, gold[doc_id]))
        if not pairs:
            raise DataInsufficiencyError(f"no predictions in {predictions_path}")
        rows = [(model_name or "unknown", cfg.log_t, ev.evaluate(pairs, cfg.radius_km))]
    print(ev.format_report_table(rows))
    if csv_out:
        Path(csv_out).write_text(ev.reports_to_csv(rows), encoding="utf-8")
        print(f"wrote {csv_out}")
    return EXIT_OK


def cmd_enrich(cfg: Config, input_path: str, output_path: str, model: str) -> int:
    predictor = _make_predictor(cfg, model, cfg.log_t)
    docs = read_documents(input_path)
    summary = pr.enrich(docs, predictor, output_path)
    print(f"located {summary.n_predicted}/{summary.n_docs} documents "
          f"(coverage {summary.coverage:.1%}) -> {output_path}")
    return EXIT_OK


def cmd_termmap(cfg: Config, input_path: str, terms: str, output_path: str) -> int:
    term_list = [t.strip().lower() for t in terms.split(",") if t.strip()]
    if not term_list:
        raise ConfigError("no terms given")
    docs = list(read_labeled_documents(input_path))
    store = load_store(cfg.model_store) if Path(cfg.model_store).exists() else None
    try:
        grid = _grid_for(cfg, store)
    except ConfigError:
        located = [d.gold_location for d in docs if d.gold_location is not None]
        if not located:
            raise DataInsufficiencyError("no located documents to derive a grid from") from None
        sw = GeoPoint(min(g.lat for g in located), min(g.lon for g in located))
        ne = GeoPoint(max(g.lat for g in located), max(g.lon for g in located))
        grid = Grid.from_bbox(sw, ne, cfg.grid_cell_km)
    table = ev.term_map(docs, term_list, grid)
    geojson = ev.term_map_geojson(table, grid)
    Path(output_path).write_text(
        json.dumps(geojson, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    total = sum(sum(counts.values()) for counts in table.values())
    print(f"counted {total} term occurrences over {grid.n_rows}x{grid.n_cols} cells -> {output_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoword",
        description="Learn geographic word models from geotagged posts and locate texts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", required=True, help="config file (key = value lines)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key")

    p_train = sub.add_parser("train", help="fit word models from the geotagged corpus")
    add_common(p_train)

    p_mine = sub.add_parser("mine", help="mine and rank slot constructions")
    add_common(p_mine)

    p_pred = sub.add_parser("predict", help="predict document locations")
    add_common(p_pred)
    p_pred.add_argument("--model", required=True, choices=pr.MODEL_NAMES)
    p_pred.add_argument("--input", required=True, help="documents file")
    p_pred.add_argument("--output", required=True, help="prediction dump file")

    p_eval = sub.add_parser("evaluate", help="score predictions against gold locations")
    add_common(p_eval)
    p_eval.add_argument("--predictions", help="prediction dump file")
    p_eval.add_argument("--gold", required=True, help="gold-labeled documents file")
    p_eval.add_argument("--sweep", help="comma-separated log_T values to sweep")
    p_eval.add_argument("--model", choices=pr.MODEL_NAMES, help="model for --sweep")
    p_eval.add_argument("--csv", dest="csv_out", help="write the machine CSV here")

    p_enrich = sub.add_parser("enrich", help="attach predicted locations to unlabeled documents")
    add_common(p_enrich)
    p_enrich.add_argument("--input", required=True, help="untagged documents file")
    p_enrich.add_argument("--output", required=True, help="enriched TSV output")
    p_enrich.add_argument("--model", default=pr.MODEL_FILTERED_CENTROID, choices=pr.MODEL_NAMES)

    p_tm = sub.add_parser("termmap", help="per-grid-cell term frequencies as GeoJSON")
    add_common(p_tm)
    p_tm.add_argument("--input", required=True, help="located documents file")
    p_tm.add_argument("--terms", required=True, help="comma-separated terms")
    p_tm.add_argument("--output", required=True, help="GeoJSON output path")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, tuple(args.overrides))
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "mine":
            return cmd_mine(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.model, args.input, args.output)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.predictions, args.gold, args.sweep,
                                args.model, args.csv_out)
        if args.command == "enrich":
            return cmd_enrich(cfg, args.input, args.output, args.model)
        if args.command == "termmap":
            return cmd_termmap(cfg, args.input, args.terms, args.output)
        raise ConfigError(f"unknown command {args.command!r}")
    except DataInsufficiencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, CorpusFormatError, StoreFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
