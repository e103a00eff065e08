"""Geographic word models and text geolocation.

Learns per-word 2-D Gaussian mixtures from geotagged posts, scores words
for placeness, filters texts to locationally indicative vocabulary via
mined constructions, and predicts document locations by weighted centroid
or grid vote.
"""

from .geo import GeoPoint, Grid, PlanarPoint, haversine, project, unproject
from .corpus import Document, Post, TokenOccurrence, occurrences, read_geotagged, tokenize
from .gazetteer import GazetteerEntry, gazetteer_hits, load_gazetteer
from .wordmodel import (
    GaussianComponent,
    ModelStore,
    WordModel,
    build_store,
    fit_word,
    load_store,
    log_density_at_mean,
    placeness,
    save_store,
)
from .constructions import (
    SLOT,
    Construction,
    FilterLexicon,
    extract_candidates,
    filter_document,
    frequency_filter,
    mine_constructions,
)
from .predict import (
    Prediction,
    centroid,
    enrich,
    grid_vote,
    predict_filtered_centroid,
    predict_filtered_vote,
    predict_gazetteer,
    predict_total,
)
from .evaluation import EvalReport, evaluate, term_map, threshold_sweep

__version__ = "0.1.0"
