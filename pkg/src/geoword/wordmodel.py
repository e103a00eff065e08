"""Per-word geographic mixture models and the placeness score.

Every word observed often enough gets a mixture of (up to) three 2-D
Gaussians over planar km coordinates, so that a word used in several
distinct places can contribute to all of them. The placeness of a
component is derived from its peak log density: a word whose usage piles
up in one tight spot scores high, a word spread over the whole map scores
low.

The model store persists bit-exact: floats are serialized as hex.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import TokenOccurrence
from .geo import GeoPoint, PlanarPoint, ProjectionRangeError, project

LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_K = 3
DEFAULT_MIN_SUPPORT = 10
DEFAULT_MIN_PER_COMPONENT = 5
DEFAULT_COVARIANCE_FLOOR_KM2 = 1.0
DEFAULT_PLACENESS_CONSTANT = 100.0
DEFAULT_MAX_VOCAB = 500_000

# exp() saturates IEEE doubles just above 709; placeness of a clamped
# (saturated) component is capped here instead of overflowing to inf
_MAX_LOG_PLACENESS = 700.0
_SATURATION_EPS = 1e-6

STORE_MAGIC = "geoword-store"
STORE_VERSION = 1


class InsufficientSupportError(ValueError):
    """Too few occurrence positions to fit a word model."""


class StoreFormatError(ValueError):
    """Model store file is corrupt, truncated, or has the wrong version."""


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted 2-D Gaussian in planar km coordinates."""

    mean: PlanarPoint
    covariance: tuple[tuple[float, float], tuple[float, float]]  # km^2, symmetric PD
    weight: float

    def __post_init__(self) -> None:
        (xx, xy), (yx, yy) = self.covariance
        if xy != yx:
            raise ValueError("covariance must be symmetric")
        if xx <= 0 or xx * yy - xy * xy <= 0:
            raise ValueError("covariance must be positive definite")
        if not -1e-12 <= self.weight <= 1.0 + 1e-12:
            raise ValueError(f"weight {self.weight} outside [0, 1]")

    def covariance_det(self) -> float:
        (xx, xy), (_, yy) = self.covariance
        return xx * yy - xy * xy


def log_density_at_mean(c: GaussianComponent) -> float:
    """Log of the component's weighted density at its own mean.

    Includes the mixing weight, so a minor side component of a word cannot
    out-score its dominant peak.
    """
    if c.weight <= 0.0:
        return float("-inf")
    return math.log(c.weight) - LOG_2PI - 0.5 * math.log(c.covariance_det())


def placeness(rho: float, constant: float = DEFAULT_PLACENESS_CONSTANT) -> float:
    """Dimensionless placeness score exp(constant / -rho) for rho < 0.

    Strictly increasing as rho approaches zero from below: the tighter and
    heavier the density peak, the larger the score. rho >= 0 is clamped to
    a small negative value (see is_saturated); the resulting score is
    capped to stay inside float range.
    """
    if rho >= 0.0:
        rho = -_SATURATION_EPS
    return math.exp(min(constant / -rho, _MAX_LOG_PLACENESS))


def is_saturated(rho: float) -> bool:
    """True when rho had to be clamped for the placeness transform."""
    return rho >= 0.0


@dataclass(frozen=True)
class WordModel:
    """A word's fitted mixture: exactly 3 component slots.

    Components are ordered by descending placeness. When fewer components
    were fitted than slots, the remaining slots hold copies of the
    strongest component with its weight split among the copies (the
    mixture density is unchanged) and zero placeness, so padded slots
    never contribute to predictions.
    """

    word: str
    components: tuple[GaussianComponent, GaussianComponent, GaussianComponent]
    placeness: tuple[float, float, float]
    support: int
    saturated: bool = False
    em_log_likelihoods: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.components) != 3 or len(self.placeness) != 3:
            raise ValueError("a word model has exactly 3 component slots")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {total}, expected 1")
        if any(a < b for a, b in zip(self.placeness, self.placeness[1:])):
            raise ValueError("placeness vector must be sorted descending")
        if self.support < 1:
            raise ValueError("support must be positive")

    @property
    def max_log_placeness(self) -> float:
        return math.log(self.placeness[0]) if self.placeness[0] > 0 else float("-inf")

    def total_placeness(self) -> float:
        return sum(self.placeness)


def _kmeans_pp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Spread k initial centers over the data, D^2-weighted."""
    n = X.shape[0]
    centers = np.empty((k, 2))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j:] = centers[j - 1]
            break
        centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _floor_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    """Clamp eigenvalues from below; this is the constrained M-step optimum."""
    cov = (cov + cov.T) / 2.0
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.maximum(eigval, floor)
    cov = (eigvec * eigval) @ eigvec.T
    return (cov + cov.T) / 2.0


def _log_gauss(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    det = a * c - b * b
    dx = X - mean
    maha = (c * dx[:, 0] ** 2 - 2.0 * b * dx[:, 0] * dx[:, 1] + a * dx[:, 1] ** 2) / det
    return -LOG_2PI - 0.5 * np.log(det) - 0.5 * maha


def _em_fit(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    floor: float,
    max_iter: int,
    tol_per_point: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """EM for a k-component 2-D Gaussian mixture with eigenvalue-floored
    covariances. Returns (weights, means, covs, per-iteration log-likelihoods).
    """
    n = X.shape[0]
    means = _kmeans_pp_centers(X, k, rng)
    base_cov = _floor_covariance(np.cov(X.T) if n > 1 else np.zeros((2, 2)), floor)
    covs = np.array([base_cov] * k)
    weights = np.full(k, 1.0 / k)

    ll_trace: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E-step
        log_p = np.empty((n, k))
        for j in range(k):
            if weights[j] > 0.0:
                log_p[:, j] = math.log(weights[j]) + _log_gauss(X, means[j], covs[j])
            else:
                log_p[:, j] = -np.inf
        row_max = log_p.max(axis=1)
        log_norm = row_max + np.log(np.exp(log_p - row_max[:, None]).sum(axis=1))
        ll = float(log_norm.sum())
        assert ll >= prev_ll - 1e-9 * max(1.0, abs(prev_ll)), "EM log-likelihood decreased"
        ll_trace.append(ll)
        converged = ll - prev_ll < tol_per_point * n
        prev_ll = ll
        if converged:
            break

        resp = np.exp(log_p - log_norm[:, None])
        # M-step
        nk = resp.sum(axis=0)
        for j in range(k):
            if nk[j] <= 0.0:
                weights[j] = 0.0
                continue
            means[j] = resp[:, j] @ X / nk[j]
            dx = X - means[j]
            covs[j] = _floor_covariance((resp[:, j] * dx.T) @ dx / nk[j], floor)
            weights[j] = nk[j] / n
        total_w = weights.sum()
        if total_w > 0:
            weights = weights / total_w
    return weights, means, covs, ll_trace


def fit_word(
    word: str,
    positions: Sequence[PlanarPoint],
    k: int = DEFAULT_K,
    seed: int = 0,
    *,
    min_support: int = DEFAULT_MIN_SUPPORT,
    min_per_component: int = DEFAULT_MIN_PER_COMPONENT,
    covariance_floor_km2: float = DEFAULT_COVARIANCE_FLOOR_KM2,
    max_iter: int = 200,
    tol_per_point: float = 1e-6,
    placeness_constant: float = DEFAULT_PLACENESS_CONSTANT,
) -> WordModel:
    """Fit a word's mixture from its occurrence positions.

    The requested component count is reduced when there are too few points
    (fewer than min_per_component each) or too few distinct positions; the
    result is padded back to 3 slots (see WordModel). Deterministic for a
    given seed.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    n = len(positions)
    if n < min_support:
        raise InsufficientSupportError(f"{word!r}: {n} positions < min support {min_support}")

    X = np.array([(p.x, p.y) for p in positions], dtype=np.float64)
    n_distinct = len(np.unique(X, axis=0))
    k_eff = max(1, min(k, n // min_per_component, n_distinct))

    rng = np.random.default_rng(seed)
    weights, means, covs, ll_trace = _em_fit(
        X, k_eff, rng, covariance_floor_km2, max_iter, tol_per_point
    )

    fitted = []
    for j in range(k_eff):
        comp = GaussianComponent(
            mean=PlanarPoint(float(means[j, 0]), float(means[j, 1])),
            covariance=(
                (float(covs[j, 0, 0]), float(covs[j, 0, 1])),
                (float(covs[j, 1, 0]), float(covs[j, 1, 1])),
            ),
            weight=float(weights[j]),
        )
        rho = log_density_at_mean(comp)
        fitted.append((comp, rho, placeness(rho, placeness_constant)))

    fitted.sort(key=lambda t: (-t[2], -t[0].weight))
    saturated = any(is_saturated(rho) for _, rho, _ in fitted if rho != float("-inf"))

    comps = [t[0] for t in fitted]
    scores = [t[2] for t in fitted]
    n_pad = 3 - k_eff
    if n_pad:
        strongest = comps[0]
        split_w = strongest.weight / (n_pad + 1)
        comps[0] = GaussianComponent(strongest.mean, strongest.covariance, split_w)
        for _ in range(n_pad):
            comps.append(GaussianComponent(strongest.mean, strongest.covariance, split_w))
            scores.append(0.0)

    return WordModel(
        word=word,
        components=(comps[0], comps[1], comps[2]),
        placeness=(scores[0], scores[1], scores[2]),
        support=n,
        saturated=saturated,
        em_log_likelihoods=tuple(ll_trace),
    )


@dataclass(frozen=True)
class StoreMeta:
    seed: int
    corpus_hash: str = ""
    version: int = STORE_VERSION
    created: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True)
class ModelStore:
    """All fitted word models sharing one projection origin."""

    models: dict[str, WordModel]
    origin: GeoPoint
    meta: StoreMeta

    def __contains__(self, word: str) -> bool:
        return word in self.models

    def __getitem__(self, word: str) -> WordModel:
        return self.models[word]

    def __len__(self) -> int:
        return len(self.models)

    def get(self, word: str) -> Optional[WordModel]:
        return self.models.get(word)


def word_seed(seed: int, word: str) -> int:
    """Stable per-word RNG seed derived from the global seed."""
    digest = hashlib.sha256(f"{seed}:{word}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_store(
    occurrences: Iterable[TokenOccurrence],
    *,
    k: int = DEFAULT_K,
    seed: int = 0,
    min_support: int = DEFAULT_MIN_SUPPORT,
    max_vocab: int = DEFAULT_MAX_VOCAB,
    origin: Optional[GeoPoint] = None,
    corpus_hash: str = "",
    min_per_component: int = DEFAULT_MIN_PER_COMPONENT,
    covariance_floor_km2: float = DEFAULT_COVARIANCE_FLOOR_KM2,
    placeness_constant: float = DEFAULT_PLACENESS_CONSTANT,
) -> ModelStore:
    """Fit one WordModel per word meeting min_support, under a vocab cap.

    The projection origin defaults to the midpoint of the occurrences'
    bounding box. Occurrence positions beyond the projection range of the
    origin are dropped. Word fits are independent (per-word derived seeds),
    so the store is reproducible and words may be fitted in any order.
    """
    by_word: dict[str, list[GeoPoint]] = {}
    lat_min = lon_min = math.inf
    lat_max = lon_max = -math.inf
    for occ in occurrences:
        by_word.setdefault(occ.token, []).append(occ.location)
        lat_min = min(lat_min, occ.location.lat)
        lat_max = max(lat_max, occ.location.lat)
        lon_min = min(lon_min, occ.location.lon)
        lon_max = max(lon_max, occ.location.lon)
    if not by_word:
        raise InsufficientSupportError("empty occurrence stream")

    if origin is None:
        origin = GeoPoint((lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0)

    vocab = sorted(by_word, key=lambda w: (-len(by_word[w]), w))[:max_vocab]

    models: dict[str, WordModel] = {}
    for word in sorted(vocab):
        locs = by_word[word]
        if len(locs) < min_support:
            continue
        pts = []
        for loc in locs:
            try:
                pts.append(project(loc, origin))
            except ProjectionRangeError:
                continue
        if len(pts) < min_support:
            continue
        models[word] = fit_word(
            word,
            pts,
            k,
            seed=word_seed(seed, word),
            min_support=min_support,
            min_per_component=min_per_component,
            covariance_floor_km2=covariance_floor_km2,
            placeness_constant=placeness_constant,
        )
    return ModelStore(models=models, origin=origin, meta=StoreMeta(seed=seed, corpus_hash=corpus_hash))


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(s: str) -> float:
    return float.fromhex(s)


def _model_record(m: WordModel) -> dict:
    return {
        "word": m.word,
        "support": m.support,
        "saturated": m.saturated,
        "placeness": [_hex(p) for p in m.placeness],
        "components": [
            {
                "mean": [_hex(c.mean.x), _hex(c.mean.y)],
                "cov": [_hex(c.covariance[0][0]), _hex(c.covariance[0][1]), _hex(c.covariance[1][1])],
                "weight": _hex(c.weight),
            }
            for c in m.components
        ],
    }


def _model_from_record(rec: dict) -> WordModel:
    comps = []
    for c in rec["components"]:
        xx, xy, yy = (_unhex(v) for v in c["cov"])
        comps.append(
            GaussianComponent(
                mean=PlanarPoint(_unhex(c["mean"][0]), _unhex(c["mean"][1])),
                covariance=((xx, xy), (xy, yy)),
                weight=_unhex(c["weight"]),
            )
        )
    scores = tuple(_unhex(p) for p in rec["placeness"])
    return WordModel(
        word=rec["word"],
        components=(comps[0], comps[1], comps[2]),
        placeness=(scores[0], scores[1], scores[2]),
        support=int(rec["support"]),
        saturated=bool(rec["saturated"]),
    )


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def save_store(store: ModelStore, path: str | Path) -> None:
    """Write the store; floats round-trip bit-exact (hex encoding)."""
    path = Path(path)
    lines = [f"{STORE_MAGIC} {store.meta.version}"]
    header = {
        "origin_lat": _hex(store.origin.lat),
        "origin_lon": _hex(store.origin.lon),
        "seed": store.meta.seed,
        "corpus_hash": store.meta.corpus_hash,
        "n_words": len(store.models),
    }
    lines.append(_dumps(header))
    for word in sorted(store.models):
        lines.append(_dumps(_model_record(store.models[word])))
    body = "\n".join(lines)
    checksum = hashlib.sha256(body.encode("utf-8")).hexdigest()
    path.write_text(body + f"\nend {checksum}\n", encoding="utf-8")


def load_store(path: str | Path) -> ModelStore:
    """Read a store written by save_store, verifying version and checksum."""
    path = Path(path)
    if not path.exists():
        raise StoreFormatError(f"model store not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(STORE_MAGIC):
        raise StoreFormatError(f"{path}: not a model store")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise StoreFormatError(f"{path}: unreadable version header") from None
    if version != STORE_VERSION:
        raise StoreFormatError(f"{path}: store version {version}, expected {STORE_VERSION}")
    if len(lines) < 3 or not lines[-1].startswith("end "):
        raise StoreFormatError(f"{path}: truncated store (missing checksum footer)")
    body = "\n".join(lines[:-1])
    checksum = lines[-1].split(" ", 1)[1]
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != checksum:
        raise StoreFormatError(f"{path}: checksum mismatch, file corrupt")
    try:
        header = json.loads(lines[1])
        origin = GeoPoint(_unhex(header["origin_lat"]), _unhex(header["origin_lon"]))
        n_words = int(header["n_words"])
        records = [json.loads(ln) for ln in lines[2:-1]]
        models = {rec["word"]: _model_from_record(rec) for rec in records}
    except (KeyError, ValueError, IndexError) as exc:
        raise StoreFormatError(f"{path}: malformed store record ({exc})") from None
    if len(models) != n_words:
        raise StoreFormatError(f"{path}: expected {n_words} words, found {len(models)}")
    meta = StoreMeta(seed=int(header["seed"]), corpus_hash=header["corpus_hash"], version=version)
    return ModelStore(models=models, origin=origin, meta=meta)
