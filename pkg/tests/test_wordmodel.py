import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoword.corpus import TokenOccurrence
from geoword.geo import GeoPoint, PlanarPoint
from geoword.wordmodel import (
    GaussianComponent,
    InsufficientSupportError,
    ModelStore,
    StoreFormatError,
    StoreMeta,
    WordModel,
    build_store,
    fit_word,
    is_saturated,
    load_store,
    log_density_at_mean,
    placeness,
    save_store,
    word_seed,
)

LOG_2PI = math.log(2 * math.pi)


# ---------------------------------------------------------------------------
# synthetic-sampler oracle: draw points from known Gaussians, then check the
# fitter recovers them. Built before (and independent of) the fitter itself.
# ---------------------------------------------------------------------------

def sample_mixture(centers, sigmas, counts, seed):
    rng = np.random.default_rng(seed)
    pts = []
    for (cx, cy), sigma, n in zip(centers, sigmas, counts):
        xs = rng.normal(cx, sigma, n)
        ys = rng.normal(cy, sigma, n)
        pts.extend(PlanarPoint(float(x), float(y)) for x, y in zip(xs, ys))
    return pts


def nearest_center_distances(model, centers):
    """Greedy one-to-one matching of fitted means to true centers."""
    remaining = list(centers)
    dists = []
    for comp in model.components[: len(centers)]:
        best = min(remaining, key=lambda c: math.hypot(comp.mean.x - c[0], comp.mean.y - c[1]))
        dists.append(math.hypot(comp.mean.x - best[0], comp.mean.y - best[1]))
        remaining.remove(best)
    return dists


class TestFitWord:
    def test_recovers_three_separated_gaussians(self):
        centers = [(0.0, 0.0), (250.0, 0.0), (0.0, 300.0)]
        pts = sample_mixture(centers, [10.0] * 3, [100] * 3, seed=11)
        model = fit_word("ort", pts, k=3, seed=5)
        assert all(d < 5.0 for d in nearest_center_distances(model, centers))

    def test_single_gaussian_with_k3(self):
        pts = sample_mixture([(40.0, -70.0)], [10.0], [100], seed=3)
        model = fit_word("by", pts, k=3, seed=9)
        for comp in model.components:
            assert math.hypot(comp.mean.x - 40.0, comp.mean.y + 70.0) < 30.0  # 3 sigma

    def test_identical_positions_degenerate(self):
        q = PlanarPoint(12.5, -8.0)
        model = fit_word("punkt", [q] * 20, k=3, seed=0)
        for comp in model.components:
            assert comp.mean == q
            assert comp.covariance == ((1.0, 0.0), (0.0, 1.0))
        # weight is split across identical copies: same density as weight (1,0,0)
        assert sum(c.weight for c in model.components) == pytest.approx(1.0, abs=1e-12)
        assert model.placeness[1] == model.placeness[2] == 0.0
        assert model.placeness[0] > 0
        assert model.support == 20

    def test_too_few_positions(self):
        with pytest.raises(InsufficientSupportError):
            fit_word("fåtal", [PlanarPoint(0, 0)] * 5, k=3, seed=0)

    def test_component_count_reduced_on_small_support(self):
        # 12 points, 5 per component minimum: at most 2 real components
        pts = sample_mixture([(0, 0), (300, 0)], [5.0, 5.0], [6, 6], seed=2)
        model = fit_word("liten", pts, k=3, seed=4)
        assert model.placeness[2] == 0.0  # third slot is padding
        assert model.placeness[0] > 0 and model.placeness[1] > 0

    def test_em_loglikelihood_nondecreasing(self):
        pts = sample_mixture([(0, 0), (80, 40), (10, 200)], [15.0] * 3, [60] * 3, seed=8)
        model = fit_word("blandad", pts, k=3, seed=1)
        ll = model.em_log_likelihoods
        assert len(ll) >= 2
        for a, b in zip(ll, ll[1:]):
            assert b >= a - 1e-9 * max(1.0, abs(a))

    def test_weights_sum_to_one(self):
        pts = sample_mixture([(0, 0), (120, 10)], [20.0, 8.0], [50, 80], seed=6)
        model = fit_word("vikter", pts, k=3, seed=2)
        assert sum(c.weight for c in model.components) == pytest.approx(1.0, abs=1e-9)

    def test_covariance_floor(self):
        # near-duplicate points would collapse covariance without the floor
        pts = [PlanarPoint(0.001 * i, 0.0) for i in range(30)]
        model = fit_word("tät", pts, k=3, seed=7)
        for comp in model.components:
            cov = np.array(comp.covariance)
            assert np.linalg.eigvalsh(cov).min() >= 1.0 - 1e-9

    def test_deterministic_given_seed(self):
        pts = sample_mixture([(0, 0), (200, 100)], [12.0, 9.0], [70, 40], seed=20)
        a = fit_word("igen", pts, k=3, seed=33)
        b = fit_word("igen", pts, k=3, seed=33)
        assert a == b  # bit-identical floats

    def test_components_sorted_by_placeness(self):
        pts = sample_mixture([(0, 0), (300, 0), (0, 400)], [3.0, 30.0, 90.0], [80, 80, 80], seed=14)
        model = fit_word("sortering", pts, k=3, seed=5)
        assert model.placeness[0] >= model.placeness[1] >= model.placeness[2]


class TestLogDensityAtMean:
    def test_unit_density_gives_zero(self):
        c = GaussianComponent(
            mean=PlanarPoint(0, 0),
            covariance=((1 / (2 * math.pi), 0.0), (0.0, 1 / (2 * math.pi))),
            weight=1.0,
        )
        assert log_density_at_mean(c) == pytest.approx(0.0, abs=1e-12)

    def test_identity_covariance(self):
        c = GaussianComponent(mean=PlanarPoint(0, 0), covariance=((1.0, 0.0), (0.0, 1.0)), weight=1.0)
        assert log_density_at_mean(c) == pytest.approx(-LOG_2PI, abs=1e-12)
        assert log_density_at_mean(c) == pytest.approx(-1.8379, abs=1e-4)

    def test_weighted_wide_component(self):
        c = GaussianComponent(mean=PlanarPoint(3, -2), covariance=((4.0, 0.0), (0.0, 4.0)), weight=0.5)
        expected = math.log(0.5) - LOG_2PI - 0.5 * math.log(16.0)
        assert log_density_at_mean(c) == pytest.approx(expected, abs=1e-12)

    def test_against_numerical_quadrature(self):
        # independent check: integrate exp(-maha/2) for the normalizer, then
        # the weighted peak density is weight / Z
        from scipy.integrate import dblquad

        c = GaussianComponent(mean=PlanarPoint(3, -2), covariance=((4.0, 0.0), (0.0, 4.0)), weight=0.5)
        z_num, _ = dblquad(
            lambda y, x: math.exp(-0.5 * ((x * x) / 4.0 + (y * y) / 4.0)),
            -40, 40, lambda x: -40, lambda x: 40,
        )
        rho_oracle = math.log(c.weight) - math.log(z_num)
        assert log_density_at_mean(c) == pytest.approx(rho_oracle, abs=1e-8)

    def test_zero_weight_is_neg_inf(self):
        c = GaussianComponent(mean=PlanarPoint(0, 0), covariance=((1.0, 0.0), (0.0, 1.0)), weight=0.0)
        assert log_density_at_mean(c) == float("-inf")


class TestPlaceness:
    def test_reference_points(self):
        assert math.log(placeness(-100.0)) == pytest.approx(1.0, rel=1e-12)
        assert placeness(-100.0) == pytest.approx(math.e, rel=1e-12)
        assert math.log(placeness(-2.0)) == pytest.approx(50.0, rel=1e-12)
        assert math.log(placeness(-50.0 / 29.0)) == pytest.approx(58.0, rel=1e-12)

    @given(st.floats(min_value=-1e6, max_value=-0.2))
    @settings(max_examples=1000)
    def test_strictly_monotone(self, rho):
        # strict over the float-representable score range (log p <= 500 here)
        tighter = rho / 2.0  # closer to zero from below
        assert placeness(tighter) > placeness(rho)

    @given(st.floats(min_value=-1e6, max_value=-1e-12))
    @settings(max_examples=300)
    def test_weakly_monotone_everywhere(self, rho):
        # beyond the cap the score saturates instead of overflowing to inf
        assert placeness(rho / 2.0) >= placeness(rho)
        assert math.isfinite(placeness(rho))

    def test_saturation_clamp(self):
        assert is_saturated(0.0) and is_saturated(2.5)
        assert not is_saturated(-1e-9)
        assert placeness(0.0) == placeness(1e3) == placeness(-1e-6)
        assert math.isfinite(placeness(0.0))

    def test_configurable_constant(self):
        assert math.log(placeness(-10.0, constant=30.0)) == pytest.approx(3.0, rel=1e-12)


def make_occurrences(word_positions, origin=GeoPoint(62.0, 15.0)):
    """word -> list of planar km offsets, converted to geo occurrences."""
    from geoword.geo import unproject

    occs = []
    for word, offsets in word_positions.items():
        for i, (x, y) in enumerate(offsets):
            occs.append(
                TokenOccurrence(
                    token=word,
                    location=unproject(PlanarPoint(x, y), origin),
                    post_id=f"{word}-{i}",
                )
            )
    return occs


class TestBuildStore:
    origin = GeoPoint(62.0, 15.0)

    def test_single_word_identical_positions(self):
        occs = make_occurrences({"ort": [(10.0, 20.0)] * 20})
        store = build_store(occs, seed=0, origin=self.origin)
        assert len(store) == 1
        assert "ort" in store

    def test_below_min_support_absent(self):
        occs = make_occurrences({"vanlig": [(0.0, 0.0)] * 12, "sällsynt": [(5.0, 5.0)] * 9})
        store = build_store(occs, seed=0, origin=self.origin)
        assert "vanlig" in store and "sällsynt" not in store

    def test_independent_of_other_words(self):
        from geoword.geo import project

        rng = np.random.default_rng(44)
        a_pts = [(float(rng.normal(0, 8)), float(rng.normal(0, 8))) for _ in range(30)]
        b_pts = [(float(rng.normal(150, 4)), float(rng.normal(-60, 4))) for _ in range(25)]
        occs = make_occurrences({"aa": a_pts, "bb": b_pts})
        store = build_store(occs, seed=3, origin=self.origin)
        # oracle: fit each word alone from the same projected positions
        for word in ("aa", "bb"):
            pts = [project(o.location, self.origin) for o in occs if o.token == word]
            solo = fit_word(word, pts, 3, seed=word_seed(3, word))
            assert store[word] == solo

    def test_empty_stream(self):
        with pytest.raises(InsufficientSupportError):
            build_store([], seed=0)

    def test_vocab_cap_keeps_most_frequent(self):
        occs = make_occurrences({
            "stor": [(0.0, 0.0)] * 30,
            "mellan": [(10.0, 0.0)] * 20,
            "liten": [(20.0, 0.0)] * 10,
        })
        store = build_store(occs, seed=0, origin=self.origin, max_vocab=2)
        assert set(store.models) == {"stor", "mellan"}

    def test_derived_origin_is_bbox_midpoint(self):
        occs = [
            TokenOccurrence("x", GeoPoint(60.0, 14.0), "a"),
            TokenOccurrence("x", GeoPoint(64.0, 18.0), "b"),
        ] * 5
        store = build_store(occs, seed=0, min_support=10)
        assert store.origin == GeoPoint(62.0, 16.0)


class TestStoreRoundTrip:
    def make_store(self):
        occs = make_occurrences({
            "norrort": [(0.0, 200.0 + 0.5 * i) for i in range(20)],
            "söderort": [(-30.0, -150.0 - 0.3 * i) for i in range(15)],
        })
        return build_store(occs, seed=7, origin=GeoPoint(62.0, 15.0), corpus_hash="abc123")

    def test_round_trip_equal(self, tmp_path):
        store = self.make_store()
        path = tmp_path / "store.gw"
        save_store(store, path)
        assert load_store(path) == store

    def test_round_trip_bit_exact_floats(self, tmp_path):
        store = self.make_store()
        path = tmp_path / "store.gw"
        save_store(store, path)
        loaded = load_store(path)
        for word, model in store.models.items():
            other = loaded[word]
            for c1, c2 in zip(model.components, other.components):
                assert c1.mean.x.hex() == c2.mean.x.hex()
                assert c1.covariance == c2.covariance
                assert c1.weight.hex() == c2.weight.hex()
            assert all(a.hex() == b.hex() for a, b in zip(model.placeness, other.placeness))

    def test_truncated_file(self, tmp_path):
        store = self.make_store()
        path = tmp_path / "store.gw"
        save_store(store, path)
        data = path.read_text(encoding="utf-8")
        path.write_text(data[: len(data) // 2], encoding="utf-8")
        with pytest.raises(StoreFormatError):
            load_store(path)

    def test_version_mismatch(self, tmp_path):
        store = self.make_store()
        path = tmp_path / "store.gw"
        save_store(store, path)
        data = path.read_text(encoding="utf-8").splitlines()
        data[0] = "geoword-store 999"
        path.write_text("\n".join(data) + "\n", encoding="utf-8")
        with pytest.raises(StoreFormatError, match="version"):
            load_store(path)

    def test_not_a_store(self, tmp_path):
        path = tmp_path / "junk.gw"
        path.write_text("hejsan\n", encoding="utf-8")
        with pytest.raises(StoreFormatError):
            load_store(path)

    def test_saturated_flag_preserved(self, tmp_path):
        comp = GaussianComponent(
            mean=PlanarPoint(0.0, 0.0), covariance=((0.01, 0.0), (0.0, 0.01)), weight=1.0 / 3
        )
        model = WordModel(
            word="mättad",
            components=(comp, comp, comp),
            placeness=(placeness(0.0), 0.0, 0.0),
            support=10,
            saturated=True,
        )
        store = ModelStore(models={"mättad": model}, origin=GeoPoint(62, 15), meta=StoreMeta(seed=0))
        path = tmp_path / "store.gw"
        save_store(store, path)
        assert load_store(path)["mättad"].saturated is True

    def test_missing_file(self, tmp_path):
        with pytest.raises(StoreFormatError):
            load_store(tmp_path / "ingen.gw")


class TestWordModelInvariants:
    def test_weights_must_sum_to_one(self):
        comp = GaussianComponent(PlanarPoint(0, 0), ((1.0, 0.0), (0.0, 1.0)), 0.2)
        with pytest.raises(ValueError, match="sum"):
            WordModel("fel", (comp, comp, comp), (1.0, 1.0, 1.0), support=10)

    def test_placeness_must_be_sorted(self):
        comp = GaussianComponent(PlanarPoint(0, 0), ((1.0, 0.0), (0.0, 1.0)), 1.0 / 3)
        with pytest.raises(ValueError, match="descending"):
            WordModel("fel", (comp, comp, comp), (1.0, 2.0, 3.0), support=10)

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            GaussianComponent(PlanarPoint(0, 0), ((1.0, 0.2), (0.3, 1.0)), 1.0)

    def test_non_positive_definite_rejected(self):
        with pytest.raises(ValueError, match="positive definite"):
            GaussianComponent(PlanarPoint(0, 0), ((1.0, 2.0), (2.0, 1.0)), 1.0)
