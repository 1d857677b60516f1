import numpy as np
import pytest

from insightminer.errors import InsightError
from insightminer.features import (
    FeatureVector,
    Standardization,
    Vocabulary,
    build_vocabulary,
    featurize,
    fit_standardization,
    pca_project,
)
from insightminer.schema_model import parse_bundle


class TestVocabulary:
    def test_sorted_required(self):
        with pytest.raises(InsightError):
            Vocabulary(("b", "a"))
        with pytest.raises(InsightError):
            Vocabulary(("a", "a"))

    def test_build_from_bundle(self, tiny_bundle_dir):
        bundle = parse_bundle(tiny_bundle_dir)
        vocab = build_vocabulary(bundle)
        assert vocab.tokens == ("c_mon", "c_other", "duration", "s1")
        assert vocab.index == {"c_mon": 0, "c_other": 1, "duration": 2, "s1": 3}

    def test_fingerprint_changes_with_tokens(self):
        assert Vocabulary(("a", "b")).fingerprint() != Vocabulary(("a", "c")).fingerprint()
        assert len(Vocabulary(("a",)).fingerprint()) == 16


class TestStandardization:
    def test_fit_and_apply(self):
        std = fit_standardization({"m": [1.0, 3.0]})
        mu, sigma = std.params["m"]
        assert mu == 2.0
        assert sigma == 1.0
        assert std.apply("m", 3.0) == 1.0

    def test_zero_sigma_guard(self):
        std = fit_standardization({"m": [5.0, 5.0]})
        assert std.params["m"] == (5.0, 1.0)

    def test_unknown_measurement_is_identity(self):
        assert Standardization({}).apply("ghost", 7.0) == 7.0

    def test_round_trip(self):
        std = fit_standardization({"a": [1.0, 2.0], "b": [0.0, 4.0]})
        assert Standardization.from_dict(std.to_dict()).params == std.params


class TestFeaturize:
    def test_bosw_and_scalars(self, tiny_bundle_dir):
        bundle = parse_bundle(tiny_bundle_dir)
        vocab = build_vocabulary(bundle)
        std = fit_standardization({"duration": [2.0, 4.0]})
        fv = featurize(
            "cid0000000000000", "s1", "duration", "c_mon", "c_other",
            raw_mean1=4.0, raw_mean2=2.0, aligned_delta=2.0, tau=0.5,
            vocab=vocab, standardization=std,
        )
        assert fv.bosw == (1, 1, 1, 1)
        assert fv.mean1 == 1.0 and fv.mean2 == -1.0
        assert fv.delta_norm == 4.0
        assert FeatureVector.from_dict(fv.to_dict()) == fv

    def test_unknown_token_rejected(self, tiny_bundle_dir):
        bundle = parse_bundle(tiny_bundle_dir)
        vocab = build_vocabulary(bundle)
        with pytest.raises(InsightError, match="not in vocabulary"):
            featurize(
                "cid", "s1", "duration", "ghost", "c_other",
                1.0, 2.0, 1.0, 1.0, vocab, Standardization({}),
            )


class TestPca:
    def test_orthonormal_components(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 7))
        _, comps, _ = pca_project(x, dims=2)
        gram = comps @ comps.T
        assert np.allclose(gram, np.eye(2), atol=1e-9)

    def test_matches_numpy_eigh_oracle_up_to_sign(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(30, 6)) * rng.uniform(0.5, 3.0, size=6)
            proj, comps, explained = pca_project(x, dims=2)
            centered = x - x.mean(axis=0)
            cov = centered.T @ centered / (x.shape[0] - 1)
            w, v = np.linalg.eigh(cov)
            order = np.argsort(w)[::-1][:2]
            for i, j in enumerate(order):
                ref = v[:, j]
                assert min(
                    np.max(np.abs(comps[i] - ref)), np.max(np.abs(comps[i] + ref))
                ) < 1e-6
                assert explained[i] == pytest.approx(w[j] / np.trace(cov), abs=1e-9)

    def test_known_plane(self):
        # points on the x-y plane embedded in 3-D: explained variance sums to 1
        rng = np.random.default_rng(4)
        base = rng.normal(size=(50, 2))
        x = np.hstack([base * [3.0, 1.0], np.zeros((50, 1))])
        proj, comps, explained = pca_project(x, dims=2)
        assert explained.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(comps[:, 2], 0.0, atol=1e-9)

    def test_sign_convention(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(25, 5))
        _, comps, _ = pca_project(x, dims=2)
        for row in comps:
            assert row[int(np.argmax(np.abs(row)))] > 0

    def test_projection_reconstruction(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 4))
        proj, comps, _ = pca_project(x, dims=2)
        centered = x - x.mean(axis=0)
        assert np.allclose(proj, centered @ comps.T, atol=1e-12)

    def test_too_few_vectors(self):
        with pytest.raises(InsightError):
            pca_project(np.zeros((1, 3)))
