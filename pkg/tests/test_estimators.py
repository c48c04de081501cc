import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sketchmatch.estimators import MlffClassifier, SketchRecognizer
from sketchmatch.model_io import load_weights, tensor_checksums
from sketchmatch.synthetic import make_pairs


class TestMlffClassifier:
    def test_separable_blobs(self):
        rng = np.random.default_rng(0)
        centers = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
        y = np.repeat(["a", "b", "c"], 20)
        X = centers[np.repeat(np.arange(3), 20)] + 0.3 * rng.standard_normal((60, 2))
        clf = MlffClassifier(hidden_layer_sizes=(8,), max_iter=150).fit(X, y)
        assert clf.score(X, y) == 1.0
        assert clf.loss_curve_[-1] < clf.loss_curve_[0]
        np.testing.assert_allclose(clf.predict_proba(X).sum(axis=1), 1.0, atol=1e-12)
        assert set(clf.predict(X)) <= {"a", "b", "c"}

    def test_params_and_clone(self):
        clf = MlffClassifier(hidden_layer_sizes=(3, 2), lr=0.5)
        assert clf.get_params() == {"hidden_layer_sizes": (3, 2), "lr": 0.5, "max_iter": 200, "random_state": 0}
        assert clone(clf).get_params() == clf.get_params()

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            MlffClassifier().predict(np.zeros((1, 2)))

    def test_reproducible(self):
        X = np.random.default_rng(0).standard_normal((10, 3))
        y = np.arange(10) % 2
        a = MlffClassifier(max_iter=5).fit(X, y).predict_proba(X)
        b = MlffClassifier(max_iter=5).fit(X, y).predict_proba(X)
        assert a.tobytes() == b.tobytes()


@pytest.fixture(scope="module")
def fitted():
    p, s, ids, _ = make_pairs(3, 2, size=32, seed=0)
    X = np.concatenate([p, s], axis=1)
    est = SketchRecognizer(image_size=32, max_steps=3, batch_size=6, warmup_steps=0).fit(X, ids)
    return est, p, s, ids


class TestSketchRecognizer:
    def test_config_mirrors_params(self):
        est = SketchRecognizer(lr=0.003, seed=4)
        c = est.to_config()
        assert (c.lr, c.seed, c.gen_channels) == (0.003, 4, (4, 8, 16, 32))
        assert clone(est).get_params() == est.get_params()

    def test_fit_enrolls_first_photo_per_identity(self, fitted):
        est = fitted[0]
        assert est.classes_.tolist() == [0, 1, 2]
        assert len(est.metrics_) == 3

    def test_transform_shape(self, fitted):
        est, p, _, _ = fitted
        out = est.transform(p[:, 0])
        assert out.shape == (6, 32, 32) and 0 <= out.min() and out.max() <= 1

    def test_predict_returns_gallery_labels(self, fitted):
        est, _, s, ids = fitted
        pred = est.predict(s)
        assert pred.shape == (6,) and set(pred.tolist()) <= {0, 1, 2}
        assert est.score(s, ids) == np.mean(pred == ids)

    def test_rank_lists_every_identity(self, fitted):
        est, _, s, ids = fitted
        results = est.rank(s[:2], ids[:2])
        assert all(len(r.ranked) == 3 and r.true_rank is not None for r in results)

    def test_save(self, fitted, tmp_path):
        est = fitted[0]
        est.save(tmp_path / "m.fsrw")
        assert tensor_checksums(load_weights(tmp_path / "m.fsrw")) == tensor_checksums(est.models_.params())

    def test_bad_input_shape(self):
        with pytest.raises(ValueError, match="pairs"):
            SketchRecognizer().fit(np.zeros((2, 1, 32, 32)), [0, 1])

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            SketchRecognizer().transform(np.zeros((1, 32, 32)))
