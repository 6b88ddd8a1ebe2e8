import numpy as np
import pytest
from sklearn.base import clone

from fedadapt import FederatedAdapterClassifier, generate_synthetic_suite, predict
from fedadapt.errors import ConfigError


@pytest.fixture(scope="module")
def suite():
    return generate_synthetic_suite(4, 60, 8, 3, 0.5, seed=0)


class TestSklearnContract:
    def test_get_params(self):
        est = FederatedAdapterClassifier(lr=1e-3, rounds=5)
        params = est.get_params()
        assert params["lr"] == 1e-3
        assert params["rounds"] == 5
        assert params["algorithm"] == "fedclip"

    def test_set_params_and_clone(self):
        est = FederatedAdapterClassifier().set_params(mu=0.3, seed=4)
        assert est.mu == 0.3
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        with pytest.raises(ConfigError):
            FederatedAdapterClassifier().predict(np.zeros((1, 8)))


class TestFitPredict:
    def test_fit_predict_score(self, suite):
        est = FederatedAdapterClassifier(rounds=3, lr=2e-3, batch_size=8, seed=0)
        est.fit(suite[1:])
        target = suite[0]
        pred = est.predict(target.features)
        assert pred.shape == (target.n_samples,)
        assert set(np.unique(pred)) <= set(range(3))
        score = est.score(target.features, target.labels)
        assert 0.0 <= score <= 1.0
        assert est.n_features_in_ == 8
        assert np.array_equal(est.classes_, np.arange(3))

    def test_fit_is_deterministic(self, suite):
        a = FederatedAdapterClassifier(rounds=2, seed=1).fit(suite[1:])
        b = FederatedAdapterClassifier(rounds=2, seed=1).fit(suite[1:])
        target = suite[0]
        assert np.array_equal(a.predict(target.features), b.predict(target.features))

    def test_zero_shot_mode(self, suite):
        est = FederatedAdapterClassifier(algorithm="zero-shot").fit(suite[1:])
        target = suite[0]
        expected = predict(None, target.features, target.class_text_features)
        assert np.array_equal(est.predict(target.features), expected)
        assert np.array_equal(est.transform(target.features), target.features)

    def test_transform_shapes(self, suite):
        est = FederatedAdapterClassifier(rounds=2, seed=0).fit(suite[1:])
        out = est.transform(suite[0].features)
        assert out.shape == suite[0].features.shape

    def test_local_only_rejected(self, suite):
        with pytest.raises(ConfigError):
            FederatedAdapterClassifier(algorithm="local-only").fit(suite[1:])

    def test_wrong_width_rejected(self, suite):
        est = FederatedAdapterClassifier(rounds=1, seed=0).fit(suite[1:])
        with pytest.raises(ConfigError):
            est.predict(np.zeros((2, 5)))
