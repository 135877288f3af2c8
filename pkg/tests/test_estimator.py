import numpy as np
import pytest

from b2bopt import BregmanNMF, NotFittedError, generate_synthetic


@pytest.fixture()
def data():
    A, _, _ = generate_synthetic(20, 12, 3, noise_level=0.05, seed=0)
    return A


class TestParams:
    def test_get_params_roundtrip(self):
        est = BregmanNMF(n_components=4, algorithm="rb2b", tol=1e-5)
        params = est.get_params()
        assert params["n_components"] == 4
        assert params["algorithm"] == "rb2b"
        clone = BregmanNMF(**params)
        assert clone.get_params() == params

    def test_set_params_chains(self):
        est = BregmanNMF().set_params(n_components=5, max_iter=10)
        assert est.n_components == 5 and est.max_iter == 10

    def test_set_params_rejects_unknown(self):
        with pytest.raises(ValueError, match="invalid parameter"):
            BregmanNMF().set_params(gamma=1.0)

    def test_repr_mentions_params(self):
        assert "algorithm='gb2b'" in repr(BregmanNMF(algorithm="gb2b"))

    def test_sklearn_clone_compatible(self):
        sklearn = pytest.importorskip("sklearn")
        from sklearn.base import clone

        est = BregmanNMF(n_components=3, tol=1e-3)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()


class TestFit:
    def test_fit_transform_shapes(self, data):
        est = BregmanNMF(n_components=3, tol=1e-3, max_iter=200, random_state=1)
        W = est.fit_transform(data)
        assert W.shape == (20, 3)
        assert est.components_.shape == (3, 12)
        assert np.all(W >= 0) and np.all(est.components_ >= 0)
        assert est.n_iter_ >= 1

    def test_reconstruction_error_reported(self, data):
        est = BregmanNMF(n_components=3, tol=1e-4, max_iter=300, random_state=1).fit(data)
        W = est.transform(data)
        direct = np.linalg.norm(data - W @ est.components_)
        assert est.reconstruction_err_ == pytest.approx(
            np.linalg.norm(data - est.fit_transform(data) @ est.components_), rel=1e-6)
        assert direct <= 1.2 * est.reconstruction_err_ + 1e-8

    def test_fit_improves_over_initial(self, data):
        est = BregmanNMF(n_components=3, tol=1e-5, max_iter=100, random_state=2).fit(data)
        trace = est.trace_
        assert trace.final_objective < 0.1 * trace.records[0].objective

    def test_algorithms_all_supported(self, data):
        for algo in ("gb2b", "rb2b", "cbbcd", "b2b-ls"):
            est = BregmanNMF(n_components=2, algorithm=algo, tol=1e-2,
                             max_iter=60, random_state=0).fit(data)
            assert est.components_.shape == (2, 12)

    def test_rejects_negative_input(self):
        X = np.array([[1.0, -1.0], [0.5, 2.0]])
        with pytest.raises(ValueError, match="nonnegative"):
            BregmanNMF(n_components=1).fit(X)

    def test_rejects_bad_rank(self, data):
        with pytest.raises(ValueError, match="n_components"):
            BregmanNMF(n_components=13).fit(data)


class TestTransform:
    def test_not_fitted(self, data):
        with pytest.raises(NotFittedError):
            BregmanNMF().transform(data)

    def test_transform_new_data(self, data):
        est = BregmanNMF(n_components=3, tol=1e-4, max_iter=200, random_state=3).fit(data)
        Xnew, _, _ = generate_synthetic(5, 12, 3, noise_level=0.05, seed=9)
        W = est.transform(Xnew)
        assert W.shape == (5, 3) and np.all(W >= 0)
        # transform solves row-wise nonnegative least squares against H
        recon = np.linalg.norm(Xnew - W @ est.components_)
        baseline = np.linalg.norm(Xnew)
        assert recon < baseline

    def test_inverse_transform(self, data):
        est = BregmanNMF(n_components=3, tol=1e-3, max_iter=100, random_state=4)
        W = est.fit_transform(data)
        recon = est.inverse_transform(W)
        assert recon.shape == data.shape
        np.testing.assert_allclose(recon, W @ est.components_)

    def test_feature_mismatch_rejected(self, data):
        est = BregmanNMF(n_components=2, tol=1e-2, max_iter=40).fit(data)
        with pytest.raises(ValueError, match="features"):
            est.transform(np.ones((3, 5)))
