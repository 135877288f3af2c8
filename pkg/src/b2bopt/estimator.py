"""Scikit-learn style estimator facade over the NMF solvers."""

from __future__ import annotations

import inspect

import numpy as np

from .core import SparseMatrix
from .nmf import NmfProblem
from .solvers import ALGORITHMS, SolverConfig, run
from .validation import as_matrix


class NotFittedError(ValueError):
    pass


class BaseEstimator:
    """Minimal get_params/set_params support compatible with sklearn pipelines."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class BregmanNMF(BaseEstimator):
    """Nonnegative matrix factorization X ~ W H via Bregman block solvers.

    Parameters
    ----------
    n_components : int
        Factorization rank.
    algorithm : str
        One of {'pg', 'bpg', 'cbbcd', 'gb2b', 'rb2b', 'b2b-ls'}.
    tol : float
        Relative projected-gradient stopping tolerance.
    max_iter : int
        Iteration budget in epochs.
    alpha : float or str
        Constant stepsize, 'optimal', 'line-search', or 'default'
        (per-algorithm recommendation).
    random_state : int
        Seed for the shared initial point (and the randomized schedule).
    assertions : bool
        Certify every update against the descent inequalities (slower).

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
        The H factor.
    reconstruction_err_ : float
        ||X - W H||_F at the end of fit.
    n_iter_ : int
        Iterations (epochs) performed.
    """

    def __init__(self, n_components=2, algorithm="gb2b", tol=1e-4, max_iter=200,
                 alpha="default", random_state=0, assertions=False):
        self.n_components = n_components
        self.algorithm = algorithm
        self.tol = tol
        self.max_iter = max_iter
        self.alpha = alpha
        self.random_state = random_state
        self.assertions = assertions

    def _validate_data(self, X):
        if isinstance(X, SparseMatrix):
            return X
        return as_matrix(X, "X", nonnegative=True)

    def _solver_config(self, seed):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        return SolverConfig(algorithm=self.algorithm, alpha=self.alpha,
                            epsilon=self.tol, max_iter=self.max_iter,
                            seed=seed, assertions=self.assertions)

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None):
        """Factorize X and return the sample-side factor W."""
        X = self._validate_data(X)
        m, n = X.shape
        if not 1 <= self.n_components <= min(m, n):
            raise ValueError(f"n_components must lie in [1, {min(m, n)}]")
        problem = NmfProblem(X, self.n_components)
        x0 = np.random.default_rng(self.random_state).uniform(0.0, 1.0, problem.n)
        config = self._solver_config(self.random_state)
        trace = run(problem, config, x0=x0)
        U, V = problem.factors(trace.final_x)
        self.components_ = V.T.copy()
        self._problem_shape = (m, n)
        self.n_iter_ = trace.records[-1].iteration
        self.reconstruction_err_ = float(np.sqrt(2.0 * trace.final_objective))
        self.trace_ = trace
        return U.copy()

    def transform(self, X):
        """Nonnegative coefficients W for X against the fitted components."""
        self._check_fitted()
        X = self._validate_data(X)
        H = self.components_
        if X.shape[1] != H.shape[1]:
            raise ValueError(f"X has {X.shape[1]} features, expected {H.shape[1]}")
        dense = X.to_dense() if isinstance(X, SparseMatrix) else X
        return _nnls_rows(dense, H, max_sweeps=self.max_iter, tol=self.tol)

    def inverse_transform(self, W):
        self._check_fitted()
        W = as_matrix(W, "W", nonnegative=True)
        return W @ self.components_

    def score_samples(self, X):
        """Negative per-row squared reconstruction error."""
        self._check_fitted()
        X = self._validate_data(X)
        dense = X.to_dense() if isinstance(X, SparseMatrix) else X
        W = self.transform(X)
        R = dense - W @ self.components_
        return -np.einsum("ij,ij->i", R, R)

    def _check_fitted(self):
        if not hasattr(self, "components_"):
            raise NotFittedError("this BregmanNMF instance is not fitted yet")


def _nnls_rows(X, H, max_sweeps, tol):
    """Row-wise nonnegative least squares against fixed H by clamped
    exact coordinate sweeps on the components."""
    m = X.shape[0]
    r = H.shape[0]
    G = H @ H.T
    XHt = X @ H.T
    W = np.maximum(XHt / max(np.trace(G), 1e-12), 0.0)
    diag = np.maximum(np.diag(G), 1e-12)
    last = np.inf
    for _ in range(max_sweeps):
        delta = 0.0
        for k in range(r):
            grad_k = W @ G[:, k] - XHt[:, k]
            new = np.maximum(W[:, k] - grad_k / diag[k], 0.0)
            delta = max(delta, float(np.max(np.abs(new - W[:, k]), initial=0.0)))
            W[:, k] = new
        if delta <= tol * max(1.0, float(np.max(W, initial=0.0))):
            break
    return W
