"""Scikit-learn style front end for cache-aware association."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .caching import zipf_popularity
from .dual import associate_all, association_objective, solve
from .radio import RadioInstance, capacity_matrix, sinr_matrix


class CacheAwareAssociation(ClusterMixin, BaseEstimator):
    """Assign users to base stations with the dual subgradient solver.

    ``X`` holds linear channel gains, one row per user and one column per
    base station.  Fitting solves the association at fixed powers; the
    station of each user ends up in ``labels_``.

    Parameters
    ----------
    max_power_w : float or array-like of shape (n_stations,)
    cache_capacity : int or array-like of shape (n_stations,)
    file_count, zipf_alpha : catalog size and popularity skew
    noise_w, bandwidth_hz, min_sinr : link parameters (``min_sinr`` linear)
    max_iter, tol, step0 : subgradient controls
    """

    def __init__(self, max_power_w=1.0, cache_capacity=5, file_count=50, zipf_alpha=0.8,
                 noise_w=1e-13, bandwidth_hz=1e6, min_sinr=0.1, max_iter=2000, tol=1e-6,
                 step0=0.1):
        self.max_power_w = max_power_w
        self.cache_capacity = cache_capacity
        self.file_count = file_count
        self.zipf_alpha = zipf_alpha
        self.noise_w = noise_w
        self.bandwidth_hz = bandwidth_hz
        self.min_sinr = min_sinr
        self.max_iter = max_iter
        self.tol = tol
        self.step0 = step0

    def _instance(self, X) -> RadioInstance:
        return RadioInstance(gains=X.T, max_power_w=self.max_power_w, noise_w=self.noise_w,
                             bandwidth_hz=self.bandwidth_hz, min_sinr=self.min_sinr,
                             cache_capacity=self.cache_capacity)

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=1)
        inst = self._instance(X)
        self.catalog_ = zipf_popularity(self.file_count, self.zipf_alpha)
        res = solve(inst, self.catalog_, max_iter=self.max_iter, tol=self.tol, step0=self.step0)
        self.labels_ = res.primal.assignment
        self.k_ = res.primal.k
        self.mu_ = res.dual.mu
        self.v_ = res.dual.v
        self.hit_mass_ = res.hit
        self.objective_ = res.objective
        self.trace_ = res.trace
        self.n_iter_ = res.iterations
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Station per user from the fitted load prices, without SINR prices."""
        check_is_fitted(self, "v_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} stations, got {X.shape[1]}")
        inst = self._instance(X)
        gamma = sinr_matrix(inst.max_power_w, inst)
        with np.errstate(divide="ignore"):
            log_c = np.log(capacity_matrix(inst.max_power_w, inst))
        return associate_all(np.zeros(X.shape[0]), self.v_, log_c, gamma)

    def score(self, X, y=None):
        """Reduced association objective of :meth:`predict` on ``X``."""
        labels = self.predict(X)
        inst = self._instance(check_array(X))
        with np.errstate(divide="ignore"):
            log_c = np.log(capacity_matrix(inst.max_power_w, inst))
        return association_objective(labels, log_c, self.hit_mass_)
