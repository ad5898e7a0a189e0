"""Predefined-aggregates baseline: linear/logistic models on fixed neighbour summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..netgraph import Network
from ..validation import check_node_features, check_nodes
from .base import clip_propensity, is_binary

RIDGE_FLOOR = 1e-6


def pa_features(net: Network, x) -> np.ndarray:
    """Per-node ``[x_i, mean, max, min, sum of neighbour x, isolated]``.

    Aggregates over an empty neighbourhood are 0; the final column flags
    isolated nodes so the model can still tell them apart.
    """
    x = check_node_features(x, net)
    a = net.adjacency
    deg = net.degrees
    total = a @ x
    mean = np.divide(total, deg[:, None], out=np.zeros_like(total), where=deg[:, None] > 0)
    mx = np.zeros_like(x)
    mn = np.zeros_like(x)
    has = deg > 0
    if has.any():
        starts = a.indptr[:-1][has]
        vals = x[a.indices]
        mx[has] = np.maximum.reduceat(vals, starts, axis=0)
        mn[has] = np.minimum.reduceat(vals, starts, axis=0)
    iso = (~has).astype(float)[:, None]
    return np.hstack([x, mean, mx, mn, total, iso])


def _design(f):
    return np.hstack([np.ones((len(f), 1)), f])


def _ridge_solve(z, y, lam, weights=None):
    w = np.ones(len(z)) if weights is None else weights
    pen = lam * np.eye(z.shape[1])
    pen[0, 0] = 0.0  # intercept is not penalised
    return np.linalg.solve(z.T @ (w[:, None] * z) + pen, z.T @ (w * y))


def _logistic_newton(z, t, lam, max_iter=100, tol=1e-10):
    """Ridge-penalised logistic regression by damped Newton steps."""
    beta = np.zeros(z.shape[1])
    pen = lam * np.eye(z.shape[1])
    pen[0, 0] = 0.0

    def objective(b):
        eta = z @ b
        return np.sum(np.logaddexp(0.0, eta) - t * eta) + 0.5 * b @ pen @ b

    obj = objective(beta)
    for _ in range(max_iter):
        p = expit(z @ beta)
        grad = z.T @ (p - t) + pen @ beta
        hess = z.T @ ((p * (1 - p))[:, None] * z) + pen
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        while scale > 1e-8:
            cand = beta - scale * step
            new = objective(cand)
            if new <= obj:
                break
            scale *= 0.5
        beta, delta, obj = cand, obj - new, new
        if delta < tol * (1 + abs(obj)):
            break
    return beta


@dataclass
class PAModel:
    coef: np.ndarray
    target_kind: str
    feature_shift: np.ndarray
    feature_scale: np.ndarray

    def raw_coef(self) -> tuple[float, np.ndarray]:
        """Intercept and weights in the units of :func:`pa_features`."""
        w = self.coef[1:] / self.feature_scale
        return float(self.coef[0] - w @ self.feature_shift), w

    def predict(self, net: Network, x, nodes=None) -> np.ndarray:
        nodes = check_nodes(nodes, net)
        f = (pa_features(net, x)[nodes] - self.feature_shift) / self.feature_scale
        eta = _design(f) @ self.coef
        return clip_propensity(expit(eta)) if self.target_kind == "propensity" else eta


def fit_pa(net: Network, x, targets, target_kind: str, train_nodes, ridge: float = RIDGE_FLOOR) -> PAModel:
    """Ridge (outcome) or ridge-logistic (propensity) fit on :func:`pa_features`.

    Features are standardised on the training nodes; ``ridge`` is floored
    at ``1e-6`` so the normal equations stay solvable for degenerate designs.
    """
    train_nodes = check_nodes(train_nodes, net)
    if len(train_nodes) == 0:
        raise ValueError("train_nodes is empty")
    targets = np.asarray(targets, dtype=float)
    y = targets[train_nodes]
    if target_kind == "propensity" and not is_binary(y):
        raise ValueError("propensity targets must be binary {0, 1}")
    f = pa_features(net, x)[train_nodes]
    shift = f.mean(axis=0)
    scale = f.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    z = _design((f - shift) / scale)
    lam = max(float(ridge), RIDGE_FLOOR)
    if target_kind == "propensity":
        coef = _logistic_newton(z, y, lam)
    elif target_kind == "outcome":
        coef = _ridge_solve(z, y, lam)
    else:
        raise ValueError(f"unknown target_kind {target_kind!r}")
    return PAModel(coef, target_kind, shift, scale)


class _PAEstimator(BaseEstimator):
    _target_kind = "outcome"

    def __init__(self, ridge=RIDGE_FLOOR):
        self.ridge = ridge

    def fit(self, X, y, *, network: Network, nodes=None):
        X = check_node_features(X, network)
        self.model_ = fit_pa(network, X, y, self._target_kind, check_nodes(nodes, network),
                             self.ridge)
        self.n_features_in_ = X.shape[1]
        return self

    def _raw_predict(self, X, network, nodes):
        check_is_fitted(self, "model_")
        return self.model_.predict(network, X, nodes)


class PARegressor(RegressorMixin, _PAEstimator):
    _target_kind = "outcome"

    def predict(self, X, *, network: Network, nodes=None):
        return self._raw_predict(X, network, nodes)


class PAClassifier(ClassifierMixin, _PAEstimator):
    _target_kind = "propensity"

    def fit(self, X, y, *, network: Network, nodes=None):
        super().fit(X, y, network=network, nodes=nodes)
        self.classes_ = np.array([0.0, 1.0])
        return self

    def predict_proba(self, X, *, network: Network, nodes=None):
        p1 = self._raw_predict(X, network, nodes)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X, *, network: Network, nodes=None):
        return (self.predict_proba(X, network=network, nodes=nodes)[:, 1] >= 0.5).astype(float)
