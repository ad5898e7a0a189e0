"""Single-layer graph isomorphism network written directly in numpy.

Architecture, for node ``i`` with neighbourhood ``N_i``::

    z_i  = (1 + eps) x_i + sum_{j in N_i} x_j          # GIN aggregation
    h1_i = dropout(relu(W_gin z_i + b_gin))             # MLP_gin
    h2_i = dropout(relu(W_fc1 h1_i + b_fc1))            # FC1
    out  = w_fc2 . h2_i + b_fc2                         # FC2 (scalar)

The propensity head squashes ``out`` with a logistic function and is
trained on binary cross-entropy; the outcome head is linear with squared
error. Because there is only one message-passing layer, ``z`` depends on
the inputs alone and is computed once per fit; gradients with respect to
``x`` are still available through :func:`gin_loss_grad`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..netgraph import Network
from .base import clip_propensity, is_binary
from ..validation import check_node_features, check_nodes

TARGET_KINDS = ("propensity", "outcome")
ACTIVATIONS = ("relu", "identity")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class GinConfig:
    hidden_dim: int = 32
    epochs: int = 300
    batch_size: int = 16
    learning_rate: float = 0.01
    dropout_p: float = 0.5
    gin_eps: float = 0.0
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden_dim, epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


_LAYOUT = ("W_gin", "b_gin", "W_fc1", "b_fc1", "w_fc2", "b_fc2")


def _shapes(d: int, h: int) -> dict[str, tuple[int, ...]]:
    return {"W_gin": (d, h), "b_gin": (h,), "W_fc1": (h, h), "b_fc1": (h,),
            "w_fc2": (h,), "b_fc2": (1,)}


@dataclass
class GinParams:
    """Trainable weights stored as views into one flat vector.

    ``in_shift``/``in_scale`` standardise the aggregated features and
    ``out_shift``/``out_scale`` map the network output back to target
    units; both are fixed during training.
    """

    flat: np.ndarray
    d: int
    hidden_dim: int
    in_shift: np.ndarray = None
    in_scale: np.ndarray = None
    out_shift: float = 0.0
    out_scale: float = 1.0
    views: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.views = {}
        offset = 0
        for name, shape in _shapes(self.d, self.hidden_dim).items():
            size = int(np.prod(shape))
            self.views[name] = self.flat[offset:offset + size].reshape(shape)
            offset += size
        if offset != self.flat.size:
            raise ValueError(f"flat parameter vector has {self.flat.size} entries, expected {offset}")
        if self.in_shift is None:
            self.in_shift = np.zeros(self.d)
        if self.in_scale is None:
            self.in_scale = np.ones(self.d)

    def __getitem__(self, name):
        return self.views[name]

    def copy(self) -> GinParams:
        return GinParams(self.flat.copy(), self.d, self.hidden_dim, self.in_shift.copy(),
                         self.in_scale.copy(), self.out_shift, self.out_scale)

    @classmethod
    def zeros(cls, d: int, hidden_dim: int) -> GinParams:
        size = sum(int(np.prod(s)) for s in _shapes(d, hidden_dim).values())
        return cls(np.zeros(size), d, hidden_dim)

    def dump(self, path) -> None:
        """Write ``name shape values...`` lines, values in row-major order."""
        with open(path, "w", encoding="utf-8") as fh:
            extra = {"in_shift": self.in_shift, "in_scale": self.in_scale,
                     "out_shift": np.array([self.out_shift]),
                     "out_scale": np.array([self.out_scale])}
            for name, arr in [*self.views.items(), *extra.items()]:
                shape = "x".join(map(str, arr.shape))
                fh.write(f"{name} {shape} {' '.join(repr(float(v)) for v in arr.ravel())}\n")

    @classmethod
    def load(cls, path) -> GinParams:
        arrays = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                name, shape, *vals = line.split()
                dims = tuple(int(s) for s in shape.split("x"))
                arrays[name] = np.array([float(v) for v in vals]).reshape(dims)
        d, h = arrays["W_gin"].shape
        p = cls.zeros(d, h)
        for name in _LAYOUT:
            p.views[name][...] = arrays[name]
        p.in_shift, p.in_scale = arrays["in_shift"], arrays["in_scale"]
        p.out_shift = float(arrays["out_shift"][0])
        p.out_scale = float(arrays["out_scale"][0])
        return p


def init_params(d: int, hidden_dim: int, seed=0) -> GinParams:
    """He-style uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    p = GinParams.zeros(d, hidden_dim)
    for name in ("W_gin", "W_fc1", "w_fc2"):
        w = p[name]
        fan_in = w.shape[0]
        bound = np.sqrt(6.0 / fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return p


def gin_aggregate(net: Network, x: np.ndarray, gin_eps: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return (1.0 + gin_eps) * x + net.adjacency @ x


def _act(a, activation):
    return np.maximum(a, 0.0) if activation == "relu" else a


def _forward(p: GinParams, z: np.ndarray, masks=None, activation="relu"):
    zs = (z - p.in_shift) / p.in_scale
    a1 = zs @ p["W_gin"] + p["b_gin"]
    h1 = _act(a1, activation)
    if masks is not None:
        h1 = h1 * masks[0]
    a2 = h1 @ p["W_fc1"] + p["b_fc1"]
    h2 = _act(a2, activation)
    if masks is not None:
        h2 = h2 * masks[1]
    out = h2 @ p["w_fc2"] + p["b_fc2"][0]
    return out, (zs, a1, h1, a2, h2)


def _backward(p: GinParams, cache, dout, masks=None, activation="relu", g=None):
    """Back-propagate ``dout`` (d loss / d raw output) into gradient views ``g``.

    Returns ``(flat_grad, d loss / d z)``, the latter in unstandardised units.
    """
    zs, a1, h1, a2, h2 = cache
    if g is None:
        g = GinParams.zeros(p.d, p.hidden_dim)
    g["w_fc2"][...] = h2.T @ dout
    g["b_fc2"][0] = dout.sum()
    dh2 = np.outer(dout, p["w_fc2"])
    if masks is not None:
        dh2 *= masks[1]
    if activation == "relu":
        dh2 *= a2 > 0
    g["W_fc1"][...] = h1.T @ dh2
    g["b_fc1"][...] = dh2.sum(axis=0)
    dh1 = dh2 @ p["W_fc1"].T
    if masks is not None:
        dh1 *= masks[0]
    if activation == "relu":
        dh1 *= a1 > 0
    g["W_gin"][...] = zs.T @ dh1
    g["b_gin"][...] = dh1.sum(axis=0)
    dz = (dh1 @ p["W_gin"].T) / p.in_scale
    return g.flat, dz


def _loss_and_dout(out, target, kind):
    n = len(out)
    if kind == "propensity":
        # BCE with logits, stable form
        loss = np.mean(np.logaddexp(0.0, out) - target * out)
        dout = (expit(out) - target) / n
    else:
        r = out - target
        loss = np.mean(r * r)
        dout = 2.0 * r / n
    return loss, dout


def gin_forward(params: GinParams, net: Network, x, nodes=None, train_mode: bool = False, *,
                head: str = "outcome", gin_eps: float = 0.0, dropout_p: float = 0.0,
                activation: str = "relu", rng=None) -> np.ndarray:
    """Evaluate the network on ``nodes`` (all nodes by default).

    Returns probabilities for ``head="propensity"`` and target-unit values
    for ``head="outcome"``. Dropout is applied only when ``train_mode``.
    """
    x = check_node_features(x, net)
    if x.shape[1] != params.d:
        raise ValueError(f"x has {x.shape[1]} features, parameters expect {params.d}")
    nodes = check_nodes(nodes, net)
    z = gin_aggregate(net, x, gin_eps)[nodes]
    masks = None
    if train_mode and dropout_p > 0:
        rng = np.random.default_rng(rng)
        masks = _dropout_masks(rng, len(nodes), params.hidden_dim, dropout_p)
    out, _ = _forward(params, z, masks, activation)
    if head == "propensity":
        return expit(out)
    return params.out_shift + params.out_scale * out


def gin_loss_grad(params: GinParams, net: Network, x, nodes, targets, target_kind: str, *,
                  gin_eps: float = 0.0, activation: str = "relu", masks=None):
    """Mean loss over ``nodes`` with its exact gradient.

    Returns ``(loss, grad_flat, grad_x)``; ``grad_x`` is the gradient with
    respect to the raw node features, routed back through the neighbour sum.
    Targets are in network-output units (no output rescaling).
    """
    x = check_node_features(x, net)
    nodes = check_nodes(nodes, net)
    z = gin_aggregate(net, x, gin_eps)[nodes]
    out, cache = _forward(params, z, masks, activation)
    loss, dout = _loss_and_dout(out, np.asarray(targets, dtype=float), target_kind)
    grad, dz = _backward(params, cache, dout, masks, activation)
    dz_full = np.zeros((net.n, params.d))
    np.add.at(dz_full, nodes, dz)
    grad_x = (1.0 + gin_eps) * dz_full + net.adjacency.T @ dz_full
    return loss, grad, grad_x


def _dropout_masks(rng, n, h, p):
    keep = 1.0 - p
    return ((rng.random((n, h)) < keep) / keep, (rng.random((n, h)) < keep) / keep)


@dataclass
class GinModel:
    params: GinParams
    config: GinConfig
    target_kind: str
    loss_history: list = field(default_factory=list)

    def predict(self, net: Network, x, nodes=None) -> np.ndarray:
        out = gin_forward(self.params, net, x, nodes, train_mode=False, head=self.target_kind,
                          gin_eps=self.config.gin_eps, activation=self.config.activation)
        return clip_propensity(out) if self.target_kind == "propensity" else out


def fit_gin(cfg: GinConfig, net: Network, x, targets, target_kind: str, train_nodes) -> GinModel:
    """Train with Adam on minibatches of ``train_nodes``.

    ``targets`` is node-indexed (length ``n``); only entries at
    ``train_nodes`` are read. Aggregated inputs are standardised on the
    training nodes, and outcome targets are standardised internally.
    """
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"target_kind must be one of {TARGET_KINDS}")
    x = check_node_features(x, net)
    train_nodes = check_nodes(train_nodes, net)
    if len(train_nodes) == 0:
        raise ValueError("train_nodes is empty")
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (net.n,):
        raise ValueError(f"targets must have length n={net.n}")
    y = targets[train_nodes]
    if not np.isfinite(y).all():
        raise ValueError("non-finite targets on training nodes")
    if target_kind == "propensity" and not is_binary(y):
        raise ValueError("propensity targets must be binary {0, 1}")

    rng = np.random.default_rng(cfg.seed)
    d = x.shape[1]
    h = cfg.hidden_dim
    p = init_params(d, h, rng)
    z = gin_aggregate(net, x, cfg.gin_eps)[train_nodes]
    p.in_shift = z.mean(axis=0)
    sd = z.std(axis=0)
    p.in_scale = np.where(sd > 0, sd, 1.0)
    if target_kind == "outcome":
        p.out_shift = float(y.mean())
        p.out_scale = float(y.std()) or 1.0
        y = (y - p.out_shift) / p.out_scale

    n = len(train_nodes)
    bs = min(cfg.batch_size, n)
    m = np.zeros_like(p.flat)
    v = np.zeros_like(p.flat)
    g = GinParams.zeros(d, h)
    grad = g.flat
    lr, b1, b2 = cfg.learning_rate, ADAM_BETA1, ADAM_BETA2
    step = 0
    dropout = cfg.dropout_p > 0
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        if dropout:
            keep = 1.0 - cfg.dropout_p
            mask1 = (rng.random((n, h)) < keep) / keep
            mask2 = (rng.random((n, h)) < keep) / keep
        epoch_loss = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            masks = (mask1[start:start + bs], mask2[start:start + bs]) if dropout else None
            out, cache = _forward(p, z[idx], masks, cfg.activation)
            loss, dout = _loss_and_dout(out, y[idx], target_kind)
            _backward(p, cache, dout, masks, cfg.activation, g)
            epoch_loss += loss * len(idx)
            step += 1
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            step_size = lr * np.sqrt(1 - b2 ** step) / (1 - b1 ** step)
            # equivalent to lr * m_hat / (sqrt(v_hat) + eps)
            p.flat -= step_size * m / (np.sqrt(v) + ADAM_EPS * np.sqrt(1 - b2 ** step))
        history.append(epoch_loss / n)
    return GinModel(p, cfg, target_kind, history)


# -- scikit-learn style wrappers ---------------------------------------------

class _GinEstimator(BaseEstimator):
    _target_kind = "outcome"

    def __init__(self, hidden_dim=32, epochs=300, batch_size=16, learning_rate=0.01,
                 dropout_p=0.5, gin_eps=0.0, activation="relu", random_state=0):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout_p = dropout_p
        self.gin_eps = gin_eps
        self.activation = activation
        self.random_state = random_state

    def _config(self) -> GinConfig:
        return GinConfig(hidden_dim=self.hidden_dim, epochs=self.epochs,
                         batch_size=self.batch_size, learning_rate=self.learning_rate,
                         dropout_p=self.dropout_p, gin_eps=self.gin_eps,
                         activation=self.activation, seed=self.random_state)

    def fit(self, X, y, *, network: Network, nodes=None):
        """Fit on ``nodes``; ``X`` and ``y`` are indexed by node id over the whole graph."""
        X = check_node_features(X, network)
        nodes = check_nodes(nodes, network)
        self.model_ = fit_gin(self._config(), network, X, np.asarray(y, dtype=float),
                              self._target_kind, nodes)
        self.n_features_in_ = X.shape[1]
        return self

    def _raw_predict(self, X, network, nodes):
        check_is_fitted(self, "model_")
        return self.model_.predict(network, X, nodes)


class GINRegressor(RegressorMixin, _GinEstimator):
    """GIN regression of a node-level target on (x_i, x_{N_i})."""

    _target_kind = "outcome"

    def predict(self, X, *, network: Network, nodes=None):
        return self._raw_predict(X, network, nodes)


class GINClassifier(ClassifierMixin, _GinEstimator):
    """GIN propensity model for a binary node treatment."""

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
