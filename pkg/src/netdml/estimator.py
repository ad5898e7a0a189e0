"""Cross-fitted orthogonal-score estimation of direct and peer effects.

For focal node ``i`` write ``u_i = T_i - m_hat_i``, ``e_i = Y_i - l_hat_i`` and
``au_i = sum_{j in N_i} u_j``. The per-node score at ``(theta, alpha)`` is

    psi_i = (e_i - theta u_i - alpha au_i) * [u_i, au_i]

and each fold solves the 2x2 system obtained by setting its mean to zero.
Fold solutions are averaged; the sandwich covariance pools every fold's
score rows at the averaged solution.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dgp import Dataset, DgpConfig, oracle_nuisance, simulate
from .focal import FocalSet, FoldPlan, greedy_focal_set, kfold_partition
from .netgraph import Network
from .nuisance.base import NuisancePredictions
from .nuisance.gin import GinConfig
from .nuisance.learners import make_learner
from .validation import check_node_features, check_node_vector

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-10
MOMENT_FLOOR = 1e-6
EIGVEC_COS = 0.99


class DegenerateScore(ArithmeticError):
    """The 2x2 score system is (numerically) singular."""


@dataclass(frozen=True)
class Residuals:
    """Score ingredients on focal rows ``nodes``; ``fold`` tags each row."""

    nodes: np.ndarray
    u: np.ndarray
    e: np.ndarray
    au: np.ndarray
    fold: np.ndarray = None

    def __post_init__(self):
        for name in ("nodes", "u", "e", "au"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        n = len(self.nodes)
        if not (len(self.u) == len(self.e) == len(self.au) == n):
            raise ValueError("residual arrays must align with nodes")
        if self.fold is None:
            object.__setattr__(self, "fold", np.zeros(n, dtype=np.int64))
        for name in ("u", "e", "au"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"non-finite residuals in {name}")

    def __len__(self):
        return len(self.nodes)

    def take(self, rows) -> Residuals:
        return Residuals(self.nodes[rows], self.u[rows], self.e[rows], self.au[rows],
                         self.fold[rows])

    @classmethod
    def concat(cls, parts) -> Residuals:
        parts = list(parts)
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("nodes", "u", "e", "au", "fold")))


def residualize(net: Network, data: Dataset, pred: NuisancePredictions, nodes,
                fold: int = 0) -> Residuals:
    """Residuals on ``nodes``; ``pred`` must also cover their neighbours."""
    nodes = np.asarray(nodes, dtype=np.int64)
    u_full = data.t - pred.m_hat
    sub = net.adjacency[nodes]
    needed = np.union1d(nodes, sub.indices)
    if not pred.covers(needed):
        missing = np.setdiff1d(needed, pred.covered)
        raise ValueError(f"nuisance predictions missing for nodes {missing[:5].tolist()}")
    au = sub @ np.nan_to_num(u_full, nan=0.0)
    return Residuals(nodes, u_full[nodes], data.y[nodes] - pred.l_hat[nodes], au,
                     np.full(len(nodes), fold, dtype=np.int64))


def _gram(res: Residuals):
    u, au, e = res.u, res.au, res.e
    m = np.array([[u @ u, u @ au], [u @ au, au @ au]])
    b = np.array([e @ u, e @ au])
    return m, b


def _degeneracy_reason(m: np.ndarray) -> str:
    tr = np.trace(m)
    if tr == 0:
        return "treatment residuals are all zero; neither effect is identifiable"
    if m[1, 1] <= DEGENERACY_TOL * tr:
        return "neighbour treatment residuals vanish; peer effect unidentifiable"
    if m[0, 0] <= DEGENERACY_TOL * tr:
        return "own treatment residuals vanish; direct effect unidentifiable"
    return "treatment residuals u and A u are collinear; direct and peer effects not separable"


def _check_gram(m: np.ndarray) -> None:
    tr = np.trace(m)
    if tr <= 0 or np.linalg.det(m) / tr ** 2 < DEGENERACY_TOL:
        raise DegenerateScore(_degeneracy_reason(m))


def fold_score_solve(res: Residuals, fold_nodes=None) -> tuple[float, float]:
    """Solve the fold's estimating equations for ``(theta, alpha)``.

    ``fold_nodes`` selects rows of ``res`` by node id (all rows if None).
    """
    if fold_nodes is not None:
        res = res.take(np.isin(res.nodes, fold_nodes))
    if len(res) < 2:
        raise ValueError("need at least two focal nodes in a fold")
    m, b = _gram(res)
    _check_gram(m)
    theta, alpha = np.linalg.solve(m, b)
    return float(theta), float(alpha)


def score_rows(res: Residuals, zeta) -> np.ndarray:
    """Per-node score vectors, shape ``(n_f, 2)``."""
    r = res.e - zeta[0] * res.u - zeta[1] * res.au
    return np.column_stack([r * res.u, r * res.au])


@dataclass(frozen=True)
class VarianceEstimate:
    sigma: np.ndarray
    se: np.ndarray
    ci: np.ndarray
    level: float
    jacobian: np.ndarray


def variance_estimate(res: Residuals, zeta, level: float = 0.95) -> VarianceEstimate:
    """Sandwich covariance ``J^-1 mean(psi psi^T) J^-T`` with normal-quantile CIs.

    ``se = sqrt(diag(sigma) / n_f)``; ``ci`` rows are ``[lo, hi]`` for theta
    and alpha.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    zeta = np.asarray(zeta, dtype=float)
    n_f = len(res)
    m, _ = _gram(res)
    _check_gram(m)
    jac = -m / n_f
    psi = score_rows(res, zeta)
    omega = psi.T @ psi / n_f
    jinv = np.linalg.inv(jac)
    sigma = jinv @ omega @ jinv.T
    sigma = 0.5 * (sigma + sigma.T)
    se = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / n_f)
    z = norm.ppf(0.5 + level / 2)
    ci = np.column_stack([zeta - z * se, zeta + z * se])
    return VarianceEstimate(sigma, se, ci, level, jac)


@dataclass(frozen=True)
class Diagnostics:
    gram_cond: float
    cos_u_au: float
    nf_fraction: float
    u_moment: float
    au_moment: float
    eu_moment: float
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {"gram_cond": self.gram_cond, "cos_u_au": self.cos_u_au,
                "nf_fraction": self.nf_fraction, "warnings": list(self.warnings)}


def diagnostics(res: Residuals, net: Network, floor: float = MOMENT_FLOOR) -> Diagnostics:
    """Well-posedness checks on pooled residuals; problems are logged, never raised."""
    n_f = max(len(res), 1)
    m, _ = _gram(res)
    u2, au2 = m[0, 0] / n_f, m[1, 1] / n_f
    eu = float(res.e @ res.u) / n_f
    denom = np.sqrt(m[0, 0] * m[1, 1])
    cos = float(abs(m[0, 1]) / denom) if denom > 0 else float("nan")
    cond = float(np.linalg.cond(m)) if np.isfinite(m).all() else float("inf")
    warns = []
    if not cos < EIGVEC_COS:
        warns.append(f"|cos(u, A u)| = {cos:.4f}: treatment residuals near an eigenvector of A")
    if u2 < floor:
        warns.append(f"mean u^2 = {u2:.3g} below floor {floor:g}: no treatment variation")
    if au2 < floor:
        warns.append(f"mean (A u)^2 = {au2:.3g} below floor {floor:g}: no peer exposure variation")
    if abs(eu) < floor:
        warns.append(f"|mean e u| = {abs(eu):.3g} below floor {floor:g}")
    for w in warns:
        logger.warning(w)
    return Diagnostics(cond, cos, len(res) / net.n, float(u2), float(au2), eu, tuple(warns))


@dataclass(frozen=True)
class EffectEstimate:
    theta: float
    alpha: float
    sigma: np.ndarray
    se_theta: float
    se_alpha: float
    ci_theta: tuple[float, float]
    ci_alpha: tuple[float, float]
    level: float
    n_f: int
    k: int
    folds: list
    diagnostics: Diagnostics
    residuals: Residuals = field(default=None, repr=False, compare=False)

    @property
    def zeta(self) -> np.ndarray:
        return np.array([self.theta, self.alpha])

    @property
    def se(self) -> np.ndarray:
        return np.array([self.se_theta, self.se_alpha])

    def covers(self, theta0: float, alpha0: float) -> tuple[bool, bool]:
        return (self.ci_theta[0] <= theta0 <= self.ci_theta[1],
                self.ci_alpha[0] <= alpha0 <= self.ci_alpha[1])

    def to_dict(self) -> dict:
        return {
            "theta": self.theta, "alpha": self.alpha,
            "se_theta": self.se_theta, "se_alpha": self.se_alpha,
            "ci_theta": list(self.ci_theta), "ci_alpha": list(self.ci_alpha),
            "level": self.level, "n_f": self.n_f, "k": self.k,
            "folds": [{"theta": t, "alpha": a} for t, a in self.folds],
            "diagnostics": self.diagnostics.to_dict(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _neighbourhood(net: Network, nodes) -> np.ndarray:
    return np.union1d(nodes, net.adjacency[nodes].indices)


def cross_fit_estimate(net: Network, data: Dataset, fs: FocalSet, plan: FoldPlan, learner,
                       level: float = 0.95, keep_residuals: bool = True) -> EffectEstimate:
    """Estimate ``(theta, alpha)`` by K-fold cross-fitting over the focal set.

    ``learner`` is a name accepted by :func:`make_learner` other than
    ``"oracle"``, or any object with ``fit(net, data, train_nodes)``
    returning a model with ``predict(net, x, nodes)``.
    """
    if data.n != net.n:
        raise ValueError(f"dataset has {data.n} nodes, network has {net.n}")
    if fs.n_f < 2 * plan.k:
        raise ValueError(f"focal set of size {fs.n_f} is too small for {plan.k} folds "
                         f"(need at least {2 * plan.k})")
    if isinstance(learner, str):
        learner = make_learner(learner)
    parts, folds = [], []
    for k in range(plan.k):
        train, test = plan.train_nodes(k), plan.test_nodes(k)
        fitted = learner.fit(net, data, train)
        pred = fitted.predict(net, data.x, _neighbourhood(net, test))
        res_k = residualize(net, data, pred, test, fold=k)
        try:
            folds.append(fold_score_solve(res_k))
        except DegenerateScore as exc:
            raise DegenerateScore(f"fold {k}: {exc}") from None
        parts.append(res_k)
    res = Residuals.concat(parts)
    zeta = np.mean(np.asarray(folds), axis=0)
    var = variance_estimate(res, zeta, level)
    diag = diagnostics(res, net)
    return EffectEstimate(
        theta=float(zeta[0]), alpha=float(zeta[1]), sigma=var.sigma,
        se_theta=float(var.se[0]), se_alpha=float(var.se[1]),
        ci_theta=tuple(map(float, var.ci[0])), ci_alpha=tuple(map(float, var.ci[1])),
        level=level, n_f=fs.n_f, k=plan.k, folds=folds, diagnostics=diag,
        residuals=res if keep_residuals else None)


# -- Neyman orthogonality ----------------------------------------------------

@dataclass(frozen=True)
class OrthogonalityReport:
    """Monte-Carlo check of the score's sensitivity to nuisance perturbations.

    Arrays are indexed ``[direction, score component]``. ``slope`` is the
    central finite-difference derivative of the mean score at ``r = 0``
    and ``slope_se`` its Monte-Carlo standard error.
    """

    score: str
    r_grid: np.ndarray
    mean_score: np.ndarray
    moment: np.ndarray
    moment_se: np.ndarray
    slope: np.ndarray
    slope_se: np.ndarray

    @property
    def slope_ratio(self) -> float:
        return float(np.max(np.abs(self.slope) / self.slope_se))

    @property
    def moment_ratio(self) -> float:
        return float(np.max(np.abs(self.moment) / self.moment_se))


def _perturbation_directions(rng: np.random.Generator, n_directions: int):
    """Random smooth functions ``(D, G)`` of ``(r, A r)``, with ``r = rowsum(x)``."""
    dirs = []
    for _ in range(n_directions):
        a = rng.uniform(0.5, 1.5, size=4) * rng.choice([-1, 1], size=4)
        b = rng.normal(size=6)

        def direction(r, ar, a=a, b=b):
            d = 0.1 * a[0] * np.tanh(b[0] * r + 0.3 * b[1] * ar + b[2]) + 0.05 * a[1]
            g = a[2] * np.sin(b[3] * r + b[4]) + 0.2 * a[3] * r ** 2 + 0.3 * b[5] * ar
            return d, g
        dirs.append(direction)
    return dirs


def orthogonality_check(net: Network, dgp_cfg: DgpConfig, r_grid=(-0.1, -0.05, 0.0, 0.05, 0.1),
                        replicates: int = 10_000, n_directions: int = 5, seed=0,
                        score: str = "orthogonal") -> OrthogonalityReport:
    """Estimate ``d/dr E[psi(zeta0, eta0 + r (eta - eta0))]`` at ``r = 0``.

    Datasets are redrawn ``replicates`` times on the fixed network; each
    replicate's score is the mean over all nodes. The same draws are reused
    along the ``r`` grid, so the finite difference has common random
    numbers. ``score="naive"`` uses ``e - theta0 u`` with no treatment
    residual as instrument, which is not orthogonal.
    """
    if score not in ("orthogonal", "naive"):
        raise ValueError("score must be 'orthogonal' or 'naive'")
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    pos = r_grid[r_grid > 0]
    if 0.0 not in r_grid or pos.size == 0 or not np.isin(-pos[0], r_grid):
        raise ValueError("r_grid must contain 0 and a symmetric pair around it")
    h = pos[0]
    theta0, alpha0 = dgp_cfg.theta0, dgp_cfg.alpha0
    adj = net.adjacency

    ss = np.random.SeedSequence(seed)
    rep_seeds = ss.spawn(replicates)
    T, Y, R, M0, L0 = [], [], [], [], []
    for s in rep_seeds:
        cfg = dgp_cfg.with_seed(int(s.generate_state(1)[0]))
        data = simulate(cfg, net)
        eta0 = oracle_nuisance(cfg, net, data.x)
        T.append(data.t)
        Y.append(data.y)
        R.append(data.x.sum(axis=1))
        M0.append(eta0.m_hat)
        L0.append(eta0.l_hat)
    T, Y, R, M0, L0 = map(np.asarray, (T, Y, R, M0, L0))
    AR = (adj @ R.T).T

    def mean_scores(dm, dl, r):
        u = T - (M0 + r * dm)
        e = Y - (L0 + r * dl)
        if score == "naive":
            s = (e - theta0 * u).mean(axis=1)
            return s[:, None]
        au = (adj @ u.T).T
        resid = e - theta0 * u - alpha0 * au
        return np.column_stack([(resid * u).mean(axis=1), (resid * au).mean(axis=1)])

    base = mean_scores(0.0, 0.0, 0.0)
    means, slopes, slope_ses = [], [], []
    rng = np.random.default_rng(ss.spawn(1)[0])
    for direction in _perturbation_directions(rng, n_directions):
        dm, dl = direction(R, AR)
        curve = [mean_scores(dm, dl, r).mean(axis=0) for r in r_grid]
        fd = (mean_scores(dm, dl, h) - mean_scores(dm, dl, -h)) / (2 * h)
        means.append(curve)
        slopes.append(fd.mean(axis=0))
        slope_ses.append(fd.std(axis=0, ddof=1) / np.sqrt(replicates))
    return OrthogonalityReport(
        score=score, r_grid=r_grid, mean_score=np.asarray(means),
        moment=base.mean(axis=0), moment_se=base.std(axis=0, ddof=1) / np.sqrt(replicates),
        slope=np.asarray(slopes), slope_se=np.asarray(slope_ses))


# -- scikit-learn style front end ---------------------------------------------

class NetworkDML(BaseEstimator):
    """Direct (theta) and peer (alpha) effects from one network.

    Parameters mirror the command-line flags. ``learner`` is ``"gin"``,
    ``"pa"``, ``"oracle"`` (requires ``dgp_config``) or a learner object.

    Fitted attributes: ``estimate_``, ``theta_``, ``alpha_``, ``se_``,
    ``ci_`` (2x2, rows theta/alpha), ``cov_`` (covariance of the
    estimates), ``focal_set_`` and ``fold_plan_``.
    """

    def __init__(self, learner="gin", k_folds=3, level=0.95, focal_seed=0, fold_seed=0,
                 hidden_dim=32, epochs=300, batch_size=16, learning_rate=0.01, dropout_p=0.5,
                 gin_eps=0.0, random_state=0, dgp_config=None):
        self.learner = learner
        self.k_folds = k_folds
        self.level = level
        self.focal_seed = focal_seed
        self.fold_seed = fold_seed
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout_p = dropout_p
        self.gin_eps = gin_eps
        self.random_state = random_state
        self.dgp_config = dgp_config

    def _make_learner(self):
        if not isinstance(self.learner, str):
            return self.learner
        gin = GinConfig(hidden_dim=self.hidden_dim, epochs=self.epochs,
                        batch_size=self.batch_size, learning_rate=self.learning_rate,
                        dropout_p=self.dropout_p, gin_eps=self.gin_eps, seed=self.random_state)
        return make_learner(self.learner, gin_config=gin, dgp_config=self.dgp_config)

    def fit(self, X, t, y, *, network: Network):
        X = check_node_features(X, network)
        t = check_node_vector(t, network, "t")
        y = check_node_vector(y, network, "y")
        data = Dataset(X, t, y)
        self.focal_set_ = greedy_focal_set(network, self.focal_seed)
        self.fold_plan_ = kfold_partition(self.focal_set_, self.k_folds, self.fold_seed)
        self.estimate_ = cross_fit_estimate(network, data, self.focal_set_, self.fold_plan_,
                                            self._make_learner(), self.level)
        est = self.estimate_
        self.theta_, self.alpha_ = est.theta, est.alpha
        self.se_ = est.se
        self.ci_ = np.array([est.ci_theta, est.ci_alpha])
        self.cov_ = est.sigma / est.n_f
        self.n_features_in_ = X.shape[1]
        return self

    def summary(self) -> dict:
        check_is_fitted(self, "estimate_")
        return self.estimate_.to_dict()
