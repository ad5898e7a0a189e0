"""Semi-synthetic covariates, treatments and outcomes on a fixed network.

The generative process is

    s   = rowsum(X) + gamma * A rowsum(X)
    pi  = clamp(sigmoid(-s))                  ("logistic", default)
        = clamp(10 / (1 + exp(s)))            ("paper-exact")
    T   ~ Bernoulli(pi)
    Y   = phi(X) + theta0 * T + alpha0 * A T + eps,   eps ~ N(0, noise_sd^2)

with ``phi(X) = r + A r`` for ``r = rowsum(X)`` ("linear" confounding) or
``r + r**2 + A r`` ("quadratic"). Each stage draws from its own RNG stream
keyed on ``(seed, stage)``, so regenerating treatments never shifts the
covariates.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .netgraph import Network, neighbor_sum

PROPENSITY_MODES = ("logistic", "paper-exact")
CONFOUNDING = ("linear", "quadratic")

_STAGE_X, _STAGE_T, _STAGE_Y = 1, 2, 3


class DataFormatError(ValueError):
    """Malformed node-data file or inconsistent dataset."""


@dataclass(frozen=True)
class DgpConfig:
    theta0: float = 10.0
    alpha0: float = 5.0
    gamma: float = 1.0
    noise_sd: float = 1.0
    propensity_mode: str = "logistic"
    clamp_lo: float = 0.05
    clamp_hi: float = 0.95
    covariate_dim: int = 1
    confounding: str = "linear"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.clamp_lo < self.clamp_hi < 1.0:
            raise ValueError(f"clamp bounds must satisfy 0 < lo < hi < 1, got "
                             f"({self.clamp_lo}, {self.clamp_hi})")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.covariate_dim < 1:
            raise ValueError("covariate_dim must be positive")
        if self.propensity_mode not in PROPENSITY_MODES:
            raise ValueError(f"propensity_mode must be one of {PROPENSITY_MODES}")
        if self.confounding not in CONFOUNDING:
            raise ValueError(f"confounding must be one of {CONFOUNDING}")

    @property
    def clamp(self) -> tuple[float, float]:
        return (self.clamp_lo, self.clamp_hi)

    def with_seed(self, seed: int) -> DgpConfig:
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> DgpConfig:
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown DGP config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> DgpConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Dataset:
    """Per-node covariates ``x`` (n, d), treatments ``t`` and outcomes ``y``."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).ravel())
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        if not (len(self.x) == len(self.t) == len(self.y)):
            raise DataFormatError(
                f"inconsistent lengths: x={len(self.x)}, t={len(self.t)}, y={len(self.y)}")
        for name in ("x", "t", "y"):
            if not np.isfinite(getattr(self, name)).all():
                raise DataFormatError(f"non-finite values in {name}")

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def binary_treatment(self) -> bool:
        return bool(np.isin(self.t, (0.0, 1.0)).all())


def _rng(cfg: DgpConfig, stage: int) -> np.random.Generator:
    return np.random.default_rng([int(cfg.seed), stage])


def _rowsum(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x if x.ndim == 1 else x.sum(axis=1)


def gen_covariates(cfg: DgpConfig, net: Network) -> np.ndarray:
    return _rng(cfg, _STAGE_X).standard_normal((net.n, cfg.covariate_dim))


def confounding_score(cfg: DgpConfig, net: Network, x: np.ndarray) -> np.ndarray:
    r = _rowsum(x)
    return r + cfg.gamma * neighbor_sum(net, r)


def propensity_from_score(cfg: DgpConfig, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if cfg.propensity_mode == "paper-exact":
        raw = 10.0 / (1.0 + np.exp(s))
    else:
        raw = 1.0 / (1.0 + np.exp(s))
    return np.clip(raw, cfg.clamp_lo, cfg.clamp_hi)


def true_propensity(cfg: DgpConfig, net: Network, x: np.ndarray) -> np.ndarray:
    """Treatment probabilities, clamped into ``[clamp_lo, clamp_hi]``."""
    return propensity_from_score(cfg, confounding_score(cfg, net, x))


def gen_treatments(cfg: DgpConfig, pi: np.ndarray) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    return (_rng(cfg, _STAGE_T).random(pi.shape) < pi).astype(float)


def outcome_confounding(cfg: DgpConfig, net: Network, x: np.ndarray) -> np.ndarray:
    """Covariate part of the outcome, phi(X)."""
    r = _rowsum(x)
    phi = r + neighbor_sum(net, r)
    if cfg.confounding == "quadratic":
        phi = phi + r ** 2
    return phi


def gen_outcomes(cfg: DgpConfig, net: Network, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    y = outcome_confounding(cfg, net, x) + cfg.theta0 * t + cfg.alpha0 * neighbor_sum(net, t)
    if cfg.noise_sd > 0:
        y = y + cfg.noise_sd * _rng(cfg, _STAGE_Y).standard_normal(net.n)
    return y


def simulate(cfg: DgpConfig, net: Network) -> Dataset:
    x = gen_covariates(cfg, net)
    t = gen_treatments(cfg, true_propensity(cfg, net, x))
    return Dataset(x, t, gen_outcomes(cfg, net, x, t))


def oracle_nuisance(cfg: DgpConfig, net: Network, x: np.ndarray):
    """Exact ``E[T | X, A]`` and ``E[Y | X, A]`` for this DGP, on every node."""
    from .nuisance.base import NuisancePredictions

    pi = true_propensity(cfg, net, x)
    ell = outcome_confounding(cfg, net, x) + cfg.theta0 * pi + cfg.alpha0 * neighbor_sum(net, pi)
    return NuisancePredictions.full(pi, ell)


# -- node-data CSV -----------------------------------------------------------

def write_node_csv(data: Dataset, path, ids=None) -> None:
    """Write ``id,x0..x{d-1},t,y`` with round-trip float formatting."""
    d = data.x.shape[1]
    ids = range(data.n) if ids is None else ids
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *[f"x{j}" for j in range(d)], "t", "y"])
        for i, node in enumerate(ids):
            w.writerow([node, *map(repr, data.x[i].tolist()),
                        repr(float(data.t[i])), repr(float(data.y[i]))])


def read_node_csv(path) -> tuple[list[str], Dataset]:
    """Read a node-data CSV; returns node labels and the dataset in file order."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataFormatError("node file is empty")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 3
    expected = ["id", *[f"x{j}" for j in range(d)], "t", "y"]
    if d < 1 or header != expected:
        raise DataFormatError(f"bad header {header}; expected id,x0..x{{d-1}},t,y")
    ids, vals = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals.append([float(v) for v in row[1:]])
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric value") from None
        ids.append(row[0].strip())
    if not vals:
        raise DataFormatError("node file has no rows")
    if len(set(ids)) != len(ids):
        raise DataFormatError("duplicate node ids")
    v = np.asarray(vals)
    return ids, Dataset(v[:, :d], v[:, d], v[:, d + 1])


__all__ = [
    "CONFOUNDING", "DataFormatError", "Dataset", "DgpConfig", "PROPENSITY_MODES",
    "confounding_score", "gen_covariates", "gen_outcomes", "gen_treatments",
    "oracle_nuisance", "outcome_confounding", "propensity_from_score", "read_node_csv",
    "simulate", "true_propensity", "write_node_csv",
]
