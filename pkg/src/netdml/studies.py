"""Monte-Carlo studies: estimation error across SBM densities and CI coverage.

All randomness derives from ``StudyConfig.seed`` through
``SeedSequence([seed, study, cell, replicate])``, so a study is a pure
function of its configuration regardless of ``jobs``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .dgp import DgpConfig, simulate
from .estimator import DegenerateScore, cross_fit_estimate
from .focal import greedy_focal_set, kfold_partition
from .netgraph import SbmConfig, sbm_generate
from .nuisance.gin import GinConfig
from .nuisance.learners import make_learner

logger = logging.getLogger(__name__)

DENSITY, COVERAGE = 1, 2

DENSITY_COLUMNS = ["p_intra", "n_f", "edges", "mse_theta", "mse_alpha", "n_ok", "note"]
DENSITY_REPLICATE_COLUMNS = ["p_intra", "replicate", "theta", "alpha", "note"]
COVERAGE_COLUMNS = ["trial", "theta", "alpha", "se_theta", "se_alpha", "ci_theta_lo",
                    "ci_theta_hi", "ci_alpha_lo", "ci_alpha_hi", "cover_theta", "cover_alpha",
                    "note"]

# Nuisance settings used by the studies: reduced epochs, no dropout and a
# smaller step size keep the propensity error small enough for valid CIs at
# a few hundred training nodes.
STUDY_GIN = GinConfig(epochs=100, dropout_p=0.0, learning_rate=0.001)


@dataclass(frozen=True)
class StudyConfig:
    sbm: SbmConfig
    dgp: DgpConfig = field(default_factory=DgpConfig)
    p_intra_grid: tuple = (0.01, 0.05, 0.1, 0.25, 0.5)
    replicates: int = 10
    learner: str = "gin"
    gin: GinConfig = STUDY_GIN
    k_folds: int = 3
    level: float = 0.95
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if len(self.p_intra_grid) == 0:
            raise ValueError("p_intra_grid must be non-empty")


def _seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def _one_replicate(net, fs, study: StudyConfig, kind: int, cell: int, rep: int):
    dgp = study.dgp.with_seed(_seed(study.seed, kind, cell, rep, 0))
    data = simulate(dgp, net)
    plan = kfold_partition(fs, study.k_folds, _seed(study.seed, kind, cell, rep, 1))
    learner = make_learner(study.learner,
                           gin_config=replace(study.gin, seed=_seed(study.seed, kind, cell, rep, 2)),
                           dgp_config=dgp)
    try:
        return cross_fit_estimate(net, data, fs, plan, learner, study.level,
                                  keep_residuals=False), ""
    except (DegenerateScore, ValueError) as exc:
        return None, str(exc)


def _run_replicates(net, fs, study, kind, cell):
    jobs = Parallel(n_jobs=study.jobs)(
        delayed(_one_replicate)(net, fs, study, kind, cell, rep)
        for rep in range(study.replicates))
    return list(jobs)


def density_study(study: StudyConfig):
    """One SBM graph per ``p_intra``, ``replicates`` fresh datasets on each.

    Returns ``(summary_rows, replicate_rows)``; cells where every replicate
    failed report NaN errors with the failure in ``note``.
    """
    summary, per_rep = [], []
    t0, a0 = study.dgp.theta0, study.dgp.alpha0
    for cell, p in enumerate(study.p_intra_grid):
        sbm = replace(study.sbm, p_intra=float(p), seed=_seed(study.seed, DENSITY, cell))
        net = sbm_generate(sbm)
        fs = greedy_focal_set(net, _seed(study.seed, DENSITY, cell, 0))
        results = _run_replicates(net, fs, study, DENSITY, cell)
        errs = []
        notes = set()
        for rep, (est, note) in enumerate(results):
            if est is None:
                notes.add(note)
                per_rep.append({"p_intra": p, "replicate": rep, "theta": math.nan,
                                "alpha": math.nan, "note": note})
                continue
            errs.append((est.theta - t0, est.alpha - a0))
            per_rep.append({"p_intra": p, "replicate": rep, "theta": est.theta,
                            "alpha": est.alpha, "note": ""})
        errs = np.asarray(errs).reshape(-1, 2)
        mse = (errs ** 2).mean(axis=0) if len(errs) else (math.nan, math.nan)
        row = {"p_intra": p, "n_f": fs.n_f, "edges": net.n_edges, "mse_theta": float(mse[0]),
               "mse_alpha": float(mse[1]), "n_ok": len(errs), "note": "; ".join(sorted(notes))}
        logger.info("density cell %s", row)
        summary.append(row)
    return summary, per_rep


@dataclass(frozen=True)
class CoverageResult:
    coverage_theta: float
    coverage_alpha: float
    n_trials: int
    n_ok: int
    n_f: int
    edges: int
    rows: list

    def to_dict(self) -> dict:
        return {"coverage_theta": self.coverage_theta, "coverage_alpha": self.coverage_alpha,
                "n_trials": self.n_trials, "n_ok": self.n_ok, "n_f": self.n_f,
                "edges": self.edges}


def coverage_study(study: StudyConfig) -> CoverageResult:
    """Fixed graph ``study.sbm``, ``replicates`` simulate-and-estimate rounds.

    Coverage is the fraction of successful trials whose interval contains
    the true parameter.
    """
    net = sbm_generate(replace(study.sbm, seed=_seed(study.seed, COVERAGE, 0)))
    fs = greedy_focal_set(net, _seed(study.seed, COVERAGE, 0, 0))
    t0, a0 = study.dgp.theta0, study.dgp.alpha0
    rows = []
    for trial, (est, note) in enumerate(_run_replicates(net, fs, study, COVERAGE, 0)):
        if est is None:
            rows.append({c: math.nan for c in COVERAGE_COLUMNS} | {"trial": trial, "note": note})
            continue
        ct, ca = est.covers(t0, a0)
        rows.append({"trial": trial, "theta": est.theta, "alpha": est.alpha,
                     "se_theta": est.se_theta, "se_alpha": est.se_alpha,
                     "ci_theta_lo": est.ci_theta[0], "ci_theta_hi": est.ci_theta[1],
                     "ci_alpha_lo": est.ci_alpha[0], "ci_alpha_hi": est.ci_alpha[1],
                     "cover_theta": int(ct), "cover_alpha": int(ca), "note": ""})
    ok = [r for r in rows if not r["note"]]
    cov_t = float(np.mean([r["cover_theta"] for r in ok])) if ok else math.nan
    cov_a = float(np.mean([r["cover_alpha"] for r in ok])) if ok else math.nan
    return CoverageResult(cov_t, cov_a, len(rows), len(ok), fs.n_f, net.n_edges, rows)


def write_rows(rows, columns, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
