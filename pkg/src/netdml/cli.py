"""Command-line interface.

Exit codes: 0 success, 2 degenerate score system, 3 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .dgp import DataFormatError, DgpConfig, read_node_csv, simulate, write_node_csv
from .estimator import DegenerateScore, cross_fit_estimate
from .focal import greedy_focal_set, kfold_partition, write_focal_set
from .netgraph import (GraphFormatError, SbmConfig, build_network, read_edge_list,
                       sbm_generate, write_edge_list, write_remap)
from .nuisance.gin import GinConfig
from .nuisance.learners import LEARNERS, make_learner
from .studies import (COVERAGE_COLUMNS, DENSITY_COLUMNS, DENSITY_REPLICATE_COLUMNS, STUDY_GIN,
                      StudyConfig, coverage_study, density_study, write_rows)

EXIT_OK, EXIT_DEGENERATE, EXIT_INPUT = 0, 2, 3

log = logging.getLogger("netdml")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


_DGP_FLAGS = {"theta0": float, "alpha0": float, "gamma": float, "noise_sd": float,
              "propensity_mode": str, "clamp_lo": float, "clamp_hi": float,
              "covariate_dim": int, "confounding": str}
_SBM_FLAGS = {"n_nodes": int, "n_blocks": int, "p_intra": float, "p_inter": float}


def _add_sbm(p, defaults):
    g = p.add_argument_group("graph (stochastic block model)")
    for name, typ in _SBM_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ, default=None,
                       help=f"default {defaults[name]}")
    p.set_defaults(_sbm_defaults=defaults)


def _add_dgp(p):
    g = p.add_argument_group("data generation")
    d = DgpConfig()
    for name, typ in _DGP_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ, default=None,
                       help=f"default {getattr(d, name)}")
    g.add_argument("--config", type=Path, help="flat JSON of SBM and DGP keys; flags override it")


def _add_gin(p, base: GinConfig):
    g = p.add_argument_group("GIN learner")
    g.add_argument("--epochs", type=int, default=base.epochs)
    g.add_argument("--hidden-dim", type=int, default=base.hidden_dim)
    g.add_argument("--batch-size", type=int, default=base.batch_size)
    g.add_argument("--learning-rate", type=float, default=base.learning_rate)
    g.add_argument("--dropout", type=float, default=base.dropout_p)
    g.add_argument("--gin-eps", type=float, default=base.gin_eps)


def _add_estimation(p, learner_default="gin"):
    p.add_argument("--learner", choices=LEARNERS, default=learner_default)
    p.add_argument("--k-folds", type=int, default=3)
    p.add_argument("--level", type=float, default=0.95)


def _config_file(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config file must hold a JSON object")
    known = set(_DGP_FLAGS) | set(_SBM_FLAGS) | {"seed"}
    unknown = set(cfg) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _resolve(args, names, defaults, file_cfg) -> dict:
    out = {}
    for name in names:
        val = getattr(args, name, None)
        if val is None:
            val = file_cfg.get(name, defaults.get(name))
        out[name] = val
    return out


def _sbm_config(args, file_cfg, seed) -> SbmConfig:
    vals = _resolve(args, _SBM_FLAGS, args._sbm_defaults, file_cfg)
    try:
        return SbmConfig(seed=seed, **vals)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid graph config: {exc}") from None


def _dgp_config(args, file_cfg, seed) -> DgpConfig:
    base = {f.name: getattr(DgpConfig(), f.name) for f in fields(DgpConfig)}
    vals = _resolve(args, _DGP_FLAGS, base, file_cfg)
    try:
        return DgpConfig(seed=seed, **vals)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid DGP config: {exc}") from None


def _gin_config(args, seed) -> GinConfig:
    try:
        return GinConfig(hidden_dim=args.hidden_dim, epochs=args.epochs,
                         batch_size=args.batch_size, learning_rate=args.learning_rate,
                         dropout_p=args.dropout, gin_eps=args.gin_eps, seed=seed)
    except ValueError as exc:
        raise InputError(f"invalid GIN config: {exc}") from None


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# -- commands ----------------------------------------------------------------

def cmd_generate_graph(args) -> int:
    file_cfg = _config_file(args)
    net = sbm_generate(_sbm_config(args, file_cfg, args.seed))
    write_edge_list(net, args.out)
    fs = greedy_focal_set(net, args.focal_seed)
    if args.focal_out:
        write_focal_set(fs, args.focal_out)
    print(json.dumps({"n": net.n, "edges": net.n_edges, "n_f": fs.n_f}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    file_cfg = _config_file(args)
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    out = Path(args.out)
    if args.graph is not None:
        try:
            net, labels = read_edge_list(args.graph, labels=None)
        except OSError as exc:
            raise InputError(str(exc)) from None
        if args.n_nodes is not None and args.n_nodes > net.n:
            net = build_network(net.edges(), n_nodes=args.n_nodes)
            labels = labels + [str(i) for i in range(len(labels), args.n_nodes)]
    else:
        net = sbm_generate(_sbm_config(args, file_cfg, seed))
        labels = None
    dgp = _dgp_config(args, file_cfg, seed)
    data = simulate(dgp, net)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_edge_list(net, out / "edges.txt", labels)
        write_node_csv(data, out / "nodes.csv", ids=labels)
        dgp.save(out / "dgp.json")
    except OSError as exc:
        raise InputError(f"cannot write outputs: {exc}") from None
    fs = greedy_focal_set(net, 0)
    print(json.dumps({"n": net.n, "edges": net.n_edges, "n_f": fs.n_f,
                      "treated": int(data.t.sum()), "out": str(out)}))
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        ids, data = read_node_csv(args.nodes)
        net, labels = read_edge_list(args.edges, labels=ids)
    except OSError as exc:
        raise InputError(str(exc)) from None
    if args.remap_out:
        write_remap(labels, args.remap_out)
    fs = greedy_focal_set(net, args.focal_seed)
    if args.focal_out:
        write_focal_set(fs, args.focal_out)
    try:
        plan = kfold_partition(fs, args.k_folds, args.seed)
    except ValueError as exc:
        raise InputError(f"fold error: {exc}") from None
    dgp = None
    if args.learner == "oracle":
        if args.dgp_config is None:
            raise InputError("--learner oracle requires --dgp-config")
        try:
            dgp = DgpConfig.load(args.dgp_config)
        except (OSError, ValueError, TypeError) as exc:
            raise InputError(f"cannot read DGP config: {exc}") from None
    learner = make_learner(args.learner, gin_config=_gin_config(args, args.seed), dgp_config=dgp)
    try:
        est = cross_fit_estimate(net, data, fs, plan, learner, args.level)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(est.to_json(indent=2) + "\n", args.out)
    return EXIT_OK


def _study(args) -> StudyConfig:
    file_cfg = _config_file(args)
    return StudyConfig(
        sbm=_sbm_config(args, file_cfg, 0), dgp=_dgp_config(args, file_cfg, 0),
        p_intra_grid=tuple(getattr(args, "p_intra_grid", None) or (0.05,)),
        replicates=args.replicates, learner=args.learner,
        gin=_gin_config(args, 0), k_folds=args.k_folds, level=args.level,
        seed=args.seed, jobs=args.jobs)


def cmd_density_study(args) -> int:
    study = _study(args)
    summary, per_rep = density_study(study)
    write_rows(summary, DENSITY_COLUMNS, args.out)
    if args.replicate_out:
        write_rows(per_rep, DENSITY_REPLICATE_COLUMNS, args.replicate_out)
    for row in summary:
        print(json.dumps(row))
    return EXIT_OK


def cmd_coverage_study(args) -> int:
    study = _study(args)
    res = coverage_study(study)
    write_rows(res.rows, COVERAGE_COLUMNS, args.out)
    text = json.dumps(res.to_dict())
    if args.summary_out:
        Path(args.summary_out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netdml", description="Direct and peer effects on a single network.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate-graph", help="sample an SBM graph to an edge list")
    _add_sbm(p, {"n_nodes": 3000, "n_blocks": 200, "p_intra": 0.05, "p_inter": 1e-4})
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--focal-seed", type=int, default=0)
    p.add_argument("--focal-out", type=Path, help="write focal node ids, one per line")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate_graph)

    p = sub.add_parser("simulate", help="generate a graph and a dataset on it")
    _add_sbm(p, {"n_nodes": 300, "n_blocks": 20, "p_intra": 0.05, "p_inter": 0.001})
    _add_dgp(p)
    p.add_argument("--graph", type=Path, help="use this edge list instead of sampling an SBM")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True,
                   help="output directory for edges.txt, nodes.csv and dgp.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate (theta, alpha) from an edge list and node CSV")
    p.add_argument("edges", type=Path)
    p.add_argument("nodes", type=Path)
    _add_estimation(p)
    _add_gin(p, GinConfig())
    p.add_argument("--seed", type=int, default=0, help="fold and learner seed")
    p.add_argument("--focal-seed", type=int, default=0)
    p.add_argument("--focal-out", type=Path)
    p.add_argument("--remap-out", type=Path, help="write the label,id node mapping")
    p.add_argument("--dgp-config", type=Path, help="generating config, for --learner oracle")
    p.add_argument("--out", type=Path, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_estimate)

    for name, func, sbm_defaults in (
            ("density-study", cmd_density_study,
             {"n_nodes": 3000, "n_blocks": 200, "p_intra": 0.05, "p_inter": 1e-4}),
            ("coverage-study", cmd_coverage_study,
             {"n_nodes": 1000, "n_blocks": 66, "p_intra": 0.05, "p_inter": 1e-4})):
        p = sub.add_parser(name)
        _add_sbm(p, sbm_defaults)
        _add_dgp(p)
        _add_estimation(p)
        _add_gin(p, STUDY_GIN)
        p.add_argument("--replicates", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", type=Path, required=True, help="CSV output path")
        if name == "density-study":
            p.add_argument("--p-intra-grid", type=_floats, default=(0.01, 0.05, 0.1, 0.25, 0.5))
            p.add_argument("--replicate-out", type=Path)
        else:
            p.add_argument("--summary-out", type=Path)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DegenerateScore as exc:
        print(f"error: degenerate score: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, GraphFormatError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
