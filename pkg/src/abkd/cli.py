"""Command-line front end.

Verbs: run, ablate, weight-init, export-maps, gen-sbm, gradcheck.
Exit codes: 0 success, 2 configuration or input error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import SWEEPABLE, ExperimentConfig
from .data import generate_sbm, save_citation_format
from .errors import AbkdError, ConfigError, ParameterError, ParseError
from .experiments import ablate, export_maps, run_experiment, weight_init_experiment
from .gradcheck import run_gradcheck


def _add_override_flags(p: argparse.ArgumentParser):
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--distillers", help="comma-separated distiller list")
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d-a", dest="d_a", type=int)
    p.add_argument("--distance", choices=["euclidean", "cosine"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--teacher-epochs", dest="teacher_epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--weight-init-epochs", dest="weight_init_epochs", type=int)
    p.add_argument("--weight-init-decay", dest="weight_init_decay", type=float)
    p.add_argument("--subspace-weight-decay", dest="subspace_weight_decay", type=float)
    p.add_argument("--no-subspace", action="store_true", help="disable the subspace projection")
    p.add_argument("--shared-att-proj", action="store_true",
                   help="share one attention projection across equal-width layers")
    p.add_argument("--no-node-mean", action="store_true",
                   help="use the raw squared norm instead of the node-mean distance")
    p.add_argument("--no-self-loops", action="store_true",
                   help="normalize the adjacency without self-loops")


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load_json(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.out:
        updates["out_dir"] = args.out
    if args.seeds:
        updates["seeds"] = [int(s) for s in args.seeds.split(",") if s]
    if args.distillers:
        updates["distillers"] = [d for d in args.distillers.split(",") if d]
    for key in ("beta", "alpha", "d_a", "distance", "epochs", "teacher_epochs",
                "lr", "snapshot_every", "weight_init_epochs", "weight_init_decay",
                "subspace_weight_decay"):
        value = getattr(args, key)
        if value is not None:
            updates[key] = value
    if args.no_subspace:
        updates["use_subspace"] = False
    if args.shared_att_proj:
        updates["shared_att_proj"] = True
    if args.no_node_mean:
        updates["node_mean"] = False
    if args.no_self_loops:
        updates["add_self_loops"] = False
    if updates:
        config = dataclasses.replace(config, **updates)
    return config.validate()


def _cmd_run(args) -> int:
    out, rows = run_experiment(_load_config(args))
    print(f"results written to {out}")
    for r in rows:
        print(f"  {r['distiller']}: {r['formatted']} over {r['n_seeds']} seeds")
    return 0


def _cmd_ablate(args) -> int:
    values = [v for v in args.values.split(",") if v]
    sweep_path, rows = ablate(_load_config(args), args.sweep, values)
    print(f"sweep written to {sweep_path}")
    for r in rows:
        print(f"  {args.sweep}={r['value']}: {r['formatted']}")
    return 0


def _cmd_weight_init(args) -> int:
    out_path, rows = weight_init_experiment(_load_config(args), args.run)
    print(f"comparison written to {out_path}")
    for r in rows:
        print(f"  {r['variant']}: {r['formatted']}")
    return 0


def _cmd_export_maps(args) -> int:
    written = export_maps(args.run, args.epoch, dest=args.dest)
    for path in written:
        print(path)
    return 0


def _cmd_gen_sbm(args) -> int:
    ds = generate_sbm(args.n_per_block, args.n_blocks, args.p_in, args.p_out,
                      args.features, args.signal, args.seed)
    content, cites = save_citation_format(ds, args.out)
    print(f"{ds.n_nodes} nodes, {ds.n_undirected_edges} undirected edges, "
          f"{ds.n_classes} classes")
    print(content)
    print(cites)
    return 0


def _cmd_gradcheck(args) -> int:
    worst, failures = run_gradcheck(trials=args.trials, seed=args.seed, verbose=True)
    print(f"worst relative error over {args.trials} trials: {worst:.3e}")
    if failures:
        print(f"{len(failures)} trial(s) failed")
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abkd",
        description="Train and distill graph convolutional networks with "
                    "attention-based layer matching.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="train teacher and distill students over seeds")
    p.add_argument("--config", help="experiment config JSON")
    _add_override_flags(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("ablate", help="hyperparameter sweep, one run per value")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--sweep", required=True, choices=list(SWEEPABLE))
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    _add_override_flags(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("weight-init", help="one-layer network from the attention-selected layer")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--run", required=True, help="directory of a finished run with an abkd cell")
    _add_override_flags(p)
    p.set_defaults(fn=_cmd_weight_init)

    p = sub.add_parser("export-maps", help="re-export snapshot maps as CSV and PGM")
    p.add_argument("--run", required=True, help="seed/distiller cell directory of a run")
    p.add_argument("--epoch", required=True, type=int)
    p.add_argument("--dest", help="destination directory (default: the run cell)")
    p.set_defaults(fn=_cmd_export_maps)

    p = sub.add_parser("gen-sbm", help="generate a block-model dataset in citation format")
    p.add_argument("--n-per-block", type=int, default=100)
    p.add_argument("--n-blocks", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.1)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--signal", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(fn=_cmd_gen_sbm)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss gradients")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParseError, ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AbkdError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
