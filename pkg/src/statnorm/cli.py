"""``statnorm`` command line.

Values come from dataclass defaults, then ``--config FILE`` (JSON), then
flags; later sources win.  Results go to ``<root>/<kind>-<config hash>/``
where the root is ``--output-root``, else ``$STATNORM_OUTPUT_ROOT``, else
``./statnorm-runs``.  Exit codes: 0 success, 2 invalid input or config,
3 numeric failure, 4 filesystem or file-format failure, 5 capacity limit.
"""

import argparse
import json
import sys

from .config import ExperimentConfig, apply_overrides, load_config
from .errors import StatnormError
from .experiments import DEFAULT_LR_GRID, run_experiment


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--output-root", help="directory that receives the run directory")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")


def _add_scale(p):
    p.add_argument("--sigma-w", type=float)
    p.add_argument("--sigma-x", type=float)


def _add_training(p, sweep=False):
    if sweep:
        p.add_argument("--activations", type=_names, help="comma-separated, e.g. relu,tilted_relu,abs")
        p.add_argument("--depths", type=_ints, help="comma-separated depths")
        p.add_argument("--lr-grid", type=_floats,
                       help=f"learning rates tried in order (default {','.join(map(str, DEFAULT_LR_GRID))})")
    else:
        p.add_argument("--activation", type=_names, dest="activations", help="name or comma-separated names")
        p.add_argument("--depth", type=_ints, dest="depths", help="depth or comma-separated depths")
    p.add_argument("--width", type=int)
    p.add_argument("--init", choices=("orthogonal", "gaussian"))
    p.add_argument("--lr", type=float, help="SGD learning rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", type=_ints, help="comma-separated seeds")
    p.add_argument("--dataset", choices=("synthetic-blobs", "cifar10-binary"))
    p.add_argument("--data-path", help="CIFAR-10 binary directory")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--input-dim", type=int)
    p.add_argument("--separation", type=float, help="synthetic class-centre scale")
    p.add_argument("--data-seed", type=int)
    _add_scale(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="statnorm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True, metavar="command")

    p = sub.add_parser("table", help="coefficient table for every registry activation")
    _add_common(p)
    _add_scale(p)

    p = sub.add_parser("normalize", help="coefficients and Hermite expansion of one activation")
    p.add_argument("activation")
    p.add_argument("--truncation", type=int, help="Hermite truncation order K")
    _add_common(p)
    _add_scale(p)

    p = sub.add_parser("mp-check", help="Marcenko-Pastur density, functional equation and Wishart sample")
    p.add_argument("--phi", type=float, help="aspect ratio in (0, 1]")
    p.add_argument("--size", type=int, dest="matrix_size", help="Wishart matrix size")
    p.add_argument("--seed", type=int)
    _add_common(p)

    p = sub.add_parser("train", help="train MLPs and write JSON-lines logs and checkpoints")
    _add_training(p)
    _add_common(p)

    p = sub.add_parser("depth-sweep", help="trainability versus depth per activation")
    _add_training(p, sweep=True)
    _add_common(p)

    p = sub.add_parser("spectra", help="per-layer W W^T spectra at chosen epochs")
    _add_training(p)
    p.add_argument("--at-epochs", type=_ints, dest="spectra_epochs", help="comma-separated epochs (0 = init)")
    _add_common(p)
    return parser


_FLAG_PATHS = {
    "activations": "activations", "depths": "depths", "width": "width", "init": "init",
    "lr": "optimizer.learning_rate", "momentum": "optimizer.momentum", "batch_size": "optimizer.batch_size",
    "lr_grid": "learning_rates", "epochs": "epochs", "seeds": "seeds", "dataset": "dataset.kind",
    "data_path": "dataset.path", "n_train": "dataset.n_train", "n_test": "dataset.n_test",
    "input_dim": "dataset.input_dim", "separation": "dataset.separation", "data_seed": "dataset.seed",
    "sigma_w": "sigma_w", "sigma_x": "sigma_x", "truncation": "truncation", "phi": "phi",
    "matrix_size": "matrix_size", "spectra_epochs": "spectra_epochs", "output_root": "output_dir",
}


def config_from_args(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {"kind": args.kind}
    if args.kind == "normalize":
        overrides["activations"] = [args.activation]
    if args.kind == "mp-check" and args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.kind == "depth-sweep" and not args.config:
        # sweep defaults: the three-rate grid and five seeds
        overrides["learning_rates"] = list(DEFAULT_LR_GRID)
        overrides["seeds"] = [0, 1, 2, 3, 4]
        overrides["activations"] = ["relu", "tilted_relu", "abs"]
        overrides["depths"] = [5, 10, 15, 20, 25]
    if args.kind in ("train", "depth-sweep", "spectra"):
        # a dataset switch to CIFAR-10 implies its fixed shape
        if getattr(args, "dataset", None) == "cifar10-binary":
            overrides["dataset.input_dim"] = 3072
    for attr, path in _FLAG_PATHS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[path] = value
    return apply_overrides(cfg, overrides)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        run, summary = run_experiment(cfg)
    except StatnormError as exc:
        print(f"statnorm {args.kind}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    if not args.quiet:
        print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"results: {run.path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
