"""Experiment runners behind the command line.

Each runner takes a validated :class:`ExperimentConfig`, writes its results
into a :class:`RunDirectory` and returns a JSON-ready summary.  Result files
depend only on the config; wall-clock data goes to ``meta.json``.
"""

import io
import json
import math
import os
import platform
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .activations import get, names
from .config import ExperimentConfig
from .data import load_cifar10, synthetic_blobs
from .errors import FilesystemError
from .hermite import expand
from .kernels import BACKEND
from .mlp import SGD, TrainState, init_model, layer_spectra, resolve_activation, save_checkpoint, train
from .normalizer import (NormalizationContext, compare_to_published, compute_coefficients, normalize,
                         recompute_diagnostics)
from .spectral import (empirical_spectrum, ks_distance, moment_generating_function, mp_cdf, mp_density,
                       wishart_sample)

OUTPUT_ROOT_ENV = "STATNORM_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "statnorm-runs"
TABLE_TOL = 1e-4
DEFAULT_LR_GRID = (0.01, 0.03, 0.003)


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def output_root(cfg):
    return cfg.output_dir or os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT


class RunDirectory:
    """``<root>/<kind>-<config hash>/`` holding the config copy and all outputs."""

    def __init__(self, cfg, root=None):
        self.cfg = cfg
        self.path = os.path.join(root or output_root(cfg), f"{cfg.kind}-{cfg.digest()}")
        self.files = []
        self._started = time.time()
        try:
            os.makedirs(self.path, exist_ok=True)
        except OSError as exc:
            raise FilesystemError(f"cannot create output directory {self.path}: {exc.strerror or exc}") from exc
        # the location is not part of the experiment; reruns elsewhere stay byte-identical
        saved = ExperimentConfig.from_dict({**cfg.to_dict(), "output_dir": None})
        self.write_text("config.json", saved.to_json())

    def write_text(self, name, text):
        full = os.path.join(self.path, name)
        try:
            os.makedirs(os.path.dirname(full), exist_ok=True)
            with open(full, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise FilesystemError(f"cannot write {full}: {exc.strerror or exc}") from exc
        self.files.append(name)
        return full

    def write_checkpoint(self, name, model):
        full = os.path.join(self.path, name)
        try:
            os.makedirs(os.path.dirname(full), exist_ok=True)
            save_checkpoint(model, full)
        except OSError as exc:
            raise FilesystemError(f"cannot write {full}: {exc.strerror or exc}") from exc
        self.files.append(name)
        return full

    def write_json(self, name, obj):
        return self.write_text(name, dumps(obj))

    def finish(self, status="ok"):
        end = time.time()
        meta = {
            "started": datetime.fromtimestamp(self._started, timezone.utc).isoformat(),
            "finished": datetime.fromtimestamp(end, timezone.utc).isoformat(),
            "seconds": round(end - self._started, 3),
            "status": status,
            "version": __version__,
            "backend": BACKEND,
            "python": platform.python_version(),
            "files": sorted(self.files),
        }
        with open(os.path.join(self.path, "meta.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps(meta))


def load_dataset(d):
    """In-memory dataset described by a :class:`DatasetDescriptor`."""
    if d.kind == "cifar10-binary":
        return load_cifar10(d.path, n_train=d.n_train, n_test=d.n_test, normalize=d.normalize)
    return synthetic_blobs(classes=d.classes, n_train=d.n_train, n_test=d.n_test, dim=d.input_dim, seed=d.seed,
                           separation=d.separation, normalize=d.normalize)


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating, np.integer)):
        return repr(v.item())
    return str(v)


def _lr_tag(lr):
    return f"{lr:g}"


# ---------------------------------------------------------------------------
# table / normalize / mp-check


def run_table(cfg, run):
    ctx = NormalizationContext(cfg.sigma_w, cfg.sigma_x)
    coeffs = [compute_coefficients(get(n), ctx) for n in names()]
    rows = [(c.activation, c.alpha, c.beta, c.gamma, c.m2_squared, c.m4, c.xi, c.eta, c.rule_kind,
             ";".join(c.flags)) for c in coeffs]
    run.write_text("table.csv", _csv(("name", "alpha", "beta", "gamma", "m2_squared", "m4", "xi", "eta", "rule",
                                      "flags"), rows))
    diffs = compare_to_published(coeffs) if ctx.key() == (1.0, 1.0, 1.0) else []
    run.write_text("table_diff.csv", _csv(
        ("activation", "column", "computed", "published", "error", "within_tol"),
        [(d.activation, d.column, d.computed, d.published, d.error, d.error < TABLE_TOL) for d in diffs]))
    mismatches = [{"activation": d.activation, "column": d.column, "computed": d.computed,
                   "published": d.published} for d in diffs if not d.error < TABLE_TOL]
    summary = {"rows": len(rows), "compared_cells": len(diffs), "mismatches": mismatches,
               "gauss_hermite_flags": {c.activation: list(c.flags) for c in coeffs if c.flags}}
    run.write_json("table_report.json", summary)
    return summary


def normalize_report(name, ctx, K):
    a = get(name)
    c = compute_coefficients(a, ctx)
    a_h = normalize(a, c)
    e = expand(a_h, K)
    raw = expand(a, K)
    xi_h, eta_h = recompute_diagnostics(a_h)
    report = {
        "activation": name,
        "alpha": c.alpha, "beta": c.beta, "gamma": c.gamma, "xi": c.xi, "eta": c.eta, "m2": c.m2, "m4": c.m4,
        "truncation": K,
        "f0": float(e.coefficients[0]),
        "f1": float(e.coefficients[1]),
        "tail_energy": e.tail_energy,
        "normalized_xi": xi_h,
        "normalized_eta": eta_h,
        "xi_hermite": float(raw.coefficients[1]) ** 2,
        "flags": list(c.flags),
    }
    return report, e


def run_normalize(cfg, run):
    ctx = NormalizationContext(cfg.sigma_w, cfg.sigma_x)
    out = []
    for name in cfg.activations:
        base = name[:-2] if name.endswith("_H") else name
        report, e = normalize_report(base, ctx, cfg.truncation)
        run.write_text(f"hermite-{base}.csv", e.to_csv())
        out.append(report)
    summary = {"activations": out}
    run.write_json("normalize.json", summary)
    return summary


OFF_SUPPORT_POINTS = (-3.0, -1.0, -0.25, 0.1, 0.2, 0.24, 0.1 + 0.3j, -0.5 + 2j, 3j, -3j, 1 + 1j, 2 - 0.5j,
                      5 + 1j, 0.3 + 0.2j, -10.0, -0.01, 0.05j, 0.25 + 0.1j, 10 - 10j, -2 - 2j)


def mp_functional_residual(phi, z, g):
    """Residual of ``z g (1 - phi + phi g) - g + 1``; for ``phi = 1`` this is ``z g**2 - g + 1``."""
    return abs(z * g * (1 - phi + phi * g) - g + 1)


def run_mp_check(cfg, run):
    phi = cfg.phi
    d = mp_density(phi)
    mass = d.expect(np.ones_like)
    mean = d.expect(lambda x: x)
    residuals = []
    for z in OFF_SUPPORT_POINTS:
        # the points are chosen for phi = 1; skip any that land on a narrower support
        w = 1.0 / z if z != 0 else math.inf
        if abs(complex(w).imag) < 1e-12 and d.support[0] <= complex(w).real <= d.support[1]:
            continue
        g = moment_generating_function(d, z)
        residuals.append({"z": [complex(z).real, complex(z).imag], "residual": mp_functional_residual(phi, z, g)})
    rng = np.random.default_rng(cfg.seeds[0])
    spec = empirical_spectrum(wishart_sample(cfg.matrix_size, rng, phi), {"n": cfg.matrix_size, "phi": phi})
    ks = ks_distance(spec, lambda x: mp_cdf(phi, x))
    run.write_text("mp_density.csv", d.to_csv())
    run.write_text("wishart_spectrum.csv", spec.to_csv())
    summary = {
        "phi": phi,
        "support": list(d.support),
        "mass": mass,
        "mean": mean,
        "max_quadratic_residual": max(r["residual"] for r in residuals),
        "quadratic_residuals": residuals,
        "matrix_size": cfg.matrix_size,
        "ks_distance": ks,
    }
    run.write_json("mp_check.json", summary)
    return summary


# ---------------------------------------------------------------------------
# training experiments


def _train_one(cfg, dataset, activation, depth, seed, lr, epochs, stop_at=None, on_epoch=None):
    model = init_model(depth, cfg.width, activation, init=cfg.init, seed=seed, input_dim=dataset.input_dim,
                       classes=dataset.classes, sigma_w=cfg.sigma_w)
    opt = SGD(lr, cfg.optimizer.momentum, cfg.optimizer.batch_size)
    state = TrainState(model, opt, seed=seed)
    log = train(state, dataset, epochs, on_epoch=on_epoch, stop_at=stop_at)
    return state, log


def _arm_name(activation, depth, seed, lr=None):
    lr_part = "" if lr is None else f"-lr{_lr_tag(lr)}"
    return f"{activation}-d{depth}{lr_part}-s{seed}"


def run_train(cfg, run):
    dataset = load_dataset(cfg.dataset)
    lr = cfg.optimizer.learning_rate
    arms = []
    for activation in cfg.activations:
        resolve_activation(activation)
        for depth in cfg.depths:
            for seed in cfg.seeds:
                state, log = _train_one(cfg, dataset, activation, depth, seed, lr, cfg.epochs)
                name = _arm_name(activation, depth, seed)
                run.write_text(f"logs/{name}.jsonl", log.to_jsonl())
                run.write_checkpoint(f"checkpoints/{name}.bin", state.model)
                arms.append({"activation": activation, "depth": depth, "seed": seed, "learning_rate": lr,
                             "status": log.status, "epochs": len(log.records),
                             "final_test_acc": log.final_test_accuracy(),
                             "best_test_acc": log.best_test_accuracy(),
                             "epochs_to_2x_chance": log.epochs_to(2.0 / dataset.classes)})
    summary = {"arms": arms}
    run.write_json("train.json", summary)
    return summary


def run_depth_sweep(cfg, run, progress=None):
    """Trainability versus depth.

    An arm is trainable if its test accuracy after the full epoch budget is
    at least twice chance; the first epoch reaching that level is reported
    too.  A depth counts as trainable for an activation when a majority of
    seeds are trainable under some learning rate of the grid, tried in the
    listed order.  Each arm also records the spread of every layer's final
    ``W W^T`` spectrum.
    """
    dataset = load_dataset(cfg.dataset)
    threshold = 2.0 / dataset.classes
    majority = len(cfg.seeds) // 2 + 1
    grid = cfg.lr_grid()
    report = {"threshold": threshold, "majority": majority, "learning_rates": grid, "epochs": cfg.epochs,
              "width": cfg.width, "seeds": list(cfg.seeds), "activations": {}}
    for activation in cfg.activations:
        resolve_activation(activation)
        per_depth = []
        for depth in cfg.depths:
            tried = []
            verdict_lr = None
            for lr in grid:
                seeds = []
                for seed in cfg.seeds:
                    state, log = _train_one(cfg, dataset, activation, depth, seed, lr, cfg.epochs)
                    run.write_text(f"arms/{_arm_name(activation, depth, seed, lr)}.jsonl", log.to_jsonl())
                    final = log.final_test_accuracy()
                    seeds.append({"seed": seed, "trainable": not log.failed and final >= threshold,
                                  "terminal_test_acc": final, "best_test_acc": log.best_test_accuracy(),
                                  "epochs_to_threshold": log.epochs_to(threshold), "failed_at": log.failed_at,
                                  "layer_spectrum_std": [sp.std for sp in layer_spectra(state.model)]})
                    if progress:
                        progress(activation, depth, lr, seeds[-1])
                n_ok = sum(s["trainable"] for s in seeds)
                tried.append({"learning_rate": lr, "fraction_trainable": n_ok / len(seeds), "seeds": seeds})
                if n_ok >= majority:
                    verdict_lr = lr
                    break
            per_depth.append({"depth": depth, "trainable": verdict_lr is not None, "learning_rate": verdict_lr,
                              "runs": tried})
        ok = [d["depth"] for d in per_depth if d["trainable"]]
        report["activations"][activation] = {"max_trainable_depth": max(ok) if ok else 0, "depths": per_depth}
    run.write_json("depth_sweep.json", report)
    return report


def spectrum_records(model, epoch):
    return [s.summary() for s in layer_spectra(model, epoch)]


def run_spectra(cfg, run):
    """Per-layer ``W W^T`` spectra at the configured epochs."""
    dataset = load_dataset(cfg.dataset)
    lr = cfg.optimizer.learning_rate
    wanted = set(cfg.spectra_epochs)
    records = []
    for activation in cfg.activations:
        resolve_activation(activation)
        for depth in cfg.depths:
            for seed in cfg.seeds:
                arm = _arm_name(activation, depth, seed)

                def snapshot(model, epoch):
                    for s in layer_spectra(model, epoch):
                        layer = s.source["layer"]
                        run.write_text(f"spectra/{arm}-e{epoch}-l{layer}.csv", s.to_csv())
                        records.append({"activation": activation, "depth": depth, "seed": seed, **s.summary()})

                if 0 in wanted:
                    model = init_model(depth, cfg.width, activation, init=cfg.init, seed=seed,
                                       input_dim=dataset.input_dim, classes=dataset.classes, sigma_w=cfg.sigma_w)
                    snapshot(model, 0)
                if max(wanted) > 0:
                    _, log = _train_one(cfg, dataset, activation, depth, seed, lr, max(wanted),
                                        on_epoch=lambda st, rec: snapshot(st.model, rec["epoch"])
                                        if rec["epoch"] in wanted else None)
                    run.write_text(f"logs/{arm}.jsonl", log.to_jsonl())
    summary = {"layers": records, "flattening": flattening(records)}
    run.write_json("spectra.json", summary)
    return summary


def flattening(records):
    """Median over seeds of the spectrum std in layer 2 and in the last layer."""
    groups = {}
    for r in records:
        groups.setdefault((r["activation"], r["depth"], r["epoch"]), []).append(r)
    out = []
    for (activation, depth, epoch), rs in sorted(groups.items()):
        if depth < 2:
            continue
        second = [r["std"] for r in rs if r["layer"] == 2]
        last = [r["std"] for r in rs if r["layer"] == depth]
        if not second or not last:
            continue
        out.append({"activation": activation, "depth": depth, "epoch": epoch,
                    "median_std_layer2": float(np.median(second)), "median_std_last": float(np.median(last)),
                    "flattens": bool(np.median(last) <= np.median(second))})
    return out


RUNNERS = {
    "table": run_table,
    "normalize": run_normalize,
    "mp-check": run_mp_check,
    "train": run_train,
    "depth-sweep": run_depth_sweep,
    "spectra": run_spectra,
}


def run_experiment(cfg, root=None):
    """Validate, run and record one experiment; returns ``(run directory, summary)``."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    cfg.validate()
    run = RunDirectory(cfg, root)
    try:
        summary = RUNNERS[cfg.kind](cfg, run)
    except Exception:
        run.finish("error")
        raise
    run.finish()
    return run, summary
