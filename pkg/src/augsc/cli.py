"""Command-line harness.

Usage::

    augsc <command> [--config run.json] [--out DIR] [flags]

Commands: ``synth``, ``augment``, ``cluster``, ``semi``, ``diag``, ``eval``
and ``sweep``. The config is a JSON object with the optional sections
``dataset``, ``augmentation``, ``solver``, ``clustering`` and ``output``;
flags override config values. Every run writes ``manifest.json`` (command,
effective config, its SHA-256, seed, package version) next to its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print one JSON line ``{"error": ..., "type": ..., "exit_code": ...}``
on stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import (
    Flip,
    ImageGeometry,
    InterpolationSpec,
    Rotate,
    Scale,
    linear_interpolation_augment,
    random_instance_augment,
)
from .core import AugmentedDictionary, DataMatrix, LabelState, SolverConfig, normalize_columns
from .errors import AugscError, DataError, NumericalError, UsageError
from .experiments import summarize, sweep
from .geometry import check_preserving_condition
from .ingest import load_idx, load_labels, load_matrix, load_pgm_dir, save_labels, save_matrix
from .metrics import error_rate, nmi, subspace_preserving_rate
from .semi import run_as_sc
from .solvers import solve_ak_sc, solve_self_expressive_full
from .spectral import spectral_cluster
from .synth import make_bases, sample_union

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_CONFIG = {
    "dataset": {"source": None, "format": None, "geometry": None, "labels": None, "truth": None},
    "augmentation": {
        "strategies": [],
        "reps": 1,
        "ranges": {"rotate": [-10.0, 10.0], "scale": [0.9, 1.1]},
        "interpolation": None,
        "seed": 0,
    },
    "solver": {},
    "clustering": {"p": None, "seed": 0},
    "output": {"directory": ".", "dumps": []},
}

TRACE_COLUMNS = ["iteration", "err", "f_change", "c_change", "admm_converged", "admm_residual", "admm_iterations"]
METRIC_COLUMNS = ["metric", "value"]
GRID_COLUMNS = [
    "theta",
    "label_pct",
    "n_aug",
    "n_seeds",
    "first_err_mean",
    "first_err_std",
    "final_err_mean",
    "final_err_std",
    "final_f_change_mean",
    "max_outer_iterations",
    "admm_all_converged",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    return _merge(DEFAULT_CONFIG, user)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def solver_config(cfg: dict) -> SolverConfig:
    try:
        return SolverConfig(**cfg["solver"])
    except TypeError as exc:
        raise UsageError(f"solver section: {exc}") from exc


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


def _manifest(out: Path, command: str, cfg: dict, seed):
    doc = {
        "command": command,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "seed": seed,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_dataset(cfg: dict):
    """Data matrix (normalized), optional geometry, labels and truth."""
    ds = cfg["dataset"]
    src = ds.get("source")
    if not src:
        raise UsageError("dataset.source (or --data) is required")
    fmt = (ds.get("format") or "").upper() or None
    geom = ImageGeometry(*ds["geometry"]) if ds.get("geometry") else None
    if fmt == "IDX":
        x, geom = load_idx(src)
    elif fmt == "PGM":
        if geom is None:
            raise UsageError("PGM directories need dataset.geometry = [h, w]")
        x, geom = load_pgm_dir(src, (geom.height, geom.width))
    else:
        x = load_matrix(src, fmt)
    x = normalize_columns(x)
    labels = load_labels(ds["labels"]) if ds.get("labels") else None
    truth = load_labels(ds["truth"]) if ds.get("truth") else None
    for name, vec in (("labels", labels), ("truth", truth)):
        if vec is not None and vec.size != x.n:
            raise DataError(f"{name} file has {vec.size} entries for {x.n} samples")
    return x, geom, labels, truth


def _num_clusters(cfg: dict, labels, truth) -> int:
    p = cfg["clustering"].get("p")
    if p is None:
        for vec in (truth, labels):
            if vec is not None and (vec >= 0).any():
                return int(vec.max()) + 1
        raise UsageError("clustering.p is required when no labels are given")
    return int(p)


def build_dictionary(x: DataMatrix, geom, cfg: dict, label_state: LabelState | None) -> AugmentedDictionary:
    aug = cfg["augmentation"]
    if aug.get("interpolation"):
        if label_state is None:
            raise UsageError("interpolation augmentation needs labels")
        spec = InterpolationSpec(**{"seed": aug.get("seed", 0), **aug["interpolation"]})
        return linear_interpolation_augment(x, label_state, spec)
    names = aug.get("strategies") or []
    if not names:
        return AugmentedDictionary.plain(x)
    if geom is None:
        raise UsageError("instance augmentation needs dataset.geometry = [h, w]")
    ranges = aug.get("ranges", {})
    strategies = []
    for name in names:
        if name == "flip":
            strategies.append(Flip())
        elif name == "rotate":
            strategies.append(Rotate(*ranges.get("rotate", (-10.0, 10.0))))
        elif name == "scale":
            strategies.append(Scale(*ranges.get("scale", (0.9, 1.1))))
        else:
            raise UsageError(f"unknown augmentation strategy {name!r}")
    return random_instance_augment(x, geom, strategies, reps=int(aug.get("reps", 1)), seed=int(aug.get("seed", 0)))


def _metrics_rows(truth, pred, cf=None):
    rows = [("error_rate", error_rate(truth, pred)), ("nmi", nmi(truth, pred))]
    if cf is not None:
        rows.append(("subspace_preserving_rate", subspace_preserving_rate(cf, truth)))
    return rows


def cmd_synth(args, cfg):
    out = _out_dir(cfg)
    x, truth = sample_union(make_bases(args.theta), args.n_per, args.seed)
    ext = "bin" if args.format.upper() == "BIN" else "csv"
    save_matrix(out / f"data.{ext}", x, args.format)
    save_labels(out / "truth.txt", truth)
    _manifest(out, "synth", {**cfg, "synth": vars_subset(args, "theta", "n_per", "seed", "format")}, args.seed)
    print(f"wrote {x.n} samples of dimension {x.d} to {out}")


def vars_subset(args, *names):
    return {k: getattr(args, k) for k in names}


def cmd_augment(args, cfg):
    out = _out_dir(cfg)
    x, geom, labels, truth = load_dataset(cfg)
    ls = None
    if labels is not None:
        ls = LabelState.from_labels(labels, _num_clusters(cfg, labels, truth))
    dic = build_dictionary(x, geom, cfg, ls)
    save_matrix(out / "dictionary.bin", dic.columns, "BIN")
    rows = [(i, j, dic.strategy_tags[i - dic.n]) for i, j in zip(*np.nonzero(dic.parents))]
    _write_csv(out / "parents.csv", ["column", "parent", "strategy"], rows)
    _manifest(out, "augment", cfg, cfg["augmentation"].get("seed", 0))
    print(f"dictionary: {dic.n} originals + {dic.n_tilde - dic.n} augmented columns")


def cmd_cluster(args, cfg):
    out = _out_dir(cfg)
    x, geom, labels, truth = load_dataset(cfg)
    p = _num_clusters(cfg, labels, truth)
    scfg = solver_config(cfg)
    dic = build_dictionary(x, geom, cfg, None)
    coef = solve_self_expressive_full(x, dic, scfg) if scfg.is_full else solve_ak_sc(x, dic, scfg)
    seed = int(cfg["clustering"].get("seed", 0))
    res = spectral_cluster(coef.af, p, seed=seed)
    save_labels(out / "labels.txt", res.labels)
    rows = [("admm_converged", bool(coef.converged)), ("admm_residual", coef.residual)]
    if truth is not None:
        rows = _metrics_rows(truth, res.labels, coef.cf) + rows
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
    if "af" in cfg["output"].get("dumps", []):
        save_matrix(out / "af.bin", coef.af, "BIN")
    _manifest(out, "cluster", cfg, seed)
    for name, val in rows:
        print(f"{name}: {_cell(val)}")


def cmd_semi(args, cfg):
    out = _out_dir(cfg)
    x, geom, labels, truth = load_dataset(cfg)
    if labels is None or not (labels >= 0).any():
        raise UsageError("semi needs at least one labeled sample; use 'cluster' for unlabeled data")
    p = _num_clusters(cfg, labels, truth)
    ls = LabelState.from_labels(labels, p)
    scfg = solver_config(cfg)
    dic = build_dictionary(x, geom, cfg, ls)
    res = run_as_sc(x, dic, ls, scfg, truth=truth)
    save_labels(out / "labels.txt", res.labels)
    _write_csv(
        out / "trace.csv",
        TRACE_COLUMNS,
        [
            (t.iteration, "" if t.err is None else t.err, t.f_change, t.c_change, t.admm_converged, t.admm_residual, t.admm_iterations)
            for t in res.trace
        ],
    )
    rows = [("outer_iterations", len(res.trace)), ("converged", res.converged)]
    if truth is not None:
        rows = _metrics_rows(truth, res.labels, res.coef.cf) + rows
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
    if "af" in cfg["output"].get("dumps", []):
        save_matrix(out / "af.bin", res.coef.af, "BIN")
    if "f" in cfg["output"].get("dumps", []):
        save_matrix(out / "f.bin", res.f, "BIN")
    _manifest(out, "semi", cfg, scfg.seed)
    for name, val in rows:
        print(f"{name}: {_cell(val)}")


def cmd_diag(args, cfg):
    out = _out_dir(cfg)
    if cfg["dataset"].get("source"):
        x, _, _, truth = load_dataset(cfg)
        if truth is None:
            raise UsageError("diag needs dataset.truth")
        seed = None
    else:
        x, truth = sample_union(make_bases(args.theta), args.n_per, args.seed)
        seed = args.seed
        cfg = {**cfg, "synth": vars_subset(args, "theta", "n_per", "seed")}
    rows = []
    for j in range(x.n):
        chk = check_preserving_condition(x, truth, j)
        rows.append((j, int(truth[j]), chk.mu, chk.r, chk.satisfied))
    _write_csv(out / "diag.csv", ["sample", "label", "mu", "r", "satisfied"], rows)
    _manifest(out, "diag", cfg, seed)
    print(f"{sum(r[4] for r in rows)}/{len(rows)} samples satisfy mu < r")


def cmd_eval(args, cfg):
    out = _out_dir(cfg)
    truth = load_labels(args.truth)
    pred = load_labels(args.pred)
    rows = _metrics_rows(truth, pred)
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
    _manifest(out, "eval", {**cfg, "eval": vars_subset(args, "truth", "pred")}, None)
    for name, val in rows:
        print(f"{name}: {_cell(val)}")


def cmd_sweep(args, cfg):
    out = _out_dir(cfg)
    scfg = solver_config(cfg)
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = sweep(args.thetas, args.label_pcts, args.augs, seeds, scfg, jobs=args.jobs)
    trial_cols = list(rows[0].keys()) if rows else []
    _write_csv(out / "trials.csv", trial_cols, [[r[c] for c in trial_cols] for r in rows])
    cells = summarize(rows)
    _write_csv(out / "grid.csv", GRID_COLUMNS, [[c[k] for k in GRID_COLUMNS] for c in cells])
    grid = vars_subset(args, "thetas", "label_pcts", "augs", "seeds", "seed")
    _manifest(out, "sweep", {**cfg, "sweep": grid}, args.seed)
    for c in cells:
        print(
            f"theta={c['theta']:g} labels={c['label_pct']:g}% aug={c['n_aug']}: "
            f"first {c['first_err_mean']:.2f}+-{c['first_err_std']:.2f} "
            f"final {c['final_err_mean']:.2f}+-{c['final_err_std']:.2f}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="augsc", description="Augmented subspace clustering experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        return sp

    def data_flags(sp):
        sp.add_argument("--data", help="dataset source (file or directory)")
        sp.add_argument("--format", dest="data_format", choices=["CSV", "BIN", "IDX", "PGM"], type=str.upper)
        sp.add_argument("--geometry", nargs=2, type=int, metavar=("H", "W"))
        sp.add_argument("--labels", help="label file, -1 for unlabeled")
        sp.add_argument("--truth", help="ground-truth label file")
        sp.add_argument("--p", type=int, help="number of clusters")

    def solver_flags(sp):
        sp.add_argument("--regularizer", choices=["L1", "FRO", "NUC"], type=str.upper)
        sp.add_argument("--mu", type=float, dest="mu_base")
        sp.add_argument("--lambda2", type=float)
        sp.add_argument("--k", help="neighbour count or 'full'")
        sp.add_argument("--seed", type=int, default=None)

    sp = common(sub.add_parser("synth", help="generate a union-of-subspaces instance"))
    sp.add_argument("--theta", type=float, default=10.0)
    sp.add_argument("--n-per", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["CSV", "BIN"], default="CSV", type=str.upper)
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("augment", help="write the augmented dictionary"))
    data_flags(sp)
    sp.set_defaults(func=cmd_augment)

    for name, func, text in (
        ("cluster", cmd_cluster, "unsupervised clustering"),
        ("semi", cmd_semi, "semi-supervised clustering with label propagation"),
    ):
        sp = common(sub.add_parser(name, help=text))
        data_flags(sp)
        solver_flags(sp)
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("diag", help="incoherence / inradius table"))
    data_flags(sp)
    sp.add_argument("--theta", type=float, default=10.0)
    sp.add_argument("--n-per", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_diag)

    sp = common(sub.add_parser("eval", help="score a prediction against ground truth"))
    sp.add_argument("--truth", required=True)
    sp.add_argument("--pred", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("sweep", help="synthetic grid over angle, labels and augmentation"))
    sp.add_argument("--thetas", type=float, nargs="+", default=[10.0, 15.0, 20.0])
    sp.add_argument("--label-pcts", type=float, nargs="+", default=[0.0, 10.0, 20.0, 30.0, 40.0])
    sp.add_argument("--augs", type=int, nargs="+", default=[0, 10, 25, 50, 100, 200])
    sp.add_argument("--seeds", type=int, default=10, help="number of seeds per cell")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--jobs", type=int, default=1)
    solver_flags_sweep = sp.add_argument_group("solver")
    solver_flags_sweep.add_argument("--mu", type=float, dest="mu_base")
    solver_flags_sweep.add_argument("--lambda2", type=float)
    sp.set_defaults(func=cmd_sweep)
    return parser


def _apply_overrides(args, cfg: dict) -> dict:
    cfg = copy.deepcopy(cfg)
    if getattr(args, "out", None):
        cfg["output"]["directory"] = args.out
    ds = cfg["dataset"]
    for flag, key in (("data", "source"), ("data_format", "format"), ("labels", "labels"), ("truth", "truth")):
        if getattr(args, flag, None) is not None and args.command not in ("eval",):
            ds[key] = getattr(args, flag)
    if getattr(args, "geometry", None):
        ds["geometry"] = list(args.geometry)
    if getattr(args, "p", None) is not None:
        cfg["clustering"]["p"] = args.p
    sol = cfg["solver"]
    for key in ("regularizer", "mu_base", "lambda2"):
        if getattr(args, key, None) is not None:
            sol[key] = getattr(args, key)
    k = getattr(args, "k", None)
    if k is not None:
        sol["k"] = k if k == "full" else int(k)
    if args.command in ("cluster", "semi") and args.seed is not None:
        sol["seed"] = args.seed
        cfg["clustering"]["seed"] = args.seed
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(sorted(parser._subparsers._group_actions[0].choices)))
        cfg = _apply_overrides(args, load_config(args.config))
        args.func(args, cfg)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    except (DataError, OSError) as exc:
        return _fail(exc, EXIT_DATA)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERIC)
    except AugscError as exc:
        return _fail(exc, EXIT_DATA)
    return EXIT_OK


def _fail(exc: Exception, code: int) -> int:
    line = {"error": str(exc), "type": type(exc).__name__, "exit_code": code}
    print(json.dumps(line), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
