"""Experiment runner: ``samgcl run`` trains, explains and probes one configuration; ``samgcl sweep`` runs a lambda grid."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .augment import MODES, AugmentConfig
from .errors import ConfigError, SamGCLError
from .evaluate import ProbeConfig, default_probe, linear_probe
from .gnn import EncoderConfig, HeadConfig, save_params
from .graph import Dataset, MotifSpec, generate_motif_dataset, parse_node_dataset, parse_tudataset
from .train import FRAMEWORKS, TrainConfig, train_graph_level, train_node_level

METRIC_FIELDS = (
    "run_id",
    "dataset",
    "mode",
    "framework",
    "lambda_e",
    "lambda_f",
    "seed",
    "epochs",
    "probe_mean_acc",
    "probe_std_acc",
    "final_sparsity_mean",
    "wall_time_s",
)
SWEEP_GRID = (-2.0, 0.0, 2.0)


# --------------------------------------------------------------------------
# manifest


def load_dataset(spec: str) -> Dataset:
    """Resolve ``tudataset:NAME:DIR``, ``nodeset:DIR`` or ``synthetic:motif[:SEED]``."""
    kind, _, rest = spec.partition(":")
    if kind == "tudataset":
        name, _, root = rest.partition(":")
        if not name or not root:
            raise ConfigError(f"expected tudataset:NAME:DIR, got {spec!r}")
        return parse_tudataset(root, name)
    if kind == "nodeset":
        if not rest:
            raise ConfigError(f"expected nodeset:DIR, got {spec!r}")
        return parse_node_dataset(rest)
    if kind == "synthetic":
        name, _, seed = rest.partition(":")
        if name != "motif":
            raise ConfigError(f"unknown synthetic dataset {name!r}")
        return generate_motif_dataset(MotifSpec(), int(seed) if seed else 0)
    raise ConfigError(f"unknown dataset kind {kind!r} in {spec!r}")


def _train_to_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def _train_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["augment"] = AugmentConfig(**d["augment"])
    if d.get("encoder") is not None:
        d["encoder"] = EncoderConfig(**d["encoder"])
    if d.get("heads") is not None:
        h = d["heads"]
        d["heads"] = HeadConfig(tuple(h["projector"]), tuple(h["predictor"]))
    return TrainConfig(**d)


@dataclass(frozen=True)
class RunManifest:
    dataset: str
    train: TrainConfig = field(default_factory=TrainConfig)
    probe: Optional[ProbeConfig] = None
    out: str = "runs"
    dump_explanations: bool = False
    record_time: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "train": _train_to_dict(self.train),
            "probe": None if self.probe is None else asdict(self.probe),
            "out": self.out,
            "dump_explanations": self.dump_explanations,
            "record_time": self.record_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            dataset=d["dataset"],
            train=_train_from_dict(d["train"]),
            probe=None if d.get("probe") is None else ProbeConfig(**d["probe"]),
            out=d.get("out", "runs"),
            dump_explanations=bool(d.get("dump_explanations", False)),
            record_time=bool(d.get("record_time", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))

    @property
    def run_id(self) -> str:
        """Short hash of everything that affects results (the output location does not)."""
        d = self.to_dict()
        for k in ("out", "dump_explanations", "record_time"):
            d.pop(k)
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# run


def _fmt(x: float) -> str:
    return "nan" if x != x else repr(float(x))


def _json_float(x: float):
    return None if x != x else float(x)


def execute(manifest: RunManifest, out_dir: Optional[Path] = None) -> dict:
    """Train, explain and probe; write every artifact into ``out_dir`` and return the metrics."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir if out_dir is not None else manifest.out)
    cfg = manifest.train
    cfg.validate()
    dataset = load_dataset(manifest.dataset)
    probe = manifest.probe or default_probe(dataset.task)
    if dataset.task == "node-level":
        record = train_node_level(dataset, cfg=cfg)
        labels = dataset.node_labels
    else:
        record = train_graph_level(dataset, cfg=cfg)
        labels = dataset.labels()
    mean_acc, std_acc = linear_probe(record.embeddings, labels, probe, seed=cfg.seed)
    trace = np.asarray(record.sparsity, dtype=np.float64)
    final = trace[-1] if len(trace) else float("nan")

    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = {
        "run_id": manifest.run_id,
        "dataset": manifest.dataset,
        "mode": cfg.augment.mode,
        "framework": cfg.framework,
        "lambda_e": cfg.augment.lambda_e,
        "lambda_f": cfg.augment.lambda_f,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "probe_mean_acc": mean_acc,
        "probe_std_acc": std_acc,
        "final_sparsity_mean": _json_float(final),
        # a measured time would break byte-identical reruns, so it is opt-in
        "wall_time_s": round(time.perf_counter() - t0, 3) if manifest.record_time else None,
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    lines = ["epoch,mean_sparsity"] + [f"{e},{_fmt(v)}" for e, v in enumerate(trace)]
    (out_dir / "sparsity.csv").write_text("\n".join(lines) + "\n")
    save_params(record.params, out_dir / "checkpoint.bin")
    if manifest.dump_explanations:
        buf = io.StringIO()
        for gid, expl in enumerate(record.explanations):
            if expl is None:
                continue
            for nid, (p, p01) in enumerate(zip(expl.psi, expl.psi01)):
                buf.write(f"{gid}\t{nid}\t{_fmt(p)}\t{_fmt(p01)}\n")
        (out_dir / "explanations.tsv").write_text(buf.getvalue())
    return metrics


def _write_error(out_dir: Path, exc: BaseException, code: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    (out_dir / "error.json").write_text(json.dumps(record, indent=2) + "\n")


def _guarded(out_dir: Path, fn) -> int:
    try:
        fn()
    except ConfigError as exc:
        _write_error(out_dir, exc, 2)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SamGCLError, OSError, ValueError) as exc:
        _write_error(out_dir, exc, 1)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# --------------------------------------------------------------------------
# sweep


def _sweep_cell(args):
    manifest_json, out_dir = args
    manifest = RunManifest.from_json(manifest_json)
    return execute(manifest, Path(out_dir))


def worker_count() -> int:
    raw = os.environ.get("ENGAGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ENGAGE_THREADS must be an integer, got {raw!r}") from None


def sweep(base: RunManifest, lambdas_e: Sequence[float], lambdas_f: Sequence[float], seeds: Sequence[int], out_dir: Optional[Path] = None) -> list[dict]:
    """Run every (lambda_e, lambda_f, seed) cell and write ``sweep.csv``.

    ``performance_gap`` is the spread (max - min) of seed-averaged accuracy
    across the grid and repeats on every row.
    """
    out_dir = Path(out_dir if out_dir is not None else base.out)
    cells = []
    for le in lambdas_e:
        for lf in lambdas_f:
            for s in seeds:
                aug = replace(base.train.augment, lambda_e=float(le), lambda_f=float(lf))
                m = replace(base, train=replace(base.train, augment=aug, seed=int(s)))
                cells.append((m.to_json(), str(out_dir / "cells" / m.run_id)))
    workers = min(worker_count(), len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]

    per_cell: dict = {}
    for r in results:
        per_cell.setdefault((r["lambda_e"], r["lambda_f"]), []).append(r["probe_mean_acc"])
    means = [float(np.mean(v)) for v in per_cell.values()]
    gap = max(means) - min(means)
    rows = []
    for r in results:
        row = {k: r[k] for k in ("lambda_e", "lambda_f", "seed", "mode", "framework", "probe_mean_acc", "probe_std_acc", "final_sparsity_mean", "run_id")}
        row["performance_gap"] = gap
        rows.append(row)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return rows


# --------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--dataset", required=True, help="tudataset:NAME:DIR | nodeset:DIR | synthetic:motif[:SEED]")
    p.add_argument("--framework", default="simclr", help="simclr or simsiam")
    p.add_argument("--mode", default="engage", help="random, heatmap or engage")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--m", type=int, default=5, help="smoothing neighbours")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--folds", type=int, default=None, help="probe folds (default 10 graph-level, 5 node-level)")
    p.add_argument("--random-keep", default="fixed", help="RD keep rate: fixed or matched")
    p.add_argument("--no-stop-gradient", action="store_true", help="debug: remove simsiam stop-gradient")
    p.add_argument("--out", default="runs")
    p.add_argument("--record-time", action="store_true", help="store measured wall time in metrics.json")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samgcl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="train, explain and probe one configuration")
    _add_common(run_p)
    run_p.add_argument("--lambda-e", type=float, default=0.0)
    run_p.add_argument("--lambda-f", type=float, default=0.0)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--dump-explanations", action="store_true")
    sw_p = sub.add_parser("sweep", help="grid over lambda_e x lambda_f x seeds")
    _add_common(sw_p)
    sw_p.add_argument("--lambda-e", type=_floats, default=list(SWEEP_GRID), help="comma-separated list")
    sw_p.add_argument("--lambda-f", type=_floats, default=list(SWEEP_GRID), help="comma-separated list")
    sw_p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")], default=[0])
    return parser


def manifest_from_args(args) -> RunManifest:
    if args.mode not in MODES:
        raise ConfigError(f"unknown mode {args.mode!r}; expected one of {MODES}")
    if args.framework not in FRAMEWORKS:
        raise ConfigError(f"unknown framework {args.framework!r}; expected one of {FRAMEWORKS}")
    lam_e = args.lambda_e if isinstance(args.lambda_e, float) else 0.0
    lam_f = args.lambda_f if isinstance(args.lambda_f, float) else 0.0
    aug = AugmentConfig(mode=args.mode, lambda_e=lam_e, lambda_f=lam_f, random_keep=args.random_keep)
    train = TrainConfig(
        framework=args.framework,
        tau=args.tau,
        m=args.m,
        augment=aug,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        warmup_epochs=args.warmup,
        seed=getattr(args, "seed", 0),
        stop_gradient=not args.no_stop_gradient,
    )
    train.validate()
    probe = None if args.folds is None else ProbeConfig(folds=args.folds)
    return RunManifest(args.dataset, train, probe, args.out, getattr(args, "dump_explanations", False), args.record_time)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)

    def go():
        manifest = manifest_from_args(args)
        if args.command == "run":
            metrics = execute(manifest, out)
            print(json.dumps(metrics))
        else:
            rows = sweep(manifest, args.lambda_e, args.lambda_f, args.seeds, out)
            print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")

    return _guarded(out, go)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
