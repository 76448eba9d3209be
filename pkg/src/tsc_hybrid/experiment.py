"""Experiment matrix and Inception grid search with resumable CSV output.

Runs are keyed by ``(dataset, family, mode, lr, n_kernels, k)``.  After every
finished run the whole table is rewritten to ``results.csv`` so an interrupted
matrix can be resumed; rows with status ``ok`` are skipped on the next start
and ``error`` rows are retried.  Runs may execute in worker processes, but only
the parent process writes files.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .backbone import BackboneConfig, HybridModel, build_backbone
from .data import find_split, load_ucr_dataset
from .encoders import FAMILIES, EncoderConfig, InvalidConfigError, PlainModel, build_encoder
from .tensor import default_dtype
from .trainer import TrainConfig, train_run

__all__ = [
    "CSV_FIELDS",
    "MEAN_LABEL",
    "MODES",
    "ExperimentSpec",
    "ResultRow",
    "ResultsTable",
    "build_model",
    "emit_reports",
    "grid_configs",
    "grid_search",
    "read_results_csv",
    "run_matrix",
    "run_seed",
    "worker_count",
]

log = logging.getLogger(__name__)

CSV_FIELDS = (
    "dataset", "family", "mode", "lr", "n_kernels", "k", "seed",
    "max_test_acc", "min_loss_acc", "epochs", "wall_s", "status",
)
MEAN_LABEL = "MEAN"
MODES = ("plain", "hybrid")
REFERENCE_CELL = "lr=0.001, n_kernels=5, k=16, avg max acc 0.6568 (published, different backbone/datasets)"


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def run_seed(master: int, dataset: str, family: str, mode: str) -> int:
    """Stable per-run seed; adding datasets or families never shifts existing seeds."""
    return zlib.crc32(f"{master}|{dataset}|{family}|{mode}".encode())


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("TSC_THREADS", "").strip()
    if not raw:
        return default
    n = int(raw)
    if n < 1:
        raise ValueError(f"TSC_THREADS must be >= 1, got {raw!r}")
    return n


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    family: str
    mode: str
    lr: float
    n_kernels: int | None
    k: int | None
    seed: int | None
    max_test_acc: float
    min_loss_acc: float
    epochs: int
    wall_s: float
    status: str = "ok"

    @property
    def key(self) -> tuple:
        return (self.dataset, self.family, self.mode, self.lr, self.n_kernels, self.k)

    @property
    def config_key(self) -> tuple:
        return (self.family, self.mode, self.lr, self.n_kernels, self.k)

    def rounded(self) -> ResultRow:
        failed = self.status == "error"
        return replace(
            self,
            lr=_sig6(self.lr),
            max_test_acc=float("nan") if failed else _sig6(self.max_test_acc),
            min_loss_acc=float("nan") if failed else _sig6(self.min_loss_acc),
            wall_s=_sig6(self.wall_s),
        )

    def to_csv(self) -> dict[str, str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return "" if math.isnan(v) else f"{v:.6g}"
            return str(v)

        return {name: fmt(getattr(self, name)) for name in CSV_FIELDS}

    @classmethod
    def from_csv(cls, rec: dict[str, str]) -> ResultRow:
        def opt_int(s):
            return int(s) if s.strip() else None

        def opt_float(s):
            return float(s) if s.strip() else float("nan")

        return cls(
            dataset=rec["dataset"],
            family=rec["family"],
            mode=rec["mode"],
            lr=float(rec["lr"]),
            n_kernels=opt_int(rec["n_kernels"]),
            k=opt_int(rec["k"]),
            seed=opt_int(rec["seed"]),
            max_test_acc=opt_float(rec["max_test_acc"]),
            min_loss_acc=opt_float(rec["min_loss_acc"]),
            epochs=int(rec["epochs"]),
            wall_s=float(rec["wall_s"]),
            status=rec["status"],
        )


def _sort_key(key: tuple) -> tuple:
    # None sorts before numbers so families without kernel axes come first
    return tuple((0, 0) if v is None else (1, v) for v in key)


class ResultsTable:
    """Per-run rows plus derived per-configuration means over datasets."""

    def __init__(self, rows=(), datasets=None):
        self._rows: dict[tuple, ResultRow] = {}
        self.datasets = list(datasets) if datasets is not None else None
        for row in rows:
            self.add(row)

    def add(self, row: ResultRow) -> None:
        """Insert or replace; metric values are rounded to 6 significant digits on the way in."""
        self._rows[row.key] = row.rounded()

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key) -> bool:
        return key in self._rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultsTable):
            return NotImplemented
        return [r.to_csv() for r in self.rows] == [r.to_csv() for r in other.rows]

    @property
    def rows(self) -> list[ResultRow]:
        return [self._rows[k] for k in sorted(self._rows, key=_sort_key)]

    def completed_keys(self) -> set[tuple]:
        return {k for k, r in self._rows.items() if r.status == "ok"}

    def aggregates(self) -> list[ResultRow]:
        """Unweighted mean over datasets of each (family, mode, lr, n_kernels, k) group."""
        groups: dict[tuple, list[ResultRow]] = {}
        for row in self.rows:
            if row.status == "ok":
                groups.setdefault(row.config_key, []).append(row)
        out = []
        for cfg in sorted(groups, key=_sort_key):
            members = groups[cfg]
            family, mode, lr, nk, k = cfg
            out.append(ResultRow(
                dataset=MEAN_LABEL, family=family, mode=mode, lr=lr, n_kernels=nk, k=k, seed=None,
                max_test_acc=float(np.mean([r.max_test_acc for r in members])),
                min_loss_acc=float(np.mean([r.min_loss_acc for r in members])),
                epochs=max(r.epochs for r in members),
                wall_s=float(sum(r.wall_s for r in members)),
                status=f"mean of {len(members)}",
            ))
        return out

    def report_rows(self) -> list[ResultRow]:
        return self.rows + [r.rounded() for r in self.aggregates()]


# -- model assembly -------------------------------------------------------------


def build_model(family: str, mode: str, enc_cfg: EncoderConfig, bb_cfg: BackboneConfig,
                T: int, d: int, num_classes: int, seed: int, backbone_weights=None):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    cfg = replace(enc_cfg, family=family)
    if mode == "hybrid":
        cfg = replace(cfg, hidden=bb_cfg.hidden)
    encoder = build_encoder(cfg, T, d, seed=seed)
    if mode == "plain":
        return PlainModel(encoder, num_classes, seed=seed + 1)
    backbone = build_backbone(bb_cfg)
    if backbone_weights:
        backbone.load(backbone_weights)
        backbone.reference_checksum = backbone.checksum()
    return HybridModel(encoder, backbone, num_classes, seed=seed + 1)


@dataclass
class ExperimentSpec:
    data_dir: Path
    datasets: list[str]
    families: list[str] = field(default_factory=lambda: ["inception"])
    modes: list[str] = field(default_factory=lambda: ["plain"])
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(family="inception"))
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    lrs: list[float] = field(default_factory=lambda: [1e-3, 1e-4, 1e-5])
    n_kernels: list[int] = field(default_factory=lambda: [3, 4, 5, 6])
    ksizes: list[int] = field(default_factory=lambda: [8, 16])
    out_dir: Path = Path("results")
    seed: int = 42
    normalize: bool = True
    backbone_weights: Path | None = None
    workers: int | None = None

    def validate(self, grid: bool = False) -> ExperimentSpec:
        if not self.datasets:
            raise InvalidConfigError("datasets", "at least one dataset is required")
        for name in self.datasets:
            for split in ("train", "test"):
                find_split(self.data_dir, name, split)
        for fam in self.families:
            if fam not in FAMILIES:
                raise InvalidConfigError("family", f"{fam!r} not in {FAMILIES}")
        for mode in self.modes:
            if mode not in MODES:
                raise InvalidConfigError("mode", f"{mode!r} not in {MODES}")
        if grid:
            if self.families != ["inception"]:
                raise InvalidConfigError("family", "the grid search applies to the inception family only")
            for name in ("lrs", "n_kernels", "ksizes"):
                if not getattr(self, name):
                    raise InvalidConfigError(name, "grid axis is empty")
        return self


@dataclass(frozen=True)
class _Job:
    key: tuple
    seed: int
    spec: ExperimentSpec
    lr: float
    enc_cfg: EncoderConfig


def _execute(job: _Job) -> ResultRow:
    dataset, family, mode, lr, nk, k = job.key
    spec = job.spec
    try:
        train, test = load_ucr_dataset(spec.data_dir, dataset, normalize=spec.normalize)
        cfg = replace(spec.train, lr=lr, seed=job.seed)
        with default_dtype(np.dtype(cfg.precision).type):
            model = build_model(family, mode, job.enc_cfg, spec.backbone, train.series_length,
                                train.channels, train.num_classes, job.seed, spec.backbone_weights)
        res = train_run(model, train, test, cfg)
        return ResultRow(dataset, family, mode, lr, nk, k, job.seed, res.max_test_acc,
                         res.min_loss_acc, cfg.epochs, res.wall_s, "ok")
    except Exception as exc:  # recorded as an error row; the matrix keeps going
        log.warning("run %s failed: %s: %s", job.key, type(exc).__name__, exc)
        return ResultRow(dataset, family, mode, lr, nk, k, job.seed, float("nan"), float("nan"),
                         spec.train.epochs, 0.0, "error")


def _run_jobs(jobs: list[_Job], table: ResultsTable, spec: ExperimentSpec) -> ResultsTable:
    pending = [j for j in jobs if j.key not in table.completed_keys()]
    log.info("%d runs planned, %d already complete", len(jobs), len(jobs) - len(pending))
    if not pending:
        return table
    out = Path(spec.out_dir)
    workers = spec.workers or worker_count()

    def record(row: ResultRow):
        table.add(row)
        _write_csv(table, out / "results.csv")
        log.info("%s %s %s lr=%g -> %s max=%.4f", row.dataset, row.family, row.mode, row.lr,
                 row.status, row.max_test_acc)

    if workers <= 1:
        for job in pending:
            record(_execute(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_execute, job) for job in pending]
            for fut in as_completed(futures):
                record(fut.result())
    return table


def _resume(spec: ExperimentSpec) -> ResultsTable:
    path = Path(spec.out_dir) / "results.csv"
    table = read_results_csv(path) if path.exists() else ResultsTable()
    table.datasets = list(spec.datasets)
    return table


def run_matrix(spec: ExperimentSpec) -> ResultsTable:
    """Every (dataset, family, mode) combination at ``spec.train.lr``."""
    spec.validate()
    table = _resume(spec)
    lr = spec.train.lr
    jobs = []
    for dataset, family, mode in itertools.product(sorted(spec.datasets), sorted(spec.families), sorted(spec.modes)):
        enc_cfg = replace(spec.encoder, family=family)
        nk, k = (enc_cfg.n_kernels, enc_cfg.kernel_size) if family == "inception" else (None, None)
        key = (dataset, family, mode, _sig6(lr), nk, k)
        jobs.append(_Job(key, run_seed(spec.seed, dataset, family, mode), spec, lr, enc_cfg))
    table = _run_jobs(jobs, table, spec)
    emit_reports(table, spec.out_dir)
    return table


def grid_configs(lrs, n_kernels, ksizes) -> list[tuple[float, int, int]]:
    """Sorted product of the three axes: lr first, then n_kernels, then k."""
    return list(itertools.product(sorted(set(lrs)), sorted(set(n_kernels)), sorted(set(ksizes))))


def grid_search(spec: ExperimentSpec) -> ResultsTable:
    """Inception lr x n_kernels x k sweep; the MEAN rows are the per-config averages."""
    spec.validate(grid=True)
    table = _resume(spec)
    jobs = []
    for lr, nk, k in grid_configs(spec.lrs, spec.n_kernels, spec.ksizes):
        enc_cfg = replace(spec.encoder, family="inception", n_kernels=nk, kernel_size=k)
        for dataset, mode in itertools.product(sorted(spec.datasets), sorted(spec.modes)):
            key = (dataset, "inception", mode, _sig6(lr), nk, k)
            jobs.append(_Job(key, run_seed(spec.seed, dataset, "inception", mode), spec, lr, enc_cfg))
    table = _run_jobs(jobs, table, spec)
    emit_reports(table, spec.out_dir, grid=True)
    return table


# -- files ------------------------------------------------------------------------


def _write_csv(table: ResultsTable, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in table.report_rows():
            writer.writerow(row.to_csv())
    os.replace(tmp, path)


def read_results_csv(path) -> ResultsTable:
    """Parse ``results.csv``; MEAN rows are skipped and recomputed from the run rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = [ResultRow.from_csv(rec) for rec in reader if rec["dataset"] != MEAN_LABEL]
    return ResultsTable(rows)


def _markdown(table: ResultsTable, grid: bool) -> str:
    lines = []
    if grid:
        lines += ["# Inception grid search", ""]
    else:
        lines += ["# Results", ""]
    if table.datasets:
        lines += [f"Datasets: {', '.join(sorted(table.datasets))}", ""]
    lines += [
        "| dataset | family | mode | lr | n_kernels | k | max test acc | min loss acc | epochs | status |",
        "|---|---|---|---|---|---|---|---|---|---|",
    ]
    for r in table.report_rows():
        c = r.to_csv()
        lines.append(
            f"| {c['dataset']} | {c['family']} | {c['mode']} | {c['lr']} | {c['n_kernels'] or '-'} "
            f"| {c['k'] or '-'} | {c['max_test_acc'] or '-'} | {c['min_loss_acc'] or '-'} "
            f"| {c['epochs']} | {c['status']} |"
        )
    lines.append("")
    lines.append(f"{MEAN_LABEL} rows are unweighted averages over datasets of successful runs.")
    if grid:
        lines.append(f"Reference: {REFERENCE_CELL}")
    return "\n".join(lines) + "\n"


def emit_reports(table: ResultsTable, outdir, grid: bool | None = None) -> tuple[Path, Path]:
    """Write ``results.csv`` and ``results.md``; returns both paths."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        if not os.access(outdir, os.W_OK):
            raise PermissionError(f"{outdir} is not writable")
    except OSError as exc:
        raise OSError(f"cannot write reports to {outdir}: {exc}") from exc
    if grid is None:
        configs = {(r.lr, r.n_kernels, r.k) for r in table.rows}
        grid = len(configs) > 1 and all(r.family == "inception" for r in table.rows)
    csv_path, md_path = outdir / "results.csv", outdir / "results.md"
    _write_csv(table, csv_path)
    md_path.write_text(_markdown(table, grid))
    return csv_path, md_path
