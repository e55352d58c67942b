"""Scoring, baselines and the seeded benchmark runner."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import MaskedMatrix, available_moments
from .dper import GaussianEstimate, complete_case_fit, dper_fit
from .errors import ScoringError, ValidationError
from .imputer import ImputationConfig, impute
from .missing import MaskSpec, generate_mask
from .tuner import AlphaGrid, tune_alpha

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "BenchmarkRow",
    "BenchmarkReport",
    "rmse_masked",
    "mean_impute",
    "complete_case_cov",
    "run_benchmark",
]

METHODS = ("dimv", "dimv-complete-case-cov", "mean")


def rmse_masked(truth, imputed, eval_mask) -> float:
    """Root mean squared error over the positions where ``eval_mask`` is True."""
    truth = np.asarray(truth, dtype=float)
    imputed = np.asarray(imputed, dtype=float)
    eval_mask = np.asarray(eval_mask, dtype=bool)
    if truth.shape != imputed.shape or truth.shape != eval_mask.shape:
        raise ScoringError(
            f"shape mismatch: truth {truth.shape}, imputed {imputed.shape}, mask {eval_mask.shape}"
        )
    if not eval_mask.any():
        raise ScoringError("evaluation mask selects no entries")
    d = truth[eval_mask] - imputed[eval_mask]
    return float(np.sqrt(np.mean(d * d)))


def mean_impute(train: MaskedMatrix, test: MaskedMatrix) -> np.ndarray:
    means, _ = available_moments(train)
    return np.where(test.mask, test.values, means)


def complete_case_cov(x: MaskedMatrix) -> GaussianEstimate:
    """Available-entry means and variances with pairwise case-deletion covariances."""
    return complete_case_fit(x)


@dataclass
class BenchmarkRow:
    method: str
    mask: dict
    seed: int
    config: dict
    rmse: float | None = None
    wall_time_seconds: float = 0.0
    status: str = "ok"
    error: str | None = None
    tuned_alpha: float | None = None
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mask": self.mask,
            "rmse": self.rmse,
            "wall_time_seconds": self.wall_time_seconds,
            "seed": self.seed,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "tuned_alpha": self.tuned_alpha,
            "config_digest": self.config_digest,
        }


@dataclass
class BenchmarkReport:
    dataset: str
    created_at: str
    rows: list[BenchmarkRow] = field(default_factory=list)
    split: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "created_at": self.created_at,
            "split": self.split,
            "rows": [r.to_dict() for r in self.rows],
        }

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write the JSON report and its CSV mirror (same stem, ``.csv``)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        csv_path = path.with_suffix(".csv")
        cols = ["method", "kind", "rate", "fraction", "mask_seed", "seed", "tau", "k",
                "alpha", "init_with_zero", "tuned_alpha", "rmse", "wall_time_seconds",
                "status", "error", "config_digest"]
        with csv_path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in self.rows:
                w.writerow({
                    "method": r.method,
                    "kind": r.mask.get("kind"),
                    "rate": r.mask.get("rate", ""),
                    "fraction": r.mask.get("fraction", ""),
                    "mask_seed": r.mask.get("seed"),
                    "seed": r.seed,
                    "tau": r.config["tau"],
                    "k": r.config["k"],
                    "alpha": r.config["alpha"],
                    "init_with_zero": r.config["init_with_zero"],
                    "tuned_alpha": "" if r.tuned_alpha is None else repr(r.tuned_alpha),
                    "rmse": "" if r.rmse is None else repr(r.rmse),
                    "wall_time_seconds": f"{r.wall_time_seconds:.6f}",
                    "status": r.status,
                    "error": r.error or "",
                    "config_digest": r.config_digest,
                })
        return path, csv_path


def _digest(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _cell_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def _run_method(method, train, test, cfg, grid):
    tuned = None
    if method == "mean":
        return mean_impute(train, test), None
    if grid is not None:
        tuned = tune_alpha(train, cfg, grid).alpha
        cfg = cfg.with_alpha(tuned)
    estimator = dper_fit if method == "dimv" else complete_case_cov
    return impute(train, test, cfg, estimator=estimator).imputed, tuned


def run_benchmark(
    dataset,
    mask_specs: Sequence[MaskSpec],
    methods: Sequence[str] = ("dimv", "mean"),
    cfg: ImputationConfig | None = None,
    output: str | Path | None = None,
    *,
    dataset_id: str = "dataset",
    tune_grid: AlphaGrid | None = None,
    test_fraction: float = 0.0,
    corrupt: str = "both",
    seed: int = 0,
    workers: int = 1,
) -> BenchmarkReport:
    """Corrupt a complete dataset per mask spec, impute with each method, score RMSE.

    Every mask spec is one cell. A cell's mask seed and train/test split are
    derived from ``(seed, cell index)``, so a method's score does not depend
    on which other methods run. With ``test_fraction == 0`` the corrupted
    dataset is both train and test; otherwise rows are split and
    ``corrupt`` ("both" or "test") picks which split loses entries. Wall
    time covers tuning, fitting and imputation only. Method failures are
    recorded in their row and the run continues.
    """
    data = np.asarray(dataset, dtype=float)
    if data.ndim != 2 or not np.all(np.isfinite(data)):
        raise ValidationError("benchmark data must be a complete, finite 2-d array")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValidationError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    if corrupt not in ("both", "test"):
        raise ValidationError("corrupt must be 'both' or 'test'")
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError("test_fraction must lie in [0, 1)")
    cfg = cfg or ImputationConfig()
    n, p = data.shape

    def cell(index: int, spec: MaskSpec) -> list[BenchmarkRow]:
        cseed = _cell_seed(seed, index)
        spec = replace(spec, seed=cseed)
        missing = generate_mask(spec, n, p)
        if test_fraction > 0:
            perm = np.random.default_rng(cseed).permutation(n)
            n_test = max(1, int(round(test_fraction * n)))
            test_rows, train_rows = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        else:
            test_rows = train_rows = np.arange(n)
        train_missing = missing[train_rows] if corrupt == "both" else np.zeros((train_rows.size, p), bool)
        train = MaskedMatrix(data[train_rows], ~train_missing)
        test = MaskedMatrix(data[test_rows], ~missing[test_rows])
        rows = []
        for method in methods:
            conf = cfg.to_dict()
            row = BenchmarkRow(method, spec.to_dict(), cseed, conf,
                               config_digest=_digest(dataset_id, method, spec.to_dict(), conf,
                                                     None if tune_grid is None else tune_grid.candidates))
            start = time.perf_counter()
            try:
                imputed, row.tuned_alpha = _run_method(
                    method, train, test, cfg, None if method == "mean" else tune_grid)
                row.wall_time_seconds = time.perf_counter() - start
                row.rmse = rmse_masked(data[test_rows], imputed, missing[test_rows])
            except Exception as exc:  # noqa: BLE001 - failures are data, not fatal
                row.wall_time_seconds = time.perf_counter() - start
                row.status = "failed"
                row.error = f"{type(exc).__name__}: {exc}"
                log.warning("method %s failed on cell %d: %s", method, index, exc)
            rows.append(row)
        return rows

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_cell = list(pool.map(lambda a: cell(*a), enumerate(mask_specs)))
    else:
        per_cell = [cell(i, s) for i, s in enumerate(mask_specs)]

    report = BenchmarkReport(
        dataset=dataset_id,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        rows=[r for rows in per_cell for r in rows],
        split={"test_fraction": test_fraction, "corrupt": corrupt, "master_seed": seed},
    )
    if output is not None:
        report.write(output)
    return report
