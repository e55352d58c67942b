"""CSV ingestion/emission and the JSON model envelope."""

from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import MaskedMatrix, Standardizer
from .dper import GaussianEstimate
from .errors import DimensionError, ModelVersionError, ValidationError
from .imputer import DimvModel

__all__ = [
    "CsvConvention",
    "ModelFile",
    "MODEL_FORMAT_VERSION",
    "read_csv",
    "write_csv",
    "write_mask_csv",
    "read_mask_csv",
    "write_model",
    "read_model",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CsvConvention:
    na_token: str = "NA"
    has_header: bool = True
    delimiter: str = ","

    def __post_init__(self):
        if not self.na_token:
            raise ValidationError("na_token must be nonempty")
        if len(self.delimiter) != 1 or self.delimiter.isdigit() or self.delimiter in ".-":
            raise ValidationError(f"invalid delimiter {self.delimiter!r}")


def read_csv(path, conv: CsvConvention = CsvConvention()) -> MaskedMatrix:
    """Parse a numeric CSV; cells equal to ``conv.na_token`` become missing."""
    with open(path, newline="") as fh:
        records = list(csv.reader(fh, delimiter=conv.delimiter))
    header = None
    if conv.has_header and records:
        header, records = records[0], records[1:]
    records = [r for r in records if r]
    p = len(header) if header is not None else (len(records[0]) if records else 0)
    if p == 0:
        raise DimensionError(f"{path}: no columns found")
    values = np.zeros((len(records), p))
    mask = np.zeros((len(records), p), dtype=bool)
    offset = 2 if header is not None else 1
    for i, rec in enumerate(records):
        if len(rec) != p:
            raise DimensionError(
                f"{path}: row {i + offset} has {len(rec)} cells, expected {p}"
            )
        for j, cell in enumerate(rec):
            cell = cell.strip()
            if cell == conv.na_token:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: cannot parse {cell!r} at row {i + offset}, column {j + 1}"
                ) from None
            if not math.isfinite(v):
                raise ValidationError(
                    f"{path}: non-finite value at row {i + offset}, column {j + 1}"
                )
            values[i, j] = v
            mask[i, j] = True
    return MaskedMatrix(values, mask)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(x, path, conv: CsvConvention = CsvConvention(), header=None) -> None:
    """Write a matrix (ndarray or MaskedMatrix) with 17 significant digits."""
    if isinstance(x, MaskedMatrix):
        values, mask = x.values, x.mask
    else:
        values = np.asarray(x, dtype=float)
        mask = np.ones(values.shape, dtype=bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=conv.delimiter, lineterminator="\n")
        if conv.has_header:
            w.writerow(header or [f"x{j}" for j in range(values.shape[1])])
        for row, mrow in zip(values, mask):
            w.writerow([_fmt(v) if m else conv.na_token for v, m in zip(row, mrow)])


def write_mask_csv(missing: np.ndarray, path) -> None:
    """Write a missing-pattern matrix as 0/1 cells (1 = missing), no header."""
    np.savetxt(path, np.asarray(missing, dtype=int), fmt="%d", delimiter=",")


def read_mask_csv(path) -> np.ndarray:
    return np.loadtxt(path, dtype=int, delimiter=",", ndmin=2).astype(bool)


@dataclass(eq=False)
class ModelFile:
    p: int
    means: np.ndarray
    scales: np.ndarray
    mu: np.ndarray
    covariance: np.ndarray
    config: dict = field(default_factory=dict)
    version: int = MODEL_FORMAT_VERSION

    @classmethod
    def from_model(cls, model: DimvModel, config: dict | None = None) -> "ModelFile":
        std = model.standardizer
        return cls(std.p, std.means, std.scales, model.estimate.mean, model.estimate.cov,
                   dict(config or {}))

    def to_model(self) -> DimvModel:
        return DimvModel(Standardizer(self.means, self.scales),
                         GaussianEstimate(self.mu, self.covariance))


def _enc(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8",
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(float)


def write_model(model: ModelFile, path) -> None:
    doc = {
        "format": "dimv-model",
        "version": model.version,
        "p": int(model.p),
        "config": model.config,
        "means": _enc(model.means),
        "scales": _enc(model.scales),
        "mu": _enc(model.mu),
        "covariance": _enc(model.covariance),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_model(path) -> ModelFile:
    doc = json.loads(Path(path).read_text())
    version = doc.get("version")
    if doc.get("format") != "dimv-model" or version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(f"{path}: unsupported model format/version {version!r}")
    cov = _dec(doc["covariance"])
    p = int(doc["p"])
    if cov.shape != (p, p):
        raise DimensionError(f"{path}: covariance shape {cov.shape} does not match p={p}")
    if not np.array_equal(cov, cov.T):
        raise ValidationError(f"{path}: covariance is not exactly symmetric")
    return ModelFile(p, _dec(doc["means"]), _dec(doc["scales"]), _dec(doc["mu"]), cov,
                     doc.get("config", {}), version)
