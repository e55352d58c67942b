"""Masked-matrix data model, missing patterns and standardization.

Rows are samples and columns are features. Missingness is carried by an
explicit boolean mask (``True`` = observed) so that any float, including 0.0,
is a legal observed value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, EstimationError, ValidationError

__all__ = [
    "MaskedMatrix",
    "MissingPattern",
    "Standardizer",
    "build_masked",
    "pattern_of",
    "fit_standardizer",
    "apply_standardizer",
    "invert_standardizer",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DimensionError(
                f"values {values.shape} and mask {mask.shape} must be equal 2-d shapes"
            )
        if not np.all(np.isfinite(values[mask])):
            bad = np.argwhere(mask & ~np.isfinite(values))[0]
            raise ValidationError(
                f"non-finite observed value at row {bad[0]}, column {bad[1]}"
            )
        # entries under the mask carry no information; pin them to 0
        values[~mask] = 0.0
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_nan(cls, data) -> "MaskedMatrix":
        """Build from an array where NaN marks a missing entry."""
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise DimensionError(f"expected a 2-d array, got shape {data.shape}")
        mask = ~np.isnan(data)
        return cls(np.where(mask, data, 0.0), mask)

    @classmethod
    def complete(cls, data) -> "MaskedMatrix":
        data = np.asarray(data, dtype=float)
        return cls(data, np.ones(data.shape, dtype=bool))

    def to_nan(self) -> np.ndarray:
        return np.where(self.mask, self.values, np.nan)

    def take_rows(self, rows) -> "MaskedMatrix":
        return MaskedMatrix(self.values[rows], self.mask[rows])

    def with_mask(self, mask) -> "MaskedMatrix":
        """Same values with a new mask (the mask may only remove observations)."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.mask.shape:
            raise DimensionError(f"mask shape {mask.shape} != {self.mask.shape}")
        return MaskedMatrix(self.values, mask & self.mask)

    @property
    def has_missing(self) -> bool:
        return not bool(self.mask.all())


@dataclass(frozen=True)
class MissingPattern:
    """Per-sample missingness; ``bits[j]`` is True when feature j is missing."""

    bits: tuple[bool, ...]

    @property
    def missing(self) -> frozenset[int]:
        return frozenset(j for j, b in enumerate(self.bits) if b)

    @property
    def available(self) -> frozenset[int]:
        return frozenset(j for j, b in enumerate(self.bits) if not b)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def __len__(self) -> int:
        return len(self.bits)


def _is_missing(v) -> bool:
    return v is None or (isinstance(v, str) and v.upper() in ("NA", ""))


def build_masked(rows: Iterable[Sequence], p: int | None = None) -> MaskedMatrix:
    """Build a MaskedMatrix from row records; ``None`` (or "NA") marks missing.

    ``p`` is required only when ``rows`` is empty.
    """
    rows = [list(r) for r in rows]
    if not rows:
        if p is None or p < 1:
            raise DimensionError("an empty matrix needs a declared feature count p >= 1")
        return MaskedMatrix(np.zeros((0, p)), np.zeros((0, p), dtype=bool))
    width = len(rows[0]) if p is None else p
    if width < 1:
        raise DimensionError("rows must have at least one feature")
    values = np.zeros((len(rows), width))
    mask = np.zeros((len(rows), width), dtype=bool)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionError(f"row {i} has length {len(row)}, expected {width}")
        for j, v in enumerate(row):
            if _is_missing(v):
                continue
            fv = float(v)
            if not math.isfinite(fv):
                raise ValidationError(f"non-finite observed value at row {i}, column {j}")
            values[i, j] = fv
            mask[i, j] = True
    return MaskedMatrix(values, mask)


def pattern_of(x: MaskedMatrix, row: int) -> MissingPattern:
    if not 0 <= row < x.n:
        raise IndexError(f"row {row} out of range for {x.n} samples")
    return MissingPattern(tuple(bool(b) for b in ~x.mask[row]))


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        scales = np.array(self.scales, dtype=float)
        if means.shape != scales.shape or means.ndim != 1:
            raise DimensionError("means and scales must be 1-d arrays of equal length")
        if np.any(~(scales > 0)):
            raise ValidationError("all scales must be positive")
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "scales", _frozen(scales))

    @property
    def p(self) -> int:
        return self.means.shape[0]

    @classmethod
    def identity(cls, p: int) -> "Standardizer":
        return cls(np.zeros(p), np.ones(p))


def available_moments(x: MaskedMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and uncorrected variance over the observed entries."""
    counts = x.mask.sum(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EstimationError(f"feature {int(empty[0])} has no observed entries")
    means = x.values.sum(axis=0) / counts
    dev = np.where(x.mask, x.values - means, 0.0)
    var = (dev**2).sum(axis=0) / counts
    return means, var


def fit_standardizer(x: MaskedMatrix, scale: bool = True) -> Standardizer:
    """Fit available-entry means and uncorrected standard deviations.

    Zero-variance and single-observation columns get scale 1.0. With
    ``scale=False`` only centering is performed.
    """
    means, var = available_moments(x)
    if not scale:
        return Standardizer(means, np.ones_like(means))
    counts = x.mask.sum(axis=0)
    scales = np.sqrt(var)
    scales[(var <= 0) | (counts < 2)] = 1.0
    return Standardizer(means, scales)


def _check_p(s: Standardizer, x: MaskedMatrix):
    if s.p != x.p:
        raise DimensionError(f"standardizer has p={s.p} but matrix has p={x.p}")


def apply_standardizer(s: Standardizer, x: MaskedMatrix) -> MaskedMatrix:
    _check_p(s, x)
    return MaskedMatrix((x.values - s.means) / s.scales, x.mask)


def invert_standardizer(s: Standardizer, x: MaskedMatrix) -> MaskedMatrix:
    _check_p(s, x)
    return MaskedMatrix(x.values * s.scales + s.means, x.mask)


def invert_array(s: Standardizer, values: np.ndarray) -> np.ndarray:
    """Map a dense standardized array back to original units."""
    return np.asarray(values) * s.scales + s.means
