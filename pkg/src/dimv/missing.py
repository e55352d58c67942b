"""Seeded missingness generators: exact-count MCAR and monotone image-corner deletion.

Generated masks use the missing-pattern convention: ``True`` marks a missing
entry. ``MaskedMatrix`` wants the opposite (``True`` = observed), so corrupt
with ``x.with_mask(~missing)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, GenerationError, ValidationError

__all__ = ["MaskSpec", "mcar_mask", "monotone_corner_mask", "generate_mask"]


@dataclass(frozen=True)
class MaskSpec:
    kind: str = "mcar"
    rate: float = 0.2
    fraction: float = 0.4
    image_height: int | None = None
    image_width: int | None = None
    affected_share: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mcar", "monotone_corner"):
            raise ValidationError(f"unknown mask kind {self.kind!r}")
        for name in ("rate", "fraction", "affected_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")
        if self.kind == "monotone_corner" and (
            not self.image_height or not self.image_width
        ):
            raise ValidationError("monotone_corner masks need image_height and image_width")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.kind == "mcar":
            for k in ("fraction", "image_height", "image_width", "affected_share"):
                d.pop(k)
        else:
            d.pop("rate")
        return d


def mcar_mask(n: int, p: int, rate: float, seed: int = 0, ensure_observed: bool = True) -> np.ndarray:
    """Exactly ``round(rate * n * p)`` missing entries chosen uniformly at random.

    With ``ensure_observed`` every column keeps at least one observed entry:
    a fully missing column trades one of its missing cells with an observed
    cell of a column that can spare it, so the total count is unchanged.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"rate must lie in [0, 1], got {rate!r}")
    total = n * p
    n_missing = int(round(rate * total))
    rng = np.random.default_rng(seed)
    flat = np.zeros(total, dtype=bool)
    flat[rng.permutation(total)[:n_missing]] = True
    missing = flat.reshape(n, p)
    if not ensure_observed or n_missing == 0:
        return missing
    if n_missing > total - p:
        raise GenerationError(
            f"{n_missing} missing entries leave no room for one observation per column "
            f"(n={n}, p={p}); lower the rate or disable ensure_observed"
        )
    for j in np.flatnonzero(missing.all(axis=0)):
        observed_per_col = (~missing).sum(axis=0)
        donors = np.argwhere(~missing & (observed_per_col >= 2)[None, :])
        di, dj = donors[rng.integers(donors.shape[0])]
        r = rng.integers(n)
        missing[r, j] = False
        missing[di, dj] = True
    return missing


def _corner_size(r: float, side: int) -> int:
    # tolerance guards against products like 0.29 * 100 = 28.999999999999996
    return int(math.floor(r * side + 1e-9))


def monotone_corner_mask(
    n: int,
    image_height: int,
    image_width: int,
    fraction: float,
    affected_share: float = 0.5,
    seed: int = 0,
    p: int | None = None,
) -> np.ndarray:
    """Delete the bottom-right corner of a seeded subset of flattened images.

    Pixels are laid out row-major. The corner spans the last
    ``floor(fraction * h)`` pixel rows and last ``floor(fraction * w)`` columns.
    """
    h, w = int(image_height), int(image_width)
    if p is not None and h * w != p:
        raise DimensionError(f"image {h}x{w} does not match p={p}")
    if not 0.0 <= fraction <= 1.0 or not 0.0 <= affected_share <= 1.0:
        raise ValidationError("fraction and affected_share must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=int(round(affected_share * n)), replace=False)
    corner = np.zeros((h, w), dtype=bool)
    dh, dw = _corner_size(fraction, h), _corner_size(fraction, w)
    if dh and dw:
        corner[h - dh :, w - dw :] = True
    missing = np.zeros((n, h * w), dtype=bool)
    missing[chosen] = corner.reshape(-1)
    return missing


def generate_mask(spec: MaskSpec, n: int, p: int) -> np.ndarray:
    if spec.kind == "mcar":
        return mcar_mask(n, p, spec.rate, spec.seed)
    return monotone_corner_mask(
        n, spec.image_height, spec.image_width, spec.fraction, spec.affected_share, spec.seed, p=p
    )
