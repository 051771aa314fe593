"""Tactile grasp-quality metric.

A tactile image is a 5x5 pressure matrix: row 0 is measured right after the
gripper closes, rows 1..4 after each of the four shake movements; columns are
the five taxels along the sensor strip.

The score is computed from two small convolutions:

* the time kernel ``(-1, +1)`` down a column, giving a 4x5 matrix of per-point
  pressure changes across each movement (used to locate a drop), and
* the space kernel ``[[+1, -1], [-1, +1]]``, giving a 4x4 matrix of
  differential changes between neighbouring points (used to measure slip).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

N_STEPS = 5
N_POINTS = 5

TIME_KERNEL = np.array([[-1.0], [1.0]])
SPACE_KERNEL = np.array([[1.0, -1.0], [-1.0, 1.0]])


class TactileFormatError(ValueError):
    """Raised for malformed tactile images or tactile files."""


class StabilityCategory(str, enum.Enum):
    FAILURE = "failure"
    FALLING = "falling"
    SLIPPERY = "slippery"
    STABLE = "stable"


@dataclass(frozen=True)
class MetricParams:
    contact_threshold: float = 1.0
    decay_constant: float = 1000.0
    fall_divisor: float = 5.0
    stable_boundary: float = 0.85
    fall_boundary: float = 0.5

    def __post_init__(self):
        if not self.contact_threshold > 0:
            raise ValueError("contact_threshold must be > 0")
        if not self.decay_constant > 0:
            raise ValueError("decay_constant must be > 0")
        if not 0 < self.fall_boundary < self.stable_boundary < 1:
            raise ValueError("need 0 < fall_boundary < stable_boundary < 1")


DEFAULT_PARAMS = MetricParams()


def as_tactile(img) -> np.ndarray:
    """Validate and return a tactile image as a float64 (5, 5) array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.shape != (N_STEPS, N_POINTS):
        raise TactileFormatError(f"tactile image must be 5x5, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TactileFormatError("tactile image has non-finite entries")
    if np.any(arr < 0):
        raise TactileFormatError("tactile image has negative pressures")
    return arr


def _correlate_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    h, w = img.shape
    out = np.zeros((h - kh + 1, w - kw + 1))
    for di in range(kh):
        for dj in range(kw):
            out += kernel[di, dj] * img[di:di + h - kh + 1, dj:dj + w - kw + 1]
    return out


def time_convolve(img) -> np.ndarray:
    """Per-point pressure change across each movement, shape (4, 5)."""
    return _correlate_valid(as_tactile(img), TIME_KERNEL)


def space_convolve(img) -> np.ndarray:
    """Adjacent-point differential change across each movement, shape (4, 4).

    ``S[t, p] = (img[t, p] - img[t, p+1]) - (img[t+1, p] - img[t+1, p+1])``
    """
    return _correlate_valid(as_tactile(img), SPACE_KERNEL)


def slip_magnitude(img) -> float:
    """Sum of absolute space-kernel responses (the ``x`` of the metric)."""
    return float(np.abs(space_convolve(img)).sum())


def detect_failure(img, params: MetricParams = DEFAULT_PARAMS) -> bool:
    """True when no taxel reached the contact threshold before shaking."""
    arr = as_tactile(img)
    return bool(np.all(arr[0] < params.contact_threshold))


def detect_falling(img, params: MetricParams = DEFAULT_PARAMS) -> Optional[int]:
    """1-based movement index at which the object fell, or None.

    A fall is present when some post-shake row has lost contact on every
    taxel.  The reported index is the movement with the largest absolute
    pressure change (earliest movement on ties).
    """
    arr = as_tactile(img)
    if detect_failure(arr, params):
        raise ValueError("detect_falling requires an image with initial contact")
    empty_rows = np.all(arr[1:] < params.contact_threshold, axis=1)
    if not empty_rows.any():
        return None
    per_movement = np.abs(time_convolve(arr)).max(axis=1)
    return int(np.argmax(per_movement)) + 1


def score_from_slip(x: float, params: MetricParams = DEFAULT_PARAMS) -> float:
    return 0.5 * math.exp(-x / params.decay_constant) + 0.5


def score_from_fall(i: int, params: MetricParams = DEFAULT_PARAMS) -> float:
    return 0.5 * i / params.fall_divisor


def grasp_score(img, params: MetricParams = DEFAULT_PARAMS) -> float:
    arr = as_tactile(img)
    if detect_failure(arr, params):
        return 0.0
    i = detect_falling(arr, params)
    if i is not None:
        return score_from_fall(i, params)
    return score_from_slip(slip_magnitude(arr), params)


def categorize(score: float, params: MetricParams = DEFAULT_PARAMS) -> StabilityCategory:
    """Map a score to its category; interval upper bounds are inclusive."""
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"score {score!r} outside [0, 1]")
    if score == 0.0:
        return StabilityCategory.FAILURE
    if score <= params.fall_boundary:
        return StabilityCategory.FALLING
    if score <= params.stable_boundary:
        return StabilityCategory.SLIPPERY
    return StabilityCategory.STABLE


@dataclass(frozen=True)
class Assessment:
    score: float
    category: StabilityCategory
    failed: bool
    fall_index: Optional[int]
    slip: float


def assess(img, params: MetricParams = DEFAULT_PARAMS) -> Assessment:
    """Score an image and keep the intermediate quantities for reporting."""
    arr = as_tactile(img)
    failed = detect_failure(arr, params)
    fall = None if failed else detect_falling(arr, params)
    score = grasp_score(arr, params)
    return Assessment(score, categorize(score, params), failed, fall, slip_magnitude(arr))


# -- file format: 5 lines of 5 comma-separated decimals, row 0 first ---------

def format_tactile(img) -> str:
    arr = as_tactile(img)
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in arr)


def parse_tactile(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != N_STEPS:
        raise TactileFormatError(f"expected 5 rows, found {len(lines)}")
    rows = []
    for k, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != N_POINTS:
            raise TactileFormatError(f"row {k}: expected 5 values, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise TactileFormatError(f"row {k}: {exc}") from None
    return as_tactile(rows)


def write_tactile(path: Union[str, Path], img) -> None:
    Path(path).write_text(format_tactile(img), encoding="utf-8")


def read_tactile(path: Union[str, Path]) -> np.ndarray:
    return parse_tactile(Path(path).read_text(encoding="utf-8"))
