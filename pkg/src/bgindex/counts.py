"""Threshold-exceedance counts of increments and of recorded jumps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ABSOLUTE, POSITIVE, NEGATIVE = "absolute", "positive", "negative"
_SIDES = (ABSOLUTE, POSITIVE, NEGATIVE)


@dataclass(frozen=True)
class TailCountCurve:
    """Counts ``U(u, delta)_T`` at strictly increasing thresholds ``u``.

    Counts from data are integers and nonincreasing in ``u``; real-valued
    counts are accepted for synthetic curves.
    """

    thresholds: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.thresholds, dtype=float)
        c = np.asarray(self.counts)
        if not np.issubdtype(c.dtype, np.integer):
            # real-valued counts are allowed for synthetic (noiseless) curves
            c = c.astype(float)
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if u.shape != c.shape or u.ndim != 1:
            raise ValueError("thresholds and counts must be 1-d arrays of equal length")
        if np.any(u <= 0) or np.any(np.diff(u) <= 0):
            raise ValueError("thresholds must be positive and strictly increasing")
        object.__setattr__(self, "thresholds", u)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.thresholds.shape[0]


def _signed_values(x, side):
    x = np.asarray(getattr(x, "increments", x), dtype=float)
    if side == ABSOLUTE:
        return np.abs(x)
    if side == POSITIVE:
        return x
    if side == NEGATIVE:
        return -x
    raise ValueError(f"side must be one of {_SIDES}, got {side!r}")


def count_increments(series, u: float, side: str = ABSOLUTE) -> int:
    """Number of increments beyond ``u`` (strict inequality).

    ``series`` is an :class:`~bgindex.simulate.IncrementSeries` or an array.
    """
    if not u > 0:
        raise ValueError("threshold must be positive")
    return int(np.count_nonzero(_signed_values(series, side) > u))


def exceedance_counts(series, thresholds, side: str = ABSOLUTE) -> np.ndarray:
    """Counts ``#{x_i > u}`` for every ``u`` in ``thresholds`` (any order)."""
    u = np.asarray(thresholds, dtype=float)
    if np.any(u <= 0):
        raise ValueError("thresholds must be positive")
    vals = _signed_values(series, side)
    if u.size == 0:
        return np.zeros(0, dtype=np.int64)
    # only values above the smallest threshold matter
    big = np.sort(vals[vals > u.min()])
    return (big.size - np.searchsorted(big, u, side="right")).astype(np.int64)


def tail_curve(series, thresholds, side: str = ABSOLUTE) -> TailCountCurve:
    u = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(u) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    return TailCountCurve(u, exceedance_counts(series, u, side))


def count_true_jumps(jump_record, u: float, floor: float | None = None) -> int:
    """Number of recorded jumps with ``|size| > u``.

    ``jump_record`` is an ``(k, 2)`` array of ``(time, size)`` or an
    :class:`~bgindex.simulate.IncrementSeries` carrying one.
    """
    if hasattr(jump_record, "increments"):
        floor = jump_record.floor if floor is None else floor
        jump_record = jump_record.jump_record
        if jump_record is None:
            raise ValueError("series carries no jump record")
    if floor is not None and u < floor:
        raise ValueError(f"threshold {u} below the simulation floor {floor}: jumps are missing")
    rec = np.asarray(jump_record, dtype=float).reshape(-1, 2)
    return int(np.count_nonzero(np.abs(rec[:, 1]) > u))
