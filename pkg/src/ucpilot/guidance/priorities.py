"""Rank-based mapping of scores to integer branch priorities."""
from __future__ import annotations

import math


def scores_to_priorities(scores: dict[int, float]) -> dict[int, int]:
    """Bucket scores into deciles 0..9 within the instance.

    Rank-based, so any strictly increasing transform of the scores yields
    identical priorities; ties share a bucket.
    """
    if not scores:
        return {}
    for v in scores.values():
        if not math.isfinite(v):
            raise ValueError("scores must be finite")
    vals = sorted(scores.values())
    n = len(vals)
    out = {}
    for col, v in scores.items():
        below = _count_below(vals, v)
        out[col] = min(9, int(10 * below / n))
    return out


def _count_below(sorted_vals: list[float], v: float) -> int:
    lo, hi = 0, len(sorted_vals)
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_vals[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo
