"""Peak accuracy (AccN), post-threshold instability (DropM) and rolling means.

Accuracies are fractions in [0, 1]; the DropM threshold ``M`` is a percentage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .exceptions import InputError

DROP_WINDOW = 10
WINDOW_MODES = ("sliding", "anchored")


@dataclass(frozen=True)
class AccuracySeries:
    values: tuple[float, ...]
    strategy: str = ""
    config_fingerprint: str = ""

    def __len__(self):
        return len(self.values)


def series_from_log(log, strategy: str = "", config_fingerprint: str = "") -> AccuracySeries:
    return AccuracySeries(tuple(r.mean_accuracy for r in log), strategy, config_fingerprint)


def _values(series) -> list[float]:
    return list(series.values) if isinstance(series, AccuracySeries) else list(series)


def acc_n(series, n: int) -> float:
    """Best accuracy within the first ``n`` rounds."""
    values = _values(series)
    if not 1 <= n <= len(values):
        raise InputError(f"N must lie in [1, {len(values)}], got {n}")
    return max(values[:n])


def drop_m(series, m: float, window: int = DROP_WINDOW, mode: str = "sliding") -> Optional[float]:
    """Largest max-min spread inside a ``window``-round window once accuracy reaches ``m`` percent.

    ``sliding`` scans every window starting at or after the first crossing
    (trailing windows may be shorter); ``anchored`` looks only at the window
    starting at the crossing. Returns None when the threshold is never reached.
    """
    values = _values(series)
    if not values:
        raise InputError("DropM of an empty series is undefined")
    if not 0.0 <= m <= 100.0:
        raise InputError(f"M must lie in [0, 100], got {m}")
    if mode not in WINDOW_MODES:
        raise InputError(f"unknown window mode {mode!r}")
    threshold = m / 100.0
    start = next((i for i, v in enumerate(values) if v >= threshold), None)
    if start is None:
        return None
    starts = range(start, len(values)) if mode == "sliding" else [start]
    return max(max(values[i:i + window]) - min(values[i:i + window]) for i in starts)


def rolling_mean(series, window: int = DROP_WINDOW) -> list[float]:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    if window < 1:
        raise InputError("window must be >= 1")
    values = _values(series)
    out = []
    for i in range(len(values)):
        chunk = values[max(0, i - window + 1):i + 1]
        # offsets from the first entry keep constant stretches exact
        out.append(chunk[0] + math.fsum(v - chunk[0] for v in chunk) / len(chunk))
    return out


def _ordinal(keys: list) -> list[int]:
    order = sorted(range(len(keys)), key=lambda i: (keys[i], i))
    ranks = [0] * len(keys)
    for r, i in enumerate(order, start=1):
        ranks[i] = r
    return ranks


def compare_strategies(
    series_list: Sequence,
    n: int,
    m: float,
    labels: Optional[Sequence[str]] = None,
    window: int = DROP_WINDOW,
    mode: str = "sliding",
) -> list[dict]:
    """One row per series with AccN, DropM, final rolling mean and ordinal ranks.

    ``rank`` orders by AccN (higher first, ties keep input order);
    ``drop_rank`` orders by DropM (lower first, unmeasurable last).
    """
    rows = []
    for i, s in enumerate(series_list):
        if labels is not None:
            label = labels[i]
        elif isinstance(s, AccuracySeries) and s.strategy:
            label = s.strategy
        else:
            label = f"series{i}"
        rows.append({
            "strategy": label,
            "acc_n": acc_n(s, n),
            "drop_m": drop_m(s, m, window, mode),
            "final_rolling_mean": rolling_mean(s, window)[-1],
        })
    for r, rank in zip(rows, _ordinal([-r["acc_n"] for r in rows])):
        r["rank"] = rank
    drop_keys = [(r["drop_m"] is None, r["drop_m"] or 0.0) for r in rows]
    for r, rank in zip(rows, _ordinal(drop_keys)):
        r["drop_rank"] = rank
    return rows
