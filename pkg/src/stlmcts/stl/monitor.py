"""Quantitative (robustness) semantics over sampled traces.

Evaluation is vectorized: each subformula is turned into a robustness array
over every sample of the trace. A sample whose temporal window holds no
samples yields NaN, which propagates to every value that depends on it; if
the requested value ends up NaN the evaluation raises ``EmptyWindowError``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .ast import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Predicate,
    Top,
    Until,
    signals,
)


class STLEvaluationError(ValueError):
    pass


class MissingSignalError(STLEvaluationError, KeyError):
    def __str__(self):
        return self.args[0]


class EmptyWindowError(STLEvaluationError):
    pass


@dataclass(frozen=True, eq=False)
class Trace:
    """Timestamped multichannel signal; arrays are frozen on construction."""

    timestamps: np.ndarray
    channels: Mapping[str, np.ndarray]

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("trace needs at least one sample")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        ts.setflags(write=False)
        chans = {}
        for name, vals in self.channels.items():
            arr = np.array(vals, dtype=float)
            if arr.shape != ts.shape:
                raise ValueError(f"channel {name!r} has {arr.size} values for {ts.size} timestamps")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            arr.setflags(write=False)
            chans[name] = arr
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", chans)

    def __len__(self):
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and self.channels.keys() == other.channels.keys()
            and all(np.array_equal(v, other.channels[k]) for k, v in self.channels.items())
        )

    def prefix(self, n: int) -> "Trace":
        return Trace(self.timestamps[:n], {k: v[:n] for k, v in self.channels.items()})

    def append(self, t: float, values: Mapping[str, float]) -> "Trace":
        return Trace(
            np.append(self.timestamps, t),
            {k: np.append(v, values[k]) for k, v in self.channels.items()},
        )

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if not header or header[0] != "t":
                raise ValueError(f"{path}: first column must be 't'")
            rows = [[float(x) for x in row] for row in reader if row]
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        return cls(data[:, 0], {name: data[:, i] for i, name in enumerate(header) if i > 0})

    def to_csv(self, path) -> None:
        names = list(self.channels)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *names])
            for i, t in enumerate(self.timestamps):
                w.writerow([repr(float(t)), *(repr(float(self.channels[n][i])) for n in names)])


def _window_mask(ts: np.ndarray, iv: Interval) -> np.ndarray | None:
    """Boolean matrix M[t, t'] = (lower <= ts[t'] - ts[t] <= upper); None for [0, inf)."""
    if iv.lower == 0.0 and iv.unbounded:
        return None
    diff = ts[None, :] - ts[:, None]
    return (diff >= iv.lower) & (diff <= iv.upper)


def _reduce_window(vals: np.ndarray, mask: np.ndarray | None, fill: float, ufunc) -> np.ndarray:
    if mask is None:
        return ufunc.accumulate(vals[::-1])[::-1]
    masked = np.where(mask, vals[None, :], fill)
    out = ufunc.reduce(masked, axis=1)
    out[~mask.any(axis=1)] = np.nan
    return out


def robustness_signal(f: Formula, timestamps: np.ndarray, channels: Mapping[str, np.ndarray]) -> np.ndarray:
    """Robustness of ``f`` at every sample index (NaN where a window is empty)."""
    n = len(timestamps)
    if isinstance(f, Top):
        return np.full(n, np.inf)
    if isinstance(f, Predicate):
        try:
            x = channels[f.signal]
        except KeyError:
            raise MissingSignalError(f"signal {f.signal!r} not present in trace") from None
        x = np.asarray(x, dtype=float)
        return x - f.threshold if f.op == ">" else f.threshold - x
    if isinstance(f, Not):
        return -robustness_signal(f.arg, timestamps, channels)
    if isinstance(f, And):
        return np.minimum(
            robustness_signal(f.left, timestamps, channels), robustness_signal(f.right, timestamps, channels)
        )
    if isinstance(f, Or):
        return np.maximum(
            robustness_signal(f.left, timestamps, channels), robustness_signal(f.right, timestamps, channels)
        )
    if isinstance(f, Eventually):
        inner = robustness_signal(f.arg, timestamps, channels)
        return _reduce_window(inner, _window_mask(np.asarray(timestamps, float), f.interval), -np.inf, np.maximum)
    if isinstance(f, Always):
        inner = robustness_signal(f.arg, timestamps, channels)
        return _reduce_window(inner, _window_mask(np.asarray(timestamps, float), f.interval), np.inf, np.minimum)
    if isinstance(f, Until):
        phi = robustness_signal(f.left, timestamps, channels)
        psi = robustness_signal(f.right, timestamps, channels)
        ts = np.asarray(timestamps, float)
        out = np.empty(n)
        for t in range(n):
            dt = ts[t:] - ts[t]
            inwin = (dt >= f.interval.lower) & (dt <= f.interval.upper)
            if not inwin.any():
                out[t] = np.nan
                continue
            # NaN-propagating running min of phi over [t, t']
            run_min = np.minimum.accumulate(phi[t:])
            cand = np.minimum(psi[t:], run_min)
            last = np.flatnonzero(inwin)[-1]
            # phi must be defined on [t, t'] for every candidate t' up to the last one used
            cand = cand[: last + 1][inwin[: last + 1]]
            out[t] = np.max(cand)
        return out
    raise TypeError(f"not a formula: {f!r}")


def _check(f: Formula, trace: Trace, t_index: int) -> None:
    if not 0 <= t_index < len(trace):
        raise IndexError(f"sample index {t_index} outside trace of length {len(trace)}")
    missing = signals(f) - trace.channels.keys()
    if missing:
        raise MissingSignalError(f"signal(s) {sorted(missing)} not present in trace")


def robustness(f: Formula, trace: Trace, t_index: int = 0) -> float:
    """Robustness of ``f`` on ``trace`` at sample ``t_index``."""
    _check(f, trace, t_index)
    value = float(robustness_signal(f, trace.timestamps, trace.channels)[t_index])
    if math.isnan(value):
        raise EmptyWindowError(f"a temporal window is empty when evaluating at sample {t_index}")
    return value


def robustness_prefix(f: Formula, trace: Trace) -> float:
    """Robustness of the whole trace so far, judged from its first sample."""
    return robustness(f, trace, 0)


def satisfies(f: Formula, trace: Trace, t_index: int = 0) -> bool:
    """Boolean sampled semantics, by direct recursion (no robustness values)."""
    _check(f, trace, t_index)
    ts = trace.timestamps

    def window(iv: Interval, t: int) -> list[int]:
        idx = [k for k in range(t, len(ts)) if iv.lower <= ts[k] - ts[t] <= iv.upper]
        if not idx:
            raise EmptyWindowError(f"empty window at sample {t}")
        return idx

    def sat(g: Formula, t: int) -> bool:
        if isinstance(g, Top):
            return True
        if isinstance(g, Predicate):
            x = trace.channels[g.signal][t]
            return bool(x > g.threshold) if g.op == ">" else bool(x < g.threshold)
        if isinstance(g, Not):
            return not sat(g.arg, t)
        if isinstance(g, And):
            return sat(g.left, t) and sat(g.right, t)
        if isinstance(g, Or):
            return sat(g.left, t) or sat(g.right, t)
        if isinstance(g, Eventually):
            return any(sat(g.arg, k) for k in window(g.interval, t))
        if isinstance(g, Always):
            return all(sat(g.arg, k) for k in window(g.interval, t))
        if isinstance(g, Until):
            return any(
                sat(g.right, k) and all(sat(g.left, j) for j in range(t, k + 1)) for k in window(g.interval, t)
            )
        raise TypeError(f"not a formula: {g!r}")

    return sat(f, t_index)
