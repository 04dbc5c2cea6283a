"""Weighted samples and mergeable sufficient statistics.

A :class:`SuffStats` holds every running sum needed by the estimators in
:mod:`isstop.estimators`, so a sample stream can be summarized in one pass
and partial summaries from different workers combined with :func:`merge`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .errors import DataError, DimensionMismatchError


@dataclass(frozen=True)
class WeightedBatch:
    """Draws from one simulation segment.

    Parameters
    ----------
    hvals : ndarray, shape (n, p)
        Integrand evaluations ``h(X_i)``.
    weights : ndarray, shape (n,)
        Unnormalized, nonnegative importance weights.
    draws : ndarray, shape (n, s), optional
        Raw draws, kept only when a new ``h`` may need to be evaluated later.
    """

    hvals: np.ndarray
    weights: np.ndarray
    draws: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.hvals, dtype=np.float64)
        if h.ndim == 1:
            h = h[:, None]
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if h.ndim != 2:
            raise DataError(f"hvals must be 2-D, got shape {h.shape}")
        if h.shape[0] != w.shape[0]:
            raise DataError(
                f"hvals has {h.shape[0]} rows but weights has {w.shape[0]} entries"
            )
        if not np.all(np.isfinite(w)):
            raise DataError("weights contain non-finite values")
        if not np.all(np.isfinite(h)):
            raise DataError("hvals contain non-finite values")
        if np.any(w < 0):
            raise DataError("weights must be nonnegative")
        object.__setattr__(self, "hvals", np.ascontiguousarray(h))
        object.__setattr__(self, "weights", np.ascontiguousarray(w))
        if self.draws is not None:
            d = np.asarray(self.draws, dtype=np.float64)
            if d.ndim == 1:
                d = d[:, None]
            if d.shape[0] != w.shape[0]:
                raise DataError("draws row count must equal weights length")
            object.__setattr__(self, "draws", d)

    @classmethod
    def from_log_weights(cls, hvals, log_weights, draws=None, offset=0.0):
        """Build a batch from log weights, exponentiated after subtracting ``offset``."""
        lw = np.asarray(log_weights, dtype=np.float64)
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise DataError("log weights contain NaN or +inf")
        return cls(hvals, np.exp(lw - offset), draws)

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def p(self):
        return self.hvals.shape[1]


def _layout(p):
    """Offsets of each block in the flat accumulator vector."""
    o = {"Sw": 0, "Sw2": 1, "Swh": 2, "Sw2h": 2 + p, "Sawh": 2 + 2 * p}
    o["Swhh"] = 2 + 3 * p
    o["Sw2hh"] = o["Swhh"] + p * p
    o["size"] = o["Sw2hh"] + p * p
    return o


def _mirror(block, p):
    m = block.reshape(p, p)
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Running sums over a weighted sample stream.

    All sums are stored as a compensated pair (value, correction) in one flat
    vector; use the named properties to read them. Instances are treated as
    values: :func:`accumulate` and :func:`merge` return new objects.
    """

    p: int
    n: int
    _acc: np.ndarray
    _comp: np.ndarray

    @classmethod
    def empty(cls, p):
        if p < 1:
            raise DataError(f"dimension must be at least 1, got {p}")
        size = _layout(p)["size"]
        return cls(p, 0, np.zeros(size), np.zeros(size))

    @property
    def _total(self):
        return self._acc + self._comp

    def _block(self, name, length):
        o = _layout(self.p)[name]
        return self._total[o:o + length]

    @property
    def Sw(self):
        return float(self._total[0])

    @property
    def Sw2(self):
        return float(self._total[1])

    @property
    def Swh(self):
        return self._block("Swh", self.p)

    @property
    def Sw2h(self):
        return self._block("Sw2h", self.p)

    @property
    def Sawh(self):
        """Per-coordinate sum of ``|h_j| w``, needed by Owen's ESS."""
        return self._block("Sawh", self.p)

    @property
    def Swhh(self):
        return _mirror(self._block("Swhh", self.p * self.p), self.p)

    @property
    def Sw2hh(self):
        return _mirror(self._block("Sw2hh", self.p * self.p), self.p)

    # Same sums viewed from the unnormalized estimator.
    Sh = Swh
    Shh_w = Sw2hh

    def scaled(self, c):
        """Statistics for the same stream with every weight multiplied by ``c``."""
        if not (c > 0 and np.isfinite(c)):
            raise DataError(f"scale must be positive and finite, got {c}")
        o = _layout(self.p)
        factor = np.empty(o["size"])
        factor[:] = c
        factor[o["Sw2"]] = c * c
        factor[o["Sw2h"]:o["Sw2h"] + self.p] = c * c
        factor[o["Sw2hh"]:] = c * c
        return SuffStats(self.p, self.n, self._acc * factor, self._comp * factor)

    def allclose(self, other, rtol=1e-10):
        """Compare to another instance, relative to each block's magnitude."""
        if self.p != other.p or self.n != other.n:
            return False
        a, b = self._total, other._total
        scale = np.maximum(np.abs(a), np.abs(b))
        return bool(np.all(np.abs(a - b) <= rtol * np.maximum(scale, 1e-300)))

    def __repr__(self):
        return f"SuffStats(p={self.p}, n={self.n}, Sw={self.Sw:.6g})"


def accumulate(stats: SuffStats, batch: WeightedBatch, *, kernel=None) -> SuffStats:
    """Return ``stats`` extended by every sample in ``batch``.

    ``kernel`` overrides the backend chosen at import (used by tests and the
    benchmark to compare the compiled and fallback paths).
    """
    if batch.p != stats.p:
        raise DimensionMismatchError(f"batch has p={batch.p}, stats has p={stats.p}")
    acc = stats._acc.copy()
    comp = stats._comp.copy()
    if batch.n:
        (kernel or _backend.accumulate_into)(acc, comp, batch.hvals, batch.weights)
    return SuffStats(stats.p, stats.n + batch.n, acc, comp)


def merge(a: SuffStats, b: SuffStats) -> SuffStats:
    """Combine statistics from two disjoint sample streams."""
    if a.p != b.p:
        raise DimensionMismatchError(f"cannot merge p={a.p} with p={b.p}")
    s = a._acc + b._acc
    big = np.abs(a._acc) >= np.abs(b._acc)
    err = np.where(big, (a._acc - s) + b._acc, (b._acc - s) + a._acc)
    return SuffStats(a.p, a.n + b.n, s, a._comp + b._comp + err)


def stats_from_batch(batch: WeightedBatch) -> SuffStats:
    return accumulate(SuffStats.empty(batch.p), batch)


def read_batch_csv(path) -> WeightedBatch:
    """Read a batch from CSV with header ``w,h1,...,hp``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0] != "w" or len(header) < 2:
            raise DataError(f"{path}: header must be 'w,h1,...,hp', got {header}")
        expected = [f"h{j}" for j in range(1, len(header))]
        if header[1:] != expected:
            raise DataError(f"{path}: expected columns {expected}, got {header[1:]}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    data = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return WeightedBatch(data[:, 1:], data[:, 0])


def write_batch_csv(batch: WeightedBatch, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"h{j}" for j in range(1, batch.p + 1)])
        for w, h in zip(batch.weights, batch.hvals):
            writer.writerow([repr(float(w))] + [repr(float(x)) for x in h])


class LogWeightOffset:
    """Running offset subtracted from log-weights before exponentiating.

    Self-normalized estimators are invariant to a common weight scale, so the
    offset is set from the first batch's largest log-weight and raised (with
    the running sums rescaled to match) whenever a later batch exceeds it by
    more than ``headroom``. With ``enabled=False`` the weights are used as-is,
    as the unnormalized estimator requires.
    """

    def __init__(self, enabled=True, headroom=50.0):
        self.enabled = enabled
        self.headroom = headroom
        self.value = 0.0
        self._set = False

    def batch(self, stats, hvals, log_weights):
        """Return ``(stats, batch)`` with ``stats`` rescaled if the offset moved."""
        lw = np.asarray(log_weights, dtype=np.float64)
        if self.enabled:
            finite = lw[np.isfinite(lw)]
            if finite.size:
                top = float(finite.max())
                if not self._set:
                    self.value, self._set = top, True
                elif top > self.value + self.headroom:
                    stats = stats.scaled(float(np.exp(self.value - top)))
                    self.value = top
        return stats, WeightedBatch.from_log_weights(hvals, lw, offset=self.value)
