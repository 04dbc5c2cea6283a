"""Numpy fallback for :mod:`isstop._kernels`.

Each chunk is reduced with numpy's pairwise summation and the chunk totals
are folded into the running accumulators with Neumaier compensation, so the
error stays within a few ulps of the compiled per-sample kernel.
"""

import numpy as np

_CHUNK_ENTRIES = 1 << 21


def _neumaier_add(acc, comp, idx, x):
    s = acc[idx] + x
    big = np.abs(acc[idx]) >= np.abs(x)
    comp[idx] += np.where(big, (acc[idx] - s) + x, (x - s) + acc[idx])
    acc[idx] = s


def accumulate_into(acc, comp, hvals, weights):
    """Add every row of ``(hvals, weights)`` into ``acc``/``comp`` in place."""
    n, p = hvals.shape
    ju, ku = np.triu_indices(p)
    o_whh = 2 + 3 * p
    o_w2hh = o_whh + p * p
    idx = np.concatenate([
        np.arange(2 + 3 * p),
        o_whh + ju * p + ku,
        o_w2hh + ju * p + ku,
    ])
    rows = max(1, _CHUNK_ENTRIES // max(1, idx.size))
    for start in range(0, n, rows):
        h = hvals[start:start + rows]
        w = weights[start:start + rows]
        w2 = w * w
        wh = w[:, None] * h
        w2h = w2[:, None] * h
        parts = [
            w.sum(keepdims=True),
            w2.sum(keepdims=True),
            wh.sum(axis=0),
            w2h.sum(axis=0),
            np.abs(wh).sum(axis=0),
            (wh[:, ju] * h[:, ku]).sum(axis=0),
            (w2h[:, ju] * h[:, ku]).sum(axis=0),
        ]
        _neumaier_add(acc, comp, idx, np.concatenate(parts))
