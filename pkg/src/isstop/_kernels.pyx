# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compensated accumulation of weighted moment sums.

Accumulator layout for dimension ``p`` (see :mod:`isstop.samples`)::

    [Sw, Sw2, Swh[p], Sw2h[p], Sawh[p], Swhh[p*p], Sw2hh[p*p]]

Only the upper triangle (j <= k) of the two matrix blocks is touched; the
lower triangle is mirrored when the statistics are read.
"""

cdef inline void _neumaier(double* acc, double* comp, Py_ssize_t i, double x) noexcept nogil:
    cdef double s = acc[i] + x
    if abs(acc[i]) >= abs(x):
        comp[i] += (acc[i] - s) + x
    else:
        comp[i] += (x - s) + acc[i]
    acc[i] = s


def accumulate_into(double[::1] acc, double[::1] comp,
                    const double[:, ::1] hvals, const double[::1] weights):
    """Add every row of ``(hvals, weights)`` into ``acc``/``comp`` in place."""
    cdef Py_ssize_t n = hvals.shape[0]
    cdef Py_ssize_t p = hvals.shape[1]
    cdef Py_ssize_t o_wh = 2, o_w2h = 2 + p, o_awh = 2 + 2 * p
    cdef Py_ssize_t o_whh = 2 + 3 * p, o_w2hh = 2 + 3 * p + p * p
    cdef Py_ssize_t i, j, k
    cdef double w, w2, hj, whj, w2hj
    cdef double* a = &acc[0]
    cdef double* c = &comp[0]
    with nogil:
        for i in range(n):
            w = weights[i]
            w2 = w * w
            _neumaier(a, c, 0, w)
            _neumaier(a, c, 1, w2)
            for j in range(p):
                hj = hvals[i, j]
                whj = w * hj
                w2hj = w2 * hj
                _neumaier(a, c, o_wh + j, whj)
                _neumaier(a, c, o_w2h + j, w2hj)
                _neumaier(a, c, o_awh + j, abs(whj))
                for k in range(j, p):
                    _neumaier(a, c, o_whh + j * p + k, whj * hvals[i, k])
                    _neumaier(a, c, o_w2hh + j * p + k, w2hj * hvals[i, k])
