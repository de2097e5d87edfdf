# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Semantics match ``_fallback`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def choquet_batch(const double[:, ::1] profiles, const double[::1] cap_table):
    """Sorted-increment Choquet integral for every row of ``profiles``.

    ``cap_table[mask]`` is the capacity of the component set encoded by the
    bitmask.  Ties are broken by component index ascending.
    """
    cdef Py_ssize_t n = profiles.shape[0]
    cdef Py_ssize_t k = profiles.shape[1]
    if k > 30:
        raise ValueError("at most 30 components supported")
    if cap_table.shape[0] != (1 << k):
        raise ValueError("capacity table size does not match component count")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef int order[32]
    cdef Py_ssize_t i, a, b
    cdef int tmp, mask
    cdef double prev, total, v
    for i in range(n):
        for a in range(k):
            order[a] = <int>a
        # insertion sort on (value, index): stable, so equal values keep index order
        for a in range(1, k):
            tmp = order[a]
            v = profiles[i, tmp]
            b = a - 1
            while b >= 0 and profiles[i, order[b]] > v:
                order[b + 1] = order[b]
                b -= 1
            order[b + 1] = tmp
        mask = (1 << k) - 1
        prev = 0.0
        total = 0.0
        for a in range(k):
            v = profiles[i, order[a]]
            total += (v - prev) * cap_table[mask]
            prev = v
            mask &= ~(1 << order[a])
        res[i] = total
    return out


def doubled_midranks(const double[::1] x):
    """Twice the 1-based midrank of each entry (an exact integer)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(x, kind="stable").astype(np.int64)
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    cdef cnp.int64_t[::1] o = order
    cdef Py_ssize_t i = 0, j, t
    cdef cnp.int64_t r2
    while i < n:
        j = i
        while j + 1 < n and x[o[j + 1]] == x[o[i]]:
            j += 1
        r2 = (i + 1) + (j + 1)
        for t in range(i, j + 1):
            res[o[t]] = r2
        i = j + 1
    return out


cdef inline int _count_upto(const double[::1] ev, Py_ssize_t lo, Py_ssize_t hi, double t) nogil:
    # events are ascending: count entries <= t by binary search
    cdef Py_ssize_t a = lo, b = hi, mid
    while a < b:
        mid = (a + b) >> 1
        if ev[mid] <= t:
            a = mid + 1
        else:
            b = mid
    return <int>(a - lo)


def pair_matrix(const double[::1] followup, const unsigned char[::1] death,
                const long long[::1] offsets, const double[::1] events):
    """Hierarchical pairwise adjudication over all ordered pairs.

    Entry ``[i, j]`` is +1 if patient ``i`` beats ``j``, -1 if it loses and 0
    on a tie.  Comparisons use the common window ``min(followup_i, followup_j)``.
    """
    cdef Py_ssize_t n = followup.shape[0]
    out = np.zeros((n, n), dtype=np.int8)
    cdef cnp.int8_t[:, ::1] w = out
    cdef Py_ssize_t i, j
    cdef double fi, fj, tau, li, lj
    cdef bint di, dj
    cdef int ci, cj
    cdef signed char r
    with nogil:
        for i in range(n):
            fi = followup[i]
            for j in range(i + 1, n):
                fj = followup[j]
                tau = fi if fi < fj else fj
                di = death[i] != 0 and fi <= tau
                dj = death[j] != 0 and fj <= tau
                r = 0
                if di and not dj:
                    r = -1
                elif dj and not di:
                    r = 1
                elif di and dj and fi != fj:
                    r = 1 if fi > fj else -1
                else:
                    ci = _count_upto(events, offsets[i], offsets[i + 1], tau)
                    cj = _count_upto(events, offsets[j], offsets[j + 1], tau)
                    if ci < cj:
                        r = 1
                    elif ci > cj:
                        r = -1
                    elif ci > 0:
                        li = events[offsets[i] + ci - 1]
                        lj = events[offsets[j] + cj - 1]
                        if li < lj:
                            r = 1
                        elif li > lj:
                            r = -1
                w[i, j] = r
                w[j, i] = -r
    return out
