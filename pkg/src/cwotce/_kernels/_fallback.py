"""Pure numpy implementations of the compiled kernels."""

import numpy as np


def choquet_batch(profiles, cap_table):
    profiles = np.ascontiguousarray(profiles, dtype=np.float64)
    cap_table = np.ascontiguousarray(cap_table, dtype=np.float64)
    n, k = profiles.shape
    if cap_table.shape[0] != (1 << k):
        raise ValueError("capacity table size does not match component count")
    order = np.argsort(profiles, axis=1, kind="stable")
    sorted_vals = np.take_along_axis(profiles, order, axis=1)
    increments = np.diff(sorted_vals, axis=1, prepend=0.0)
    # mask of A_i = full set minus the components sorted before position i
    bits = np.left_shift(1, order)
    removed = np.cumsum(bits, axis=1) - bits
    masks = (1 << k) - 1 - removed
    # accumulate left to right to mirror the compiled summation order
    total = np.zeros(n)
    caps = cap_table[masks]
    for a in range(k):
        total += increments[:, a] * caps[:, a]
    return total


def doubled_midranks(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    # start and end positions (1-based) of each tie block
    new_block = np.empty(n, dtype=bool)
    if n:
        new_block[0] = True
        new_block[1:] = xs[1:] != xs[:-1]
    starts = np.flatnonzero(new_block)
    ends = np.append(starts[1:], n) - 1
    block_id = np.cumsum(new_block) - 1
    r2 = (starts[block_id] + 1) + (ends[block_id] + 1)
    out = np.empty(n, dtype=np.int64)
    out[order] = r2
    return out


def pair_matrix(followup, death, offsets, events):
    followup = np.asarray(followup, dtype=np.float64)
    death = np.asarray(death, dtype=bool)
    offsets = np.asarray(offsets, dtype=np.int64)
    events = np.asarray(events, dtype=np.float64)
    n = followup.shape[0]
    tau = np.minimum.outer(followup, followup)
    died_in = death[:, None] & (followup[:, None] <= tau)
    counts = np.empty((n, n), dtype=np.int64)
    last = np.full((n, n), np.nan)
    for i in range(n):
        ev = events[offsets[i]:offsets[i + 1]]
        c = np.searchsorted(ev, tau[i], side="right")
        counts[i] = c
        if ev.shape[0]:
            pos = c > 0
            last[i, pos] = ev[c[pos] - 1]
    di, dj = died_in, died_in.T
    fi, fj = followup[:, None], followup[None, :]
    ci, cj = counts, counts.T
    li, lj = last, last.T
    out = np.zeros((n, n), dtype=np.int8)
    undecided = np.ones((n, n), dtype=bool)

    def settle(cond, value):
        hit = undecided & cond
        out[hit] = value
        undecided[hit] = False

    settle(di & ~dj, -1)
    settle(dj & ~di, 1)
    both = di & dj & (fi != fj)
    settle(both & (fi > fj), 1)
    settle(both & (fi < fj), -1)
    settle(ci < cj, 1)
    settle(ci > cj, -1)
    tier3 = (ci == cj) & (ci > 0)
    with np.errstate(invalid="ignore"):
        settle(tier3 & (li < lj), 1)
        settle(tier3 & (li > lj), -1)
    np.fill_diagonal(out, 0)
    return out
