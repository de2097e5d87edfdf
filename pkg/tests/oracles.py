"""Slow, obviously-correct reference implementations used only by the tests.

Nothing here shares code with the library's fast paths: capacities are
summed subset by subset, CBI counts every pair with exact fractions, the
Cox partial likelihood is written out term by term and maximized with a
generic scalar optimizer, and the WLW covariance is checked against a
leave-one-subject-out jackknife.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from cwotce.records import PatientRecord


# ---------------------------------------------------------------- Choquet


def subset_capacity(singletons, pairs, subset) -> float:
    """mu(A) as the sum of Moebius masses of every subset of A (sizes 1 and 2)."""
    a = sorted(subset)
    total = math.fsum(singletons[c - 1] for c in a)
    total += math.fsum(pairs.get((i, j), 0.0) for i, j in itertools.combinations(a, 2))
    return total


def brute_force_choquet(singletons, pairs, y) -> float:
    """Sorted-increment formula with all 2^K capacities tabulated up front."""
    k = len(y)
    cap = {}
    for r in range(k + 1):
        for a in itertools.combinations(range(1, k + 1), r):
            cap[frozenset(a)] = subset_capacity(singletons, pairs, a)
    order = sorted(range(1, k + 1), key=lambda c: (y[c - 1], c))
    prev = 0.0
    total = 0.0
    for pos, c in enumerate(order):
        upper = frozenset(order[pos:])
        total += (y[c - 1] - prev) * cap[upper]
        prev = y[c - 1]
    return total


def moebius_choquet(singletons, pairs, y) -> float:
    """Equivalent Moebius form: sum over A of m(A) * min_{i in A} y_i."""
    total = math.fsum(m * y[c] for c, m in enumerate(singletons))
    total += math.fsum(v * min(y[i - 1], y[j - 1]) for (i, j), v in pairs.items())
    return total


# ---------------------------------------------------------------- CBI / permutations


def all_pairs_cbi(trt, ctrl) -> Fraction:
    wins = sum(1 for a in trt for c in ctrl if a > c)
    ties = sum(1 for a in trt for c in ctrl if a == c)
    return Fraction(2 * wins + ties, 2 * len(trt) * len(ctrl))


def exhaustive_p_value(scores, labels) -> Fraction:
    """Fraction of all label assignments at least as extreme as the observed one."""
    scores = list(scores)
    n = len(scores)
    n1 = int(sum(labels))
    obs_t = [s for s, l in zip(scores, labels) if l]
    obs_c = [s for s, l in zip(scores, labels) if not l]
    d_obs = abs(all_pairs_cbi(obs_t, obs_c) - Fraction(1, 2))
    hits = count = 0
    for chosen in itertools.combinations(range(n), n1):
        sel = set(chosen)
        t = [scores[i] for i in range(n) if i in sel]
        c = [scores[i] for i in range(n) if i not in sel]
        count += 1
        hits += abs(all_pairs_cbi(t, c) - Fraction(1, 2)) >= d_obs
    return Fraction(hits, count)


# ---------------------------------------------------------------- Cox


def efron_partial_loglik(beta, time, event, x) -> float:
    """Efron-approximated log partial likelihood, one explicit loop per event time."""
    time = list(map(float, time))
    event = list(map(bool, event))
    x = list(map(float, x))
    ll = 0.0
    for t in sorted({ti for ti, ei in zip(time, event) if ei}):
        dead = [i for i in range(len(time)) if time[i] == t and event[i]]
        risk = [i for i in range(len(time)) if time[i] >= t]
        d = len(dead)
        s_risk = sum(math.exp(beta * x[i]) for i in risk)
        s_dead = sum(math.exp(beta * x[i]) for i in dead)
        for l in range(d):
            ll += beta * x[dead[l]] - math.log(s_risk - l / d * s_dead)
    return ll


def cox_beta_direct(time, event, x, bound: float = 20.0) -> float:
    res = minimize_scalar(lambda b: -efron_partial_loglik(b, time, event, x),
                          bounds=(-bound, bound), method="bounded",
                          options={"xatol": 1e-10, "maxiter": 500})
    return float(res.x)


# ---------------------------------------------------------------- WLW


def wlw_jackknife_cov(cohort, fit_betas) -> np.ndarray:
    """Leave-one-subject-out jackknife covariance of the two stratum betas.

    ``fit_betas(cohort) -> (beta_death, beta_event)``.
    """
    n = len(cohort)
    reps = np.array([fit_betas(cohort.subset([j for j in range(n) if j != i])) for i in range(n)])
    centred = reps - reps.mean(axis=0)
    return (n - 1) / n * centred.T @ centred


# ---------------------------------------------------------------- Win Ratio


def hand_adjudicate(a, b) -> int:
    """Spelled-out tier rules on two (followup, death, events) tuples; +1 = a wins."""
    fa, da, ea = a
    fb, db, eb = b
    window = min(fa, fb)
    a_dies = da and fa <= window
    b_dies = db and fb <= window
    if a_dies != b_dies:
        return -1 if a_dies else 1
    if a_dies and b_dies and fa != fb:
        return 1 if fa > fb else -1
    na = [t for t in ea if t <= window]
    nb = [t for t in eb if t <= window]
    if len(na) < len(nb):
        return 1
    if len(na) > len(nb):
        return -1
    if na and max(na) != max(nb):
        return 1 if max(na) < max(nb) else -1
    return 0


# ---------------------------------------------------------------- fixtures shared by comparator checks


def mirrored(records):
    """Each record plus a copy with the other arm: a perfectly symmetric cohort."""
    out = []
    for r in records:
        out.append(r)
        out.append(PatientRecord(r.id + "m", 1 - r.arm, r.followup_time, r.death_observed, r.event_times,
                                  r.biomarker))
    return out


def small_cox_datasets(count=10, seed=1):
    rng = np.random.default_rng(seed)
    found = []
    while len(found) < count:
        n = int(rng.integers(4, 9))
        time = rng.integers(1, 5, n).astype(float)  # heavy ties
        event = rng.random(n) < 0.7
        x = rng.integers(0, 2, n)
        if not event.any() or x.min() == x.max():
            continue
        beta = cox_beta_direct(time, event, x)
        if abs(beta) < 5:  # skip monotone-likelihood draws
            found.append((time, event, x, beta))
    return found
