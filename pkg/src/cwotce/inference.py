"""Choquet Benefit Index, permutation inference and component attribution."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernels, rng
from .capacity import FuzzyMeasure, choquet_scores
from .errors import DegenerateLabels, EmptyGroup, InsufficientPermutations, ZeroAttribution

NEUTRAL_SCORE = 0.5
# Deviations closer than this are the same lattice point (spacing is
# 1 / (2 n_trt n_ctrl), far above float noise for any realistic n).
TIE_TOL = 1e-12


@dataclass(frozen=True)
class CbiResult:
    cbi: float
    cor: float
    p_value: float
    ci_lo: float
    ci_hi: float
    cor_ci_lo: float
    cor_ci_hi: float
    b: int
    alpha: float
    excludes_null: bool

    @property
    def rejected(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        return {
            "cbi": self.cbi,
            "cor": _json_float(self.cor),
            "p_value": self.p_value,
            "ci": [self.ci_lo, self.ci_hi],
            "cor_ci": [_json_float(self.cor_ci_lo), _json_float(self.cor_ci_hi)],
            "B": self.b,
            "alpha": self.alpha,
            "ci_excludes_half": self.excludes_null,
        }


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


@dataclass(frozen=True)
class AttributionResult:
    components: tuple
    drops: np.ndarray
    percentages: Optional[np.ndarray]
    total_effect: float

    def to_dict(self) -> dict:
        rows = []
        for i, name in enumerate(self.components):
            rows.append({
                "component": name,
                "drop": float(self.drops[i]),
                "percent": None if self.percentages is None else float(self.percentages[i]),
            })
        return {"total_effect": self.total_effect, "components": rows}


def _split(labels) -> tuple:
    labels = np.asarray(labels)
    trt = labels.astype(bool)
    n1 = int(trt.sum())
    n2 = trt.shape[0] - n1
    if n1 == 0 or n2 == 0:
        raise DegenerateLabels("both arms must contain at least one subject")
    return trt, n1, n2


def cbi(scores_trt: Sequence[float], scores_ctrl: Sequence[float]) -> float:
    """``P(trt > ctrl) + 0.5 P(trt = ctrl)`` from pooled midranks."""
    a = np.asarray(scores_trt, dtype=np.float64)
    c = np.asarray(scores_ctrl, dtype=np.float64)
    n1, n2 = a.shape[0], c.shape[0]
    if n1 == 0 or n2 == 0:
        raise EmptyGroup("both groups must be nonempty")
    r2 = _kernels.doubled_midranks(np.concatenate([a, c]))
    two_u = int(r2[:n1].sum()) - n1 * (n1 + 1)
    return two_u / (2.0 * n1 * n2)


@lru_cache(maxsize=16)
def _permutation_indices(n: int, b: int, seed) -> np.ndarray:
    key = rng.derive_key("permutation", seed)
    out = np.empty((b, n), dtype=np.int64)
    for r in range(b):
        out[r] = rng.indexed_stream(key, r).permutation(n)
    out.setflags(write=False)
    return out


def permutation_indices(n: int, b: int, seed) -> np.ndarray:
    """Row ``r`` is the permutation for replicate ``r``; a pure function of (seed, r)."""
    return _permutation_indices(int(n), int(b), seed)


def linear_permutation_counts(subject_scores, labels, b: int, seed) -> tuple:
    """Exact two-sided null counts for a sum-over-treated statistic.

    The statistic is ``sum_{treated} s_i`` for integer subject scores ``s``;
    deviations are centred as ``n * T - n_trt * sum(s)``, which stays integer.

    Returns ``(k_obs, k_perm)``: the observed and permuted deviations.
    """
    s = np.asarray(subject_scores, dtype=np.int64)
    trt, n1, _ = _split(labels)
    n = s.shape[0]
    total = int(s.sum())
    k_obs = n * int(s[trt].sum()) - n1 * total
    perms = permutation_indices(n, b, seed)
    permuted = trt[perms]
    k_perm = n * (permuted @ s) - n1 * total
    return k_obs, k_perm


def p_value_from_count(exceed: int, b: int) -> float:
    return (1 + exceed) / (b + 1)


def permutation_test(scores, labels, b: int = 999, seed=0) -> tuple:
    """Two-sided label-permutation test of CBI = 0.5.

    Returns ``(p_value, null_deviations)`` where the deviations are
    ``CBI_perm - 0.5`` for each of the ``b`` replicates.
    """
    if b < 19:
        raise InsufficientPermutations("at least 19 permutations are required")
    scores = np.asarray(scores, dtype=np.float64)
    trt, n1, n2 = _split(labels)
    r2 = _kernels.doubled_midranks(scores)
    k_obs, k_perm = linear_permutation_counts(r2, trt, b, seed)
    exceed = int(np.count_nonzero(np.abs(k_perm) >= abs(k_obs)))
    # k = n * (2U - n1 n2); deviation = (2U - n1 n2) / (2 n1 n2)
    n = scores.shape[0]
    null = (k_perm // n) / (2.0 * n1 * n2)
    return p_value_from_count(exceed, b), null


def exact_permutation_test(scores, labels) -> float:
    """Two-sided p-value over every distinct assignment of the treated labels.

    The observed assignment is one of the enumerated ones, so the smallest
    attainable value is ``2 / C(n, n_trt)`` for a symmetric statistic.
    Only sensible for tiny samples.
    """
    scores = np.asarray(scores, dtype=np.float64)
    trt, n1, _ = _split(labels)
    n = scores.shape[0]
    r2 = _kernels.doubled_midranks(scores).astype(np.int64)
    total = int(r2.sum())
    k_obs = abs(n * int(r2[trt].sum()) - n1 * total)
    hits = count = 0
    for chosen in itertools.combinations(range(n), n1):
        count += 1
        k = abs(n * int(r2[list(chosen)].sum()) - n1 * total)
        hits += k >= k_obs
    return hits / count


def ci_rank(b: int, alpha: float) -> int:
    """Order statistic of |null deviations| used as the CI half-width.

    The rank is tied to the p-value rule: with ``c`` exceedances the test
    rejects iff ``(1 + c) / (b + 1) < alpha``, so the half-width must be the
    ``b - c_max``-th smallest deviation, ``c_max`` being the largest
    rejecting count.  For b = 999 and alpha = 0.05 this is 951.
    """
    c_max = math.ceil(alpha * (b + 1)) - 2
    # settle float edge cases with the exact rejection rule
    while c_max + 1 <= b and p_value_from_count(c_max + 1, b) < alpha:
        c_max += 1
    while c_max >= 0 and not p_value_from_count(c_max, b) < alpha:
        c_max -= 1
    r = b - c_max
    if not 0.0 < alpha < 1.0 or r < 1:
        raise InsufficientPermutations(f"no valid rank for b = {b}, alpha = {alpha}")
    # r == b + 1: no exceedance count can reject, the half-width is infinite
    return r


def ci_invert(cbi_obs: float, null_deviations, alpha: float) -> tuple:
    """Shift-pivot interval ``cbi_obs -/+ Q``, clipped to [0, 1].

    ``Q`` is the ``ci_rank``-th smallest absolute null deviation.  The
    interval excludes 0.5 exactly when the permutation p-value is below
    ``alpha``.
    """
    lo, hi, _ = _ci(cbi_obs, null_deviations, alpha)
    return lo, hi


def _ci(cbi_obs: float, null_deviations, alpha: float) -> tuple:
    dev = np.abs(np.asarray(null_deviations, dtype=np.float64))
    b = dev.shape[0]
    r = ci_rank(b, alpha)
    q = math.inf if r > b else float(np.partition(dev, r - 1)[r - 1])
    d = cbi_obs - NEUTRAL_SCORE
    if abs(abs(d) - q) <= TIE_TOL:
        q = abs(d)
    excludes = abs(d) > q
    lo = min(max(NEUTRAL_SCORE + (d - q), 0.0), 1.0)
    hi = min(max(NEUTRAL_SCORE + (d + q), 0.0), 1.0)
    return lo, hi, excludes


def odds(x: float) -> float:
    return math.inf if x >= 1.0 else x / (1.0 - x)


def cor_transform(result) -> tuple:
    """``(cor, (cor_lo, cor_hi))`` from a CbiResult or a ``(cbi, lo, hi)`` triple."""
    if isinstance(result, CbiResult):
        c, lo, hi = result.cbi, result.ci_lo, result.ci_hi
    else:
        c, lo, hi = result
    return odds(c), (odds(lo), odds(hi))


def cbi_test(scores, labels, b: int = 999, alpha: float = 0.05, seed=0) -> CbiResult:
    """CBI point estimate, permutation p-value and the dual interval."""
    scores = np.asarray(scores, dtype=np.float64)
    trt, _, _ = _split(labels)
    value = cbi(scores[trt], scores[~trt])
    p, null = permutation_test(scores, trt, b=b, seed=seed)
    lo, hi, excludes = _ci(value, null, alpha)
    cor, (cor_lo, cor_hi) = cor_transform((value, lo, hi))
    return CbiResult(
        cbi=value, cor=cor, p_value=p, ci_lo=lo, ci_hi=hi,
        cor_ci_lo=cor_lo, cor_ci_hi=cor_hi, b=b, alpha=alpha, excludes_null=excludes,
    )


def shapley_attribution(profiles, labels, measure: FuzzyMeasure, components=None) -> AttributionResult:
    """Drop in the mean treatment-control score difference per neutralized component.

    Percentages use only positive drops.  Raises ``ZeroAttribution`` (with
    the raw result attached) when no component has a positive drop.
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    trt, _, _ = _split(labels)
    k = profiles.shape[1]
    names = tuple(components) if components is not None else tuple(f"c{i + 1}" for i in range(k))

    def effect(p):
        s = choquet_scores(measure, p)
        return float(s[trt].mean() - s[~trt].mean())

    full = effect(profiles)
    drops = np.empty(k)
    for c in range(k):
        neutral = profiles.copy()
        neutral[:, c] = NEUTRAL_SCORE
        drops[c] = full - effect(neutral)
    positive = np.maximum(drops, 0.0)
    denom = positive.sum()
    if denom <= 0.0:
        raise ZeroAttribution(AttributionResult(names, drops, None, full))
    return AttributionResult(names, drops, 100.0 * positive / denom, full)


def analyze_profiles(profiles, labels, measure: FuzzyMeasure, b: int = 999,
                     alpha: float = 0.05, seed=0) -> CbiResult:
    return cbi_test(choquet_scores(measure, profiles), labels, b=b, alpha=alpha, seed=seed)
