"""Benchmark methods: Cox time-to-first-event, recurrent Win Ratio, WLW."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateArms, NoEvents
from .inference import linear_permutation_counts, p_value_from_count
from .records import Cohort, PatientRecord

MAX_ITER = 50
BETA_TOL = 1e-9


def normal_two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


@dataclass(frozen=True)
class CoxFit:
    beta: float
    se: float
    z: float
    p_value: float
    converged: bool
    iterations: int
    loglik: float = float("nan")

    @property
    def hazard_ratio(self) -> float:
        return math.exp(self.beta)


class _RiskSets:
    """Sorted event-time bookkeeping for one Cox fit with a scalar covariate."""

    def __init__(self, time, event, x):
        order = np.argsort(time, kind="stable")
        self.time = np.asarray(time, dtype=np.float64)[order]
        self.event = np.asarray(event, dtype=bool)[order]
        self.x = np.asarray(x, dtype=np.float64)[order]
        self.order = order
        ev_t = self.time[self.event]
        self.ev_x = self.x[self.event]
        self.uniq, start, self.d = np.unique(ev_t, return_index=True, return_counts=True)
        group = np.repeat(np.arange(self.uniq.shape[0]), self.d)
        self.group = group
        # Efron fraction l / d for the l-th tied death at a time
        self.frac = (np.arange(ev_t.shape[0]) - start[group]) / self.d[group]
        # first sorted index with time >= each distinct event time
        self.risk_start = np.searchsorted(self.time, self.uniq, side="left")

    def sums(self, beta):
        e = np.exp(beta * self.x)
        ex = e * self.x
        exx = ex * self.x
        c0 = np.cumsum(e[::-1])[::-1]
        c1 = np.cumsum(ex[::-1])[::-1]
        c2 = np.cumsum(exx[::-1])[::-1]
        s0, s1, s2 = c0[self.risk_start], c1[self.risk_start], c2[self.risk_start]
        ng = self.uniq.shape[0]
        ee = np.exp(beta * self.ev_x)
        d0 = np.bincount(self.group, weights=ee, minlength=ng)
        d1 = np.bincount(self.group, weights=ee * self.ev_x, minlength=ng)
        d2 = np.bincount(self.group, weights=ee * self.ev_x ** 2, minlength=ng)
        g, f = self.group, self.frac
        a0 = s0[g] - f * d0[g]
        a1 = s1[g] - f * d1[g]
        a2 = s2[g] - f * d2[g]
        return e, s0, s1, a0, a1, a2

    def loglik_score_info(self, beta):
        _, _, _, a0, a1, a2 = self.sums(beta)
        ll = float(beta * self.ev_x.sum() - np.log(a0).sum())
        mean = a1 / a0
        score = float(self.ev_x.sum() - mean.sum())
        info = float((a2 / a0 - mean ** 2).sum())
        return ll, score, info

    def score_residuals(self, beta):
        """Per-subject score residuals in the original subject order."""
        e, s0, s1, _, _, _ = self.sums(beta)
        xbar = s1 / s0
        dlam = self.d / s0
        cum_a = np.cumsum(dlam)
        cum_b = np.cumsum(dlam * xbar)
        idx = np.searchsorted(self.uniq, self.time, side="right") - 1
        a = np.where(idx >= 0, cum_a[np.maximum(idx, 0)], 0.0)
        b = np.where(idx >= 0, cum_b[np.maximum(idx, 0)], 0.0)
        own = np.zeros_like(self.time)
        ev_idx = np.searchsorted(self.uniq, self.time[self.event])
        own[self.event] = self.x[self.event] - xbar[ev_idx]
        resid_sorted = own - e * (self.x * a - b)
        out = np.empty_like(resid_sorted)
        out[self.order] = resid_sorted
        return out


def _newton(rs: _RiskSets) -> tuple:
    beta = 0.0
    ll, score, info = rs.loglik_score_info(beta)
    for it in range(1, MAX_ITER + 1):
        if not info > 0:
            return beta, info, ll, False, it
        step = score / info
        new = beta + step
        new_ll, new_score, new_info = rs.loglik_score_info(new)
        halvings = 0
        while not new_ll >= ll - 1e-12 and halvings < 30:
            step /= 2.0
            new = beta + step
            new_ll, new_score, new_info = rs.loglik_score_info(new)
            halvings += 1
        beta, ll, score, info = new, new_ll, new_score, new_info
        if abs(step) < BETA_TOL:
            return beta, info, ll, bool(info > 0 and np.isfinite(beta)), it
    return beta, info, ll, False, MAX_ITER


def cox_fit(time, event, x) -> tuple:
    """Newton-Raphson Cox fit (Efron ties) for one covariate.

    Returns ``(CoxFit, risk_sets)``; the second item supports residuals.
    """
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    if not event.any():
        raise NoEvents("no events in the sample")
    rs = _RiskSets(time, event, x)
    beta, info, ll, converged, iters = _newton(rs)
    se = 1.0 / math.sqrt(info) if info > 0 else float("nan")
    z = beta / se if info > 0 else float("nan")
    p = normal_two_sided(z) if info > 0 else 1.0
    return CoxFit(beta, se, z, p, converged, iters, ll), rs


def _as_cohort(records) -> Cohort:
    return records if isinstance(records, Cohort) else Cohort.from_records(records)


def ttfe_data(cohort: Cohort) -> tuple:
    """Time to min(death, first nonfatal event) and its event indicator."""
    first = cohort.first_event()
    has = ~np.isnan(first)
    time = np.where(has, first, cohort.followup)
    event = has | cohort.death
    return time, event


def cox_ttfe(records) -> CoxFit:
    cohort = _as_cohort(records)
    time, event = ttfe_data(cohort)
    fit, _ = cox_fit(time, event, cohort.arm)
    return fit


# ---------------------------------------------------------------- Win Ratio

@dataclass(frozen=True)
class WinRatioResult:
    wins: int
    losses: int
    ties: int
    wr: float
    tie_rate: float
    p_value: float
    net_benefit: float
    b: int
    undefined: bool = False


def adjudicate_pair(a: PatientRecord, b: PatientRecord) -> int:
    """+1 if ``a`` wins, -1 if it loses, 0 on a tie.

    Within the common window ``min(followup_a, followup_b)``: a death only
    one patient suffers loses; then fewer nonfatal events wins; then, with
    equal positive counts, the earlier last event wins.
    """
    tau = min(a.followup_time, b.followup_time)
    da = a.death_observed and a.followup_time <= tau
    db = b.death_observed and b.followup_time <= tau
    if da and not db:
        return -1
    if db and not da:
        return 1
    if da and db and a.followup_time != b.followup_time:
        return 1 if a.followup_time > b.followup_time else -1
    ea = [t for t in a.event_times if t <= tau]
    eb = [t for t in b.event_times if t <= tau]
    if len(ea) != len(eb):
        return 1 if len(ea) < len(eb) else -1
    if ea:
        if ea[-1] < eb[-1]:
            return 1
        if ea[-1] > eb[-1]:
            return -1
    return 0


def pair_matrix(records) -> np.ndarray:
    """Adjudication of every ordered pair of the pooled cohort."""
    c = _as_cohort(records)
    return _kernels.pair_matrix(c.followup, c.death, c.event_offsets, c.event_times)


def win_ratio_rec(records, b: int = 999, seed=0) -> WinRatioResult:
    """Hierarchical pairwise comparison, treatment vs control.

    The p-value comes from permuting arm labels on the win-minus-loss count,
    which is a linear statistic in the row sums of the pooled pair matrix.
    """
    cohort = _as_cohort(records)
    trt = cohort.arm.astype(bool)
    n1, n2 = int(trt.sum()), int((~trt).sum())
    if n1 == 0 or n2 == 0:
        raise DegenerateArms("both arms must be nonempty")
    w = pair_matrix(cohort)
    block = w[np.ix_(trt, ~trt)]
    wins = int(np.count_nonzero(block == 1))
    losses = int(np.count_nonzero(block == -1))
    total = n1 * n2
    ties = total - wins - losses
    undefined = wins == 0 and losses == 0
    if undefined:
        wr = 1.0
    elif losses == 0:
        wr = math.inf
    else:
        wr = wins / losses
    row = w.sum(axis=1, dtype=np.int64)
    k_obs, k_perm = linear_permutation_counts(row, trt, b, seed)
    exceed = int(np.count_nonzero(np.abs(k_perm) >= abs(k_obs)))
    return WinRatioResult(
        wins=wins, losses=losses, ties=ties, wr=wr, tie_rate=ties / total,
        p_value=p_value_from_count(exceed, b), net_benefit=(wins - losses) / total,
        b=b, undefined=undefined,
    )


# ---------------------------------------------------------------- WLW

@dataclass(frozen=True)
class WlwResult:
    beta_death: float
    beta_event: float
    robust_cov: np.ndarray
    beta_combined: float
    se_combined: float
    p_value: float
    global_chi2: float = float("nan")
    global_p: float = float("nan")
    converged: bool = True
    dropped_strata: tuple = field(default_factory=tuple)


def wlw_strata(cohort: Cohort) -> dict:
    first = cohort.first_event()
    has = ~np.isnan(first)
    return {
        "death": (cohort.followup, cohort.death),
        "event": (np.where(has, first, cohort.followup), has),
    }


def wlw(records) -> WlwResult:
    """Marginal Cox fits for death and first nonfatal event, sandwich-combined.

    Each subject contributes one score residual per stratum; the robust
    covariance of the two log hazard ratios is the cross-product of the
    per-subject dfbeta vectors.  The combined estimate is the plain average
    of the stratum coefficients.
    """
    cohort = _as_cohort(records)
    x = cohort.arm.astype(np.float64)
    betas, dfbetas, converged, dropped = {}, {}, True, []
    for name, (time, event) in wlw_strata(cohort).items():
        if not np.any(event):
            dropped.append(name)
            continue
        fit, rs = cox_fit(time, event, x)
        converged &= fit.converged
        betas[name] = fit.beta
        dfbetas[name] = rs.score_residuals(fit.beta) * fit.se ** 2
    if not betas:
        raise NoEvents("no events in either stratum")
    names = [s for s in ("death", "event") if s in betas]
    d = np.column_stack([dfbetas[s] for s in names])
    cov_used = d.T @ d
    cov = np.full((2, 2), np.nan)
    pos = [("death", "event").index(s) for s in names]
    cov[np.ix_(pos, pos)] = cov_used
    weights = np.full(len(names), 1.0 / len(names))
    beta_c = float(weights @ np.array([betas[s] for s in names]))
    var_c = float(weights @ cov_used @ weights)
    se_c = math.sqrt(var_c) if var_c > 0 else float("nan")
    p = normal_two_sided(beta_c / se_c) if var_c > 0 else 1.0
    chi2, gp = float("nan"), float("nan")
    if len(names) == 2:
        bvec = np.array([betas["death"], betas["event"]])
        try:
            chi2 = float(bvec @ np.linalg.solve(cov_used, bvec))
            gp = math.exp(-chi2 / 2.0)  # chi-square survival with 2 df
        except np.linalg.LinAlgError:
            pass
    return WlwResult(
        beta_death=betas.get("death", float("nan")),
        beta_event=betas.get("event", float("nan")),
        robust_cov=cov, beta_combined=beta_c, se_combined=se_c, p_value=p,
        global_chi2=chi2, global_p=gp, converged=bool(converged) and math.isfinite(se_c),
        dropped_strata=tuple(dropped),
    )
