"""Patient outcome encoding into profile vectors in [0, 1]^K (higher = better).

Two layouts are supported:

``block6``
    survival, event-free, AUC burden, last event, biomarker, alive
``count5``
    survival, event-free, event count, biomarker, alive

All pooled quantities (Kaplan-Meier curves, burden ranks, biomarker range)
are computed over both arms together, so encoders never look at the arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .errors import EmptyInput, EncodingError, NegativeTimeError
from .records import Cohort, PatientRecord

BLOCK6_COMPONENTS = ("survival", "event_free", "auc_burden", "last_event", "biomarker", "alive")
COUNT5_COMPONENTS = ("survival", "event_free", "event_count", "biomarker", "alive")

MODES = {"block6": BLOCK6_COMPONENTS, "count5": COUNT5_COMPONENTS}


@dataclass(frozen=True)
class EncodingConfig:
    mode: str = "block6"
    tau: float = 3.0
    biomarker_higher_is_better: bool = True
    dead_biomarker_score: float = 0.0
    # alive patients with no recorded biomarker (e.g. lost before the final visit)
    missing_biomarker_score: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown encoding mode {self.mode!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for name in ("dead_biomarker_score", "missing_biomarker_score"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def components(self) -> tuple:
        return MODES[self.mode]

    @property
    def k(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class KmCurve:
    """Right-continuous Kaplan-Meier step function.

    ``times`` holds the distinct event times and ``survival`` the value of
    the curve from each of those times until the next one.  Before the first
    event time the curve equals 1.
    """

    times: np.ndarray
    survival: np.ndarray

    def __call__(self, t):
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate(([1.0], self.survival))[idx]
        return float(vals) if np.ndim(vals) == 0 else vals

    @property
    def steps(self) -> list:
        return [(0.0, 1.0)] + list(zip(self.times.tolist(), self.survival.tolist()))


def km_fit(times, events) -> KmCurve:
    """Product-limit estimator.

    At a time shared by deaths and censorings, the censored subjects are
    still counted at risk for those deaths.
    """
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    if times.shape[0] == 0:
        raise EmptyInput("Kaplan-Meier needs at least one observation")
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    if np.any(times <= 0):
        raise ValueError("observation times must be positive")
    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=events, minlength=uniq.shape[0])
    totals = np.bincount(inverse, minlength=uniq.shape[0])
    at_risk = totals[::-1].cumsum()[::-1]
    has = deaths > 0
    factors = 1.0 - deaths[has] / at_risk[has]
    return KmCurve(times=uniq[has], survival=np.cumprod(factors))


def encode_survival(record: PatientRecord, km: KmCurve) -> float:
    return 1.0 - km(record.followup_time)


def event_free_time(record: PatientRecord) -> tuple:
    """(time, event) for the first nonfatal event; censored at follow-up if none."""
    if record.event_times:
        return record.event_times[0], True
    return record.followup_time, False


def encode_event_free(record: PatientRecord, km_ef: KmCurve) -> float:
    t, _ = event_free_time(record)
    return 1.0 - km_ef(t)


def auc_burden(event_times: Sequence[float], tau: float) -> float:
    """Area under the counting process up to ``tau``: sum of ``tau - t_j``."""
    for t in event_times:
        if t > tau:
            raise NegativeTimeError(f"event at {t} after horizon {tau}")
    return math.fsum(tau - t for t in event_times)


def midrank_survival(values) -> np.ndarray:
    """``P(V > v) + 0.5 * P(V = v)`` for each entry, over the pooled sample."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        return np.empty(0)
    r2 = _kernels.doubled_midranks(values)
    return (2 * n + 1 - r2) / (2.0 * n)


def encode_burden(all_burdens: Sequence[float], b_i: float) -> float:
    pool = np.asarray(all_burdens, dtype=np.float64)
    if not np.any(pool == b_i):
        raise ValueError(f"burden {b_i} is not in the pooled sample")
    n = pool.shape[0]
    return float((np.sum(pool > b_i) + 0.5 * np.sum(pool == b_i)) / n)


def encode_last_event(record: PatientRecord, tau: float) -> float:
    if not record.event_times:
        return 1.0
    return (tau - max(record.event_times)) / tau


def encode_biomarker(pooled_biomarkers, record: PatientRecord, config: EncodingConfig) -> float:
    if record.biomarker is None:
        return config.dead_biomarker_score if record.death_observed else config.missing_biomarker_score
    pool = np.asarray([b for b in pooled_biomarkers if b is not None], dtype=np.float64)
    pool = pool[~np.isnan(pool)]
    lo, hi = pool.min(), pool.max()
    if hi == lo:
        return 0.5
    s = (record.biomarker - lo) / (hi - lo)
    return float(s if config.biomarker_higher_is_better else 1.0 - s)


def encode_alive(record: PatientRecord) -> float:
    # censored-alive patients count as alive: last known status
    return 0.0 if record.death_observed else 1.0


def _as_cohort(records) -> Cohort:
    if isinstance(records, Cohort):
        return records
    return Cohort.from_records(records)


def _check_cohort(cohort: Cohort, tau: float) -> None:
    bad = np.flatnonzero(cohort.followup > tau)
    if bad.size:
        i = int(bad[0])
        raise EncodingError(cohort.ids[i], NegativeTimeError(
            f"follow-up {cohort.followup[i]} beyond horizon {tau}"))
    bad = np.flatnonzero(~(cohort.followup > 0))
    if bad.size:
        raise EncodingError(cohort.ids[int(bad[0])], ValueError("follow-up must be positive"))
    late = np.flatnonzero(cohort.event_times > tau)
    if late.size:
        i = int(np.searchsorted(cohort.event_offsets, late[0], side="right") - 1)
        raise EncodingError(cohort.ids[i], NegativeTimeError(
            f"event at {cohort.event_times[late[0]]} after horizon {tau}"))
    dead_with_bio = np.flatnonzero(cohort.death & ~np.isnan(cohort.biomarker))
    if dead_with_bio.size:
        raise EncodingError(cohort.ids[int(dead_with_bio[0])],
                            ValueError("dead patient carries a biomarker"))


def burdens(cohort: Cohort, tau: float) -> np.ndarray:
    """AUC burden per patient, vectorized over the CSR event store."""
    owner = np.repeat(np.arange(len(cohort)), cohort.n_events)
    return np.bincount(owner, weights=tau - cohort.event_times, minlength=len(cohort))


def encode_cohort(records: Union[Cohort, Sequence[PatientRecord]], config: EncodingConfig) -> np.ndarray:
    """Profile matrix of shape ``(n, K)`` for the configured mode."""
    cohort = _as_cohort(records)
    n = len(cohort)
    if n == 0:
        raise EmptyInput("cohort has no patients")
    tau = config.tau
    _check_cohort(cohort, tau)

    surv_km = km_fit(cohort.followup, cohort.death)
    survival = 1.0 - surv_km(cohort.followup)

    first = cohort.first_event()
    has_event = ~np.isnan(first)
    ef_time = np.where(has_event, first, cohort.followup)
    event_free = 1.0 - km_fit(ef_time, has_event)(ef_time)

    bio = cohort.biomarker
    measured = ~np.isnan(bio)
    biomarker = np.where(cohort.death, config.dead_biomarker_score, config.missing_biomarker_score)
    if measured.any():
        lo, hi = bio[measured].min(), bio[measured].max()
        if hi == lo:
            scaled = np.full(int(measured.sum()), 0.5)
        else:
            scaled = (bio[measured] - lo) / (hi - lo)
            if not config.biomarker_higher_is_better:
                scaled = 1.0 - scaled
        biomarker[measured] = scaled

    alive = np.where(cohort.death, 0.0, 1.0)

    if config.mode == "block6":
        burden = midrank_survival(burdens(cohort, tau))
        last = cohort.last_event()
        last_event = np.where(has_event, (tau - last) / tau, 1.0)
        cols = (survival, event_free, burden, last_event, biomarker, alive)
    else:
        count = midrank_survival(cohort.n_events.astype(np.float64))
        cols = (survival, event_free, count, biomarker, alive)
    out = np.column_stack(cols)
    # guard against -0.0 / 1+eps from float noise
    np.clip(out, 0.0, 1.0, out=out)
    return out
