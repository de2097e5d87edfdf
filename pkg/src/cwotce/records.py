"""Patient records, the columnar cohort container and the patient CSV format."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyInput, SchemaError

CSV_COLUMNS = ("id", "arm", "followup_time", "death_observed", "event_times", "biomarker")

MONTHS_PER_YEAR = 12.0


@dataclass(frozen=True)
class PatientRecord:
    """One subject's raw trial data.

    ``event_times`` are nonfatal event times in years, ascending, all in
    ``(0, followup_time]``.  ``biomarker`` is ``None`` when missing; a
    patient with an observed death never carries a biomarker.
    """

    id: str
    arm: int
    followup_time: float
    death_observed: bool
    event_times: tuple = ()
    biomarker: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "event_times", tuple(float(t) for t in self.event_times))
        if self.arm not in (0, 1):
            raise ValueError(f"patient {self.id!r}: arm must be 0 or 1, got {self.arm!r}")
        if not self.followup_time > 0:
            raise ValueError(f"patient {self.id!r}: followup_time must be positive")
        prev = 0.0
        for t in self.event_times:
            if not (0.0 < t <= self.followup_time and t >= prev):
                raise ValueError(
                    f"patient {self.id!r}: event times must be ascending within (0, followup_time]"
                )
            prev = t
        if self.death_observed and self.biomarker is not None:
            raise ValueError(f"patient {self.id!r}: dead patients cannot carry a biomarker")

    @property
    def alive_at_end(self) -> bool:
        return not self.death_observed

    @property
    def n_events(self) -> int:
        return len(self.event_times)


@dataclass
class Cohort:
    """Columnar view of a set of patients.

    Event times are stored in CSR form: the events of patient ``i`` are
    ``event_times[event_offsets[i]:event_offsets[i + 1]]``.  A missing
    biomarker is NaN.
    """

    ids: np.ndarray
    arm: np.ndarray
    followup: np.ndarray
    death: np.ndarray
    event_offsets: np.ndarray
    event_times: np.ndarray
    biomarker: np.ndarray
    _hash: Optional[str] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.arm = np.asarray(self.arm, dtype=np.int8)
        self.followup = np.asarray(self.followup, dtype=np.float64)
        self.death = np.asarray(self.death, dtype=bool)
        self.event_offsets = np.asarray(self.event_offsets, dtype=np.int64)
        self.event_times = np.asarray(self.event_times, dtype=np.float64)
        self.biomarker = np.asarray(self.biomarker, dtype=np.float64)
        self.ids = np.asarray(self.ids, dtype=object)
        n = self.followup.shape[0]
        if self.event_offsets.shape[0] != n + 1:
            raise ValueError("event_offsets must have n + 1 entries")

    @classmethod
    def from_records(cls, records: Iterable[PatientRecord]) -> "Cohort":
        records = list(records)
        if not records:
            raise EmptyInput("cohort has no patients")
        counts = [len(r.event_times) for r in records]
        offsets = np.zeros(len(records) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        times = [t for r in records for t in r.event_times]
        return cls(
            ids=np.array([str(r.id) for r in records], dtype=object),
            arm=[r.arm for r in records],
            followup=[r.followup_time for r in records],
            death=[r.death_observed for r in records],
            event_offsets=offsets,
            event_times=np.array(times, dtype=np.float64),
            biomarker=[np.nan if r.biomarker is None else r.biomarker for r in records],
        )

    def __len__(self) -> int:
        return self.followup.shape[0]

    @property
    def n_events(self) -> np.ndarray:
        return np.diff(self.event_offsets)

    def events_of(self, i: int) -> np.ndarray:
        return self.event_times[self.event_offsets[i]:self.event_offsets[i + 1]]

    def first_event(self) -> np.ndarray:
        """First nonfatal event time per patient (NaN when event-free)."""
        out = np.full(len(self), np.nan)
        has = self.n_events > 0
        out[has] = self.event_times[self.event_offsets[:-1][has]]
        return out

    def last_event(self) -> np.ndarray:
        """Last nonfatal event time per patient (NaN when event-free)."""
        out = np.full(len(self), np.nan)
        has = self.n_events > 0
        out[has] = self.event_times[self.event_offsets[1:][has] - 1]
        return out

    def records(self) -> list:
        out = []
        for i in range(len(self)):
            bio = self.biomarker[i]
            out.append(
                PatientRecord(
                    id=str(self.ids[i]),
                    arm=int(self.arm[i]),
                    followup_time=float(self.followup[i]),
                    death_observed=bool(self.death[i]),
                    event_times=tuple(self.events_of(i).tolist()),
                    biomarker=None if math.isnan(bio) else float(bio),
                )
            )
        return out

    def with_arm(self, arm: np.ndarray) -> "Cohort":
        return Cohort(
            ids=self.ids, arm=np.asarray(arm), followup=self.followup, death=self.death,
            event_offsets=self.event_offsets, event_times=self.event_times,
            biomarker=self.biomarker,
        )

    def swap_arms(self) -> "Cohort":
        return self.with_arm(1 - self.arm)

    def subset(self, idx: Sequence[int]) -> "Cohort":
        idx = np.asarray(idx, dtype=np.int64)
        counts = self.n_events[idx]
        offsets = np.zeros(idx.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        if idx.shape[0]:
            times = np.concatenate([self.events_of(i) for i in idx]) if counts.sum() else np.empty(0)
        else:
            times = np.empty(0)
        return Cohort(
            ids=self.ids[idx], arm=self.arm[idx], followup=self.followup[idx],
            death=self.death[idx], event_offsets=offsets, event_times=times,
            biomarker=self.biomarker[idx],
        )

    def dataset_hash(self) -> str:
        """SHA-256 over the canonical CSV rendering (first 16 hex digits)."""
        if self._hash is None:
            buf = io.StringIO()
            write_csv(self, buf)
            self._hash = hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]
        return self._hash


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(cohort: Cohort, fh) -> None:
    """Write the patient CSV format to a path or open text handle."""
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "w", newline="") as f:
            write_csv(cohort, f)
        return
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i in range(len(cohort)):
        bio = cohort.biomarker[i]
        w.writerow([
            cohort.ids[i],
            int(cohort.arm[i]),
            _fmt(cohort.followup[i]),
            int(bool(cohort.death[i])),
            ";".join(_fmt(t) for t in cohort.events_of(i)),
            "" if math.isnan(bio) else _fmt(bio),
        ])


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no"):
        return False
    raise SchemaError(f"cannot parse boolean {text!r}")


def read_csv(fh, time_unit: str = "years") -> Cohort:
    """Read the patient CSV format; ``time_unit='months'`` converts to years."""
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, newline="") as f:
            return read_csv(f, time_unit=time_unit)
    if time_unit not in ("years", "months"):
        raise ValueError(f"unknown time unit {time_unit!r}")
    scale = 1.0 / MONTHS_PER_YEAR if time_unit == "months" else 1.0
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(CSV_COLUMNS):
        raise SchemaError(f"expected columns {CSV_COLUMNS}, got {reader.fieldnames}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            ev = row["event_times"].strip()
            bio = row["biomarker"].strip()
            records.append(
                PatientRecord(
                    id=row["id"].strip(),
                    arm=int(row["arm"]),
                    followup_time=float(row["followup_time"]) * scale,
                    death_observed=_parse_bool(row["death_observed"]),
                    event_times=tuple(float(t) * scale for t in ev.split(";")) if ev else (),
                    biomarker=float(bio) if bio else None,
                )
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
    return Cohort.from_records(records)
