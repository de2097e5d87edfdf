"""2-additive fuzzy measures and the Choquet integral.

Component numbers in pair keys, subsets and error messages are 1-based,
matching the measure file format.  A measure is stored in Möbius form: one
mass per singleton and one per interacting pair; all higher-order masses
are zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, MeasureError, MonotonicityError, NormalizationError

NORMALIZATION_TOL = 1e-9
MONOTONICITY_TOL = 1e-12


def _pair_key(i: int, j: int, k: int) -> tuple:
    i, j = int(i), int(j)
    if i == j:
        raise MeasureError(f"self-interaction {{{i},{i}}} is not allowed")
    if not (1 <= i <= k and 1 <= j <= k):
        raise MeasureError(f"pair ({i}, {j}) outside components 1..{k}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class MeasureSpec:
    """Importance weights plus pairwise interaction indices.

    ``interactions`` maps 1-based component pairs to interaction values.
    Passing an iterable of ``(i, j, value)`` triples is also accepted; a pair
    listed twice is rejected.
    """

    k: int
    weights: tuple
    interactions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if int(self.k) < 2:
            raise MeasureError("a measure needs at least two components")
        object.__setattr__(self, "k", int(self.k))
        w = tuple(float(x) for x in self.weights)
        if len(w) != self.k:
            raise DimensionError(f"expected {self.k} weights, got {len(w)}")
        for idx, x in enumerate(w, start=1):
            if not 0.0 <= x <= 1.0:
                raise MeasureError(f"weight {idx} = {x} outside [0, 1]")
        object.__setattr__(self, "weights", w)

        items = self.interactions.items() if isinstance(self.interactions, Mapping) else (
            ((i, j), v) for i, j, v in self.interactions
        )
        pairs = {}
        for (i, j), v in items:
            key = _pair_key(i, j, self.k)
            if key in pairs:
                raise MeasureError(f"pair {key} listed twice")
            v = float(v)
            if not -1.0 <= v <= 1.0:
                raise MeasureError(f"interaction {key} = {v} outside [-1, 1]")
            pairs[key] = v
        object.__setattr__(self, "interactions", dict(sorted(pairs.items())))

    @classmethod
    def from_json(cls, obj) -> "MeasureSpec":
        """Build from a parsed measure file (``k``, ``weights``, ``interactions``)."""
        try:
            return cls(
                k=obj["k"],
                weights=obj["weights"],
                interactions=[(d["i"], d["j"], d["value"]) for d in obj.get("interactions", [])],
            )
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure specification: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "weights": list(self.weights),
            "interactions": [{"i": i, "j": j, "value": v} for (i, j), v in self.interactions.items()],
        }


def load_measure_spec(path) -> MeasureSpec:
    with open(path) as fh:
        return MeasureSpec.from_json(json.load(fh))


@dataclass(frozen=True)
class FuzzyMeasure:
    k: int
    moebius_singletons: tuple
    moebius_pairs: Mapping

    def __post_init__(self):
        object.__setattr__(self, "moebius_singletons", tuple(float(x) for x in self.moebius_singletons))
        object.__setattr__(self, "moebius_pairs", {
            _pair_key(i, j, self.k): float(v) for (i, j), v in self.moebius_pairs.items()
        })
        if len(self.moebius_singletons) != self.k:
            raise DimensionError("singleton masses do not match k")
        # the capacity table is derived data; cache it on the frozen instance
        object.__setattr__(self, "_table", _capacity_table(self))

    @property
    def capacity_table(self) -> np.ndarray:
        """Capacity of every subset, indexed by bitmask (bit ``c-1`` = component ``c``)."""
        return self._table

    def monotonicity_slack(self) -> np.ndarray:
        """Per-component value of ``m({k}) + sum_l min(0, m({k,l}))``."""
        slack = np.array(self.moebius_singletons)
        for (i, j), v in self.moebius_pairs.items():
            if v < 0:
                slack[i - 1] += v
                slack[j - 1] += v
        return slack

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "moebius_singletons": list(self.moebius_singletons),
            "moebius_pairs": [{"i": i, "j": j, "value": v}
                              for (i, j), v in sorted(self.moebius_pairs.items())],
        }


def _capacity_table(measure: FuzzyMeasure) -> np.ndarray:
    k = measure.k
    masks = np.arange(1 << k)
    table = np.zeros(1 << k)
    for c, m in enumerate(measure.moebius_singletons):
        table += np.where(masks & (1 << c), m, 0.0)
    for (i, j), m in measure.moebius_pairs.items():
        both = (1 << (i - 1)) | (1 << (j - 1))
        table += np.where((masks & both) == both, m, 0.0)
    table[0] = 0.0
    return table


def build_measure(spec: MeasureSpec) -> FuzzyMeasure:
    """Convert importance weights and interactions to a validated Möbius measure.

    Weights are read as Shapley importances, so the singleton mass of
    component ``k`` is ``w_k - 0.5 * sum_l I_kl`` and pair masses equal the
    interaction values.

    Raises
    ------
    NormalizationError
        If the weights do not sum to one.
    MonotonicityError
        If some component's singleton mass cannot absorb its negative
        interactions.
    """
    total = math.fsum(spec.weights)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationError(f"weights sum to {total!r}, expected 1")
    measure = moebius_from_spec(spec)
    check_measure(measure)
    return measure


def moebius_from_spec(spec: MeasureSpec) -> FuzzyMeasure:
    """The Möbius conversion of ``build_measure`` without any validation."""
    singles = list(spec.weights)
    for (i, j), v in spec.interactions.items():
        singles[i - 1] -= 0.5 * v
        singles[j - 1] -= 0.5 * v
    return FuzzyMeasure(spec.k, tuple(singles), dict(spec.interactions))


def check_measure(measure: FuzzyMeasure) -> None:
    """Raise if ``measure`` breaks normalization or monotonicity."""
    total = math.fsum(measure.moebius_singletons) + math.fsum(measure.moebius_pairs.values())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationError(f"Möbius masses sum to {total!r}, expected 1")
    slack = measure.monotonicity_slack()
    for c, s in enumerate(slack, start=1):
        if s < -MONOTONICITY_TOL:
            raise MonotonicityError(c, float(s))


def invariant_report(measure: FuzzyMeasure) -> list:
    """List of ``(name, passed, detail)`` for each measure invariant."""
    total = math.fsum(measure.moebius_singletons) + math.fsum(measure.moebius_pairs.values())
    slack = measure.monotonicity_slack()
    worst = int(np.argmin(slack))
    table = measure.capacity_table
    phi = shapley_values(measure)
    return [
        ("normalization", abs(total - 1.0) <= NORMALIZATION_TOL, f"sum of masses = {total:.12g}"),
        ("monotonicity", bool(slack.min() >= -MONOTONICITY_TOL),
         f"min slack {slack[worst]:.6g} at component {worst + 1}"),
        ("empty_set", table[0] == 0.0, f"mu(empty) = {table[0]:.12g}"),
        ("full_set", abs(table[-1] - 1.0) <= NORMALIZATION_TOL, f"mu(full) = {table[-1]:.12g}"),
        ("shapley_sum", abs(math.fsum(phi) - 1.0) <= NORMALIZATION_TOL, f"sum phi = {math.fsum(phi):.12g}"),
    ]


def _subset_mask(subset: Iterable[int], k: int) -> int:
    mask = 0
    for c in subset:
        c = int(c)
        if not 1 <= c <= k:
            raise DimensionError(f"component {c} outside 1..{k}")
        mask |= 1 << (c - 1)
    return mask


def capacity_of(measure: FuzzyMeasure, subset: Iterable[int]) -> float:
    """Capacity of a set of 1-based components."""
    return float(measure.capacity_table[_subset_mask(subset, measure.k)])


def _check_profile(measure: FuzzyMeasure, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != measure.k:
        raise DimensionError(f"profile has {y.shape[-1]} components, measure has {measure.k}")
    if np.any(y < 0.0) or np.any(y > 1.0) or np.any(np.isnan(y)):
        raise ValueError("profile scores must lie in [0, 1]")
    return y


def choquet(measure: FuzzyMeasure, y: Sequence[float]) -> float:
    """Choquet integral of one profile by sorted increments."""
    y = _check_profile(measure, y)
    if y.ndim != 1:
        raise DimensionError("choquet expects a single profile; use choquet_scores for batches")
    table = measure.capacity_table
    order = sorted(range(measure.k), key=lambda c: (y[c], c))
    mask = (1 << measure.k) - 1
    prev = 0.0
    total = 0.0
    for c in order:
        total += (y[c] - prev) * table[mask]
        prev = y[c]
        mask &= ~(1 << c)
    return float(total)


def choquet_scores(measure: FuzzyMeasure, profiles) -> np.ndarray:
    """Choquet integral of every row of an ``(n, K)`` profile matrix."""
    profiles = _check_profile(measure, np.atleast_2d(profiles))
    return _kernels.choquet_batch(profiles, measure.capacity_table)


def shapley_values(measure: FuzzyMeasure) -> np.ndarray:
    phi = np.array(measure.moebius_singletons)
    for (i, j), v in measure.moebius_pairs.items():
        phi[i - 1] += 0.5 * v
        phi[j - 1] += 0.5 * v
    return phi


def additive_measure(weights: Sequence[float]) -> FuzzyMeasure:
    w = tuple(weights)
    return build_measure(MeasureSpec(len(w), w, {}))


# Survival, event-free, AUC burden, last event, biomarker, alive.
DEFAULT_BLOCK6 = MeasureSpec(
    k=6,
    weights=(0.25, 0.20, 0.18, 0.12, 0.15, 0.10),
    interactions={(1, 6): -0.05, (1, 2): -0.03, (3, 4): 0.03, (5, 6): 0.02},
)

# Survival, event-free, event count, biomarker, alive.  The count carries
# the whole recurrent block's weight; the burden/last-event synergy has no
# counterpart and is dropped.
DEFAULT_COUNT5 = MeasureSpec(
    k=5,
    weights=(0.25, 0.20, 0.30, 0.15, 0.10),
    interactions={(1, 5): -0.05, (1, 2): -0.03, (4, 5): 0.02},
)


def default_measure(mode: str = "block6") -> FuzzyMeasure:
    if mode == "block6":
        return build_measure(DEFAULT_BLOCK6)
    if mode == "count5":
        return build_measure(DEFAULT_COUNT5)
    raise ValueError(f"unknown encoding mode {mode!r}")

