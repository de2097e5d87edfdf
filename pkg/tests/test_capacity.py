import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cwotce.capacity import (
    DEFAULT_BLOCK6, FuzzyMeasure, MeasureSpec, additive_measure, build_measure,
    capacity_of, check_measure, choquet, choquet_scores, default_measure,
    invariant_report, load_measure_spec, moebius_from_spec, shapley_values,
)
from cwotce.errors import DimensionError, MeasureError, MonotonicityError, NormalizationError

from oracles import brute_force_choquet, moebius_choquet, subset_capacity


@st.composite
def valid_measures(draw, max_k=6):
    """Random monotone 2-additive measures built from nonnegative slack."""
    k = draw(st.integers(2, max_k))
    pairs = {}
    for i, j in itertools.combinations(range(1, k + 1), 2):
        if draw(st.booleans()):
            pairs[(i, j)] = draw(st.floats(-1.0, 1.0, allow_nan=False))
    neg = [0.0] * k
    for (i, j), v in pairs.items():
        if v < 0:
            neg[i - 1] += -v
            neg[j - 1] += -v
    slack = [draw(st.floats(0.0, 1.0, allow_nan=False)) for _ in range(k)]
    singles = [neg[c] + slack[c] for c in range(k)]
    total = sum(singles) + sum(pairs.values())
    if total <= 1e-3:
        singles = [s + 1.0 for s in singles]
        total = sum(singles) + sum(pairs.values())
    singles = [s / total for s in singles]
    pairs = {key: v / total for key, v in pairs.items()}
    return FuzzyMeasure(k, tuple(singles), pairs)


def profiles_for(k):
    return st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=k, max_size=k)


class TestBuildMeasure:
    def test_default_block6_is_valid(self):
        m = build_measure(DEFAULT_BLOCK6)
        assert m.k == 6
        check_measure(m)
        assert m.moebius_pairs[(1, 6)] == pytest.approx(-0.05)
        # m({1}) = 0.25 - 0.5 * (-0.05 - 0.03)
        assert m.moebius_singletons[0] == pytest.approx(0.29)

    def test_two_component_additive(self):
        m = build_measure(MeasureSpec(2, (0.5, 0.5)))
        assert m.moebius_singletons == (0.5, 0.5)
        assert m.moebius_pairs == {}

    def test_monotonicity_error_names_component(self):
        with pytest.raises(MonotonicityError) as info:
            build_measure(MeasureSpec(2, (0.05, 0.95), {(1, 2): -0.2}))
        assert info.value.component == 1
        assert info.value.slack == pytest.approx(-0.05)

    def test_normalization_error(self):
        with pytest.raises(NormalizationError):
            build_measure(MeasureSpec(3, (0.3, 0.3, 0.3)))

    def test_normalization_tolerance(self):
        build_measure(MeasureSpec(2, (0.5, 0.5 + 5e-10)))
        with pytest.raises(NormalizationError):
            build_measure(MeasureSpec(2, (0.5, 0.5 + 5e-9)))

    @pytest.mark.parametrize("interactions", [
        [(1, 2, 0.1), (2, 1, 0.1)],
        [(1, 1, 0.1)],
        [(1, 4, 0.1)],
    ])
    def test_bad_pairs_rejected(self, interactions):
        with pytest.raises(MeasureError):
            MeasureSpec(3, (0.4, 0.3, 0.3), interactions)

    def test_weight_count_mismatch(self):
        with pytest.raises(DimensionError):
            MeasureSpec(3, (0.5, 0.5))

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(DEFAULT_BLOCK6.to_json()))
        spec = load_measure_spec(path)
        assert spec == DEFAULT_BLOCK6

    def test_malformed_json(self):
        with pytest.raises(MeasureError):
            MeasureSpec.from_json({"weights": [1.0]})

    def test_unchecked_conversion_matches(self):
        bad = MeasureSpec(2, (0.05, 0.95), {(1, 2): -0.2})
        m = moebius_from_spec(bad)
        assert m.moebius_singletons == pytest.approx((0.15, 1.05))
        report = dict((name, ok) for name, ok, _ in invariant_report(m))
        assert report["monotonicity"] is False
        assert report["normalization"] is True


class TestCapacity:
    def test_empty_and_full(self):
        m = default_measure()
        assert capacity_of(m, []) == 0.0
        assert capacity_of(m, range(1, 7)) == pytest.approx(1.0, abs=1e-12)

    def test_pair_capacity_matches_moebius_sum(self):
        m = default_measure()
        expected = m.moebius_singletons[0] + m.moebius_singletons[1] + m.moebius_pairs[(1, 2)]
        assert capacity_of(m, {1, 2}) == pytest.approx(expected, abs=1e-15)
        # 0.29 + 0.215 - 0.03
        assert capacity_of(m, {1, 2}) == pytest.approx(0.475)

    def test_out_of_range_subset(self):
        with pytest.raises(DimensionError):
            capacity_of(default_measure(), {0})

    def test_table_agrees_with_oracle(self):
        m = default_measure()
        for r in range(7):
            for a in itertools.combinations(range(1, 7), r):
                assert capacity_of(m, a) == pytest.approx(
                    subset_capacity(m.moebius_singletons, m.moebius_pairs, a), abs=1e-14)


class TestChoquet:
    def test_constant_vector(self):
        m = default_measure()
        assert choquet(m, [0.37] * 6) == pytest.approx(0.37, abs=1e-15)

    def test_additive_is_dot_product(self):
        w = (0.1, 0.2, 0.3, 0.4)
        y = (0.9, 0.1, 0.5, 0.3)
        assert choquet(additive_measure(w), y) == pytest.approx(float(np.dot(w, y)), abs=1e-15)

    def test_default_example_against_brute_force(self):
        m = default_measure()
        y = (0.9, 0.3, 0.5, 0.7, 0.1, 1.0)
        expected = brute_force_choquet(m.moebius_singletons, m.moebius_pairs, y)
        assert choquet(m, y) == pytest.approx(expected, abs=1e-12)
        assert choquet(m, y) == pytest.approx(moebius_choquet(m.moebius_singletons, m.moebius_pairs, y),
                                              abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            choquet(default_measure(), [0.5] * 5)

    def test_out_of_unit_interval(self):
        with pytest.raises(ValueError):
            choquet(default_measure(), [1.5, 0, 0, 0, 0, 0])

    def test_batch_matches_scalar(self):
        m = default_measure()
        rng = np.random.default_rng(3)
        prof = rng.random((50, 6))
        prof[:, 2] = prof[:, 3]  # force ties
        batch = choquet_scores(m, prof)
        for row, val in zip(prof, batch):
            assert val == pytest.approx(choquet(m, row), abs=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_matches_oracle_and_is_bounded(self, data):
        m = data.draw(valid_measures())
        y = data.draw(profiles_for(m.k))
        v = choquet(m, y)
        assert v == pytest.approx(brute_force_choquet(m.moebius_singletons, m.moebius_pairs, y), abs=1e-12)
        assert min(y) - 1e-12 <= v <= max(y) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_monotone_in_each_component(self, data):
        m = data.draw(valid_measures())
        y = data.draw(profiles_for(m.k))
        c = data.draw(st.integers(0, m.k - 1))
        bump = data.draw(st.floats(0.0, 1.0))
        z = list(y)
        z[c] = min(1.0, z[c] + bump)
        assert choquet(m, z) >= choquet(m, y) - 1e-12

    @settings(max_examples=100, deadline=None)
    @given(data=st.data())
    def test_tie_break_invariance(self, data):
        m = data.draw(valid_measures())
        levels = data.draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0]), min_size=m.k, max_size=m.k))
        # the oracle breaks ties by index, Moebius form needs no order at all
        assert choquet(m, levels) == pytest.approx(
            moebius_choquet(m.moebius_singletons, m.moebius_pairs, levels), abs=1e-12)


class TestShapley:
    def test_round_trip_default(self):
        assert shapley_values(default_measure()) == pytest.approx(DEFAULT_BLOCK6.weights, abs=1e-15)

    def test_additive(self):
        w = (0.2, 0.3, 0.5)
        assert shapley_values(additive_measure(w)) == pytest.approx(w)

    @settings(max_examples=100, deadline=None)
    @given(m=valid_measures())
    def test_sum_to_one(self, m):
        assert math.fsum(shapley_values(m)) == pytest.approx(1.0, abs=1e-9)
