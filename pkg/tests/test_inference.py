import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cwotce.capacity import additive_measure, default_measure
from cwotce.errors import DegenerateLabels, EmptyGroup, InsufficientPermutations, ZeroAttribution
from cwotce.inference import (
    CbiResult, cbi, cbi_test, ci_invert, ci_rank, cor_transform, exact_permutation_test,
    permutation_indices, permutation_test, shapley_attribution,
)

from oracles import all_pairs_cbi, exhaustive_p_value

tied_values = st.lists(st.integers(0, 6).map(lambda v: v / 4), min_size=1, max_size=30)


class TestCbi:
    def test_identical_groups(self):
        assert cbi([1, 2, 3], [1, 2, 3]) == 0.5

    def test_separation(self):
        assert cbi([4, 5], [1, 2]) == 1.0
        assert cbi([1, 2], [4, 5]) == 0.0

    def test_small_mixed(self):
        assert cbi([1, 3], [2]) == 0.5

    def test_empty(self):
        with pytest.raises(EmptyGroup):
            cbi([], [1.0])

    @settings(max_examples=300, deadline=None)
    @given(tied_values, tied_values)
    def test_equals_all_pairs(self, a, b):
        # integer pair counts divided once: the float is the correctly rounded fraction
        assert cbi(a, b) == float(all_pairs_cbi(a, b))

    @settings(max_examples=200, deadline=None)
    @given(tied_values, tied_values)
    def test_complement(self, a, b):
        assert cbi(a, b) + cbi(b, a) == 1.0


class TestPermutationTest:
    def test_all_identical_scores(self):
        p, null = permutation_test([0.3] * 10, [0, 1] * 5, b=99, seed=1)
        assert p == 1.0
        assert np.all(null == 0.0)

    def test_exhaustive_small_example(self):
        scores = [10, 11, 12, 1, 2, 3]
        labels = [1, 1, 1, 0, 0, 0]
        assert exhaustive_p_value(scores, labels) == Fraction(2, 20)
        assert exact_permutation_test(scores, labels) == pytest.approx(0.1)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 4), min_size=6, max_size=6), st.permutations([1, 1, 1, 0, 0, 0]))
    def test_exact_enumeration_matches_oracle(self, scores, labels):
        assert exact_permutation_test(scores, labels) == pytest.approx(
            float(exhaustive_p_value(scores, labels)), abs=1e-15)

    def test_too_few_permutations(self):
        with pytest.raises(InsufficientPermutations):
            permutation_test([1, 2, 3, 4], [0, 1, 0, 1], b=10)

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            permutation_test([1, 2, 3], [1, 1, 1], b=19)

    def test_reproducible_and_seed_sensitive(self):
        rng = np.random.default_rng(0)
        x = rng.random(40)
        lab = np.repeat([0, 1], 20)
        assert permutation_test(x, lab, b=199, seed=7)[0] == permutation_test(x, lab, b=199, seed=7)[0]
        assert not np.array_equal(permutation_indices(40, 5, 7), permutation_indices(40, 5, 8))

    def test_replicate_stream_independent_of_count(self):
        # replicate r is a function of (seed, r) only
        np.testing.assert_array_equal(permutation_indices(12, 30, "s")[:10],
                                      permutation_indices(12, 10, "s"))

    def test_null_deviations_match_direct_cbi(self):
        rng = np.random.default_rng(5)
        x = rng.integers(0, 5, 16).astype(float)
        lab = np.repeat([0, 1], 8).astype(bool)
        _, null = permutation_test(x, lab, b=19, seed=3)
        perms = permutation_indices(16, 19, 3)
        for r in range(19):
            t = lab[perms[r]]
            assert null[r] == pytest.approx(cbi(x[t], x[~t]) - 0.5, abs=1e-15)

    def test_label_swap(self):
        rng = np.random.default_rng(2)
        x = rng.random(30)
        lab = np.repeat([0, 1], 15)
        a = cbi_test(x, lab, b=199, seed=4)
        b = cbi_test(x, 1 - lab, b=199, seed=4)
        assert a.cbi + b.cbi == pytest.approx(1.0, abs=1e-15)
        assert a.p_value == b.p_value

    @pytest.mark.slow
    def test_super_uniform_under_null(self):
        rng = np.random.default_rng(11)
        rejections = 0
        reps = 2000
        lab = np.repeat([0, 1], 15)
        for i in range(reps):
            x = rng.normal(size=30).round(1)
            p, _ = permutation_test(x, lab, b=199, seed=("null", i))
            rejections += p < 0.05
        assert 0.035 <= rejections / reps <= 0.065


class TestCiRank:
    @pytest.mark.parametrize("b,alpha,rank", [
        (999, 0.05, 951), (199, 0.05, 191), (39, 0.05, 39), (19, 0.10, 19), (19, 0.05, 20),
    ])
    def test_ranks(self, b, alpha, rank):
        assert ci_rank(b, alpha) == rank

    @pytest.mark.parametrize("b", [19, 20, 39, 99, 199, 999])
    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1, 0.2])
    def test_rank_is_the_duality_boundary(self, b, alpha):
        # with the r-th smallest deviation as Q, 0.5 is excluded exactly when
        # fewer than b + 1 - r deviations reach |D_obs|, i.e. when p < alpha
        r = ci_rank(b, alpha)
        for exceed in range(b + 1):
            p = (1 + exceed) / (b + 1)
            excluded = exceed <= b - r
            assert (p < alpha) == excluded

    def test_invalid(self):
        with pytest.raises(InsufficientPermutations):
            ci_rank(99, 1.5)


class TestCi:
    def test_all_zero_null(self):
        lo, hi = ci_invert(0.5, np.zeros(999), 0.05)
        assert (lo, hi) == (0.5, 0.5)
        lo, hi = ci_invert(0.6, np.zeros(999), 0.05)
        assert (lo, hi) == (0.6, 0.6)

    def test_clipped(self):
        lo, hi = ci_invert(0.95, np.full(99, 0.2), 0.05)
        assert hi == 1.0 and lo == pytest.approx(0.75)

    def test_infinite_half_width_when_test_cannot_reject(self):
        lo, hi = ci_invert(1.0, np.zeros(19), 0.05)
        assert (lo, hi) == (0.0, 1.0)

    @settings(max_examples=300, deadline=None)
    @given(st.data())
    def test_duality_and_coverage_of_estimate(self, data):
        n1 = data.draw(st.integers(3, 12))
        n2 = data.draw(st.integers(3, 12))
        scores = data.draw(st.lists(st.integers(0, 3), min_size=n1 + n2, max_size=n1 + n2))
        b = data.draw(st.sampled_from([19, 39, 99]))
        alpha = data.draw(st.sampled_from([0.05, 0.10]))
        lab = np.array([1] * n1 + [0] * n2)
        res = cbi_test(np.asarray(scores, float), lab, b=b, alpha=alpha, seed=data.draw(st.integers(0, 99)))
        assert res.ci_lo <= res.cbi <= res.ci_hi
        excludes = not (res.ci_lo <= 0.5 <= res.ci_hi)
        assert (res.p_value < alpha) == excludes == res.excludes_null


class TestCor:
    def test_values(self):
        assert cor_transform((0.5, 0.5, 0.5))[0] == 1.0
        assert cor_transform((2 / 3, 0.5, 0.8))[0] == pytest.approx(2.0)
        assert cor_transform((1.0, 0.9, 1.0)) == (math.inf, (pytest.approx(9.0), math.inf))

    def test_result_fields(self):
        res = cbi_test([3.0, 4.0, 1.5, 0.0, 1.0, 2.0] * 4, [1, 1, 1, 0, 0, 0] * 4, b=199, seed=0)
        assert isinstance(res, CbiResult)
        assert res.cor == pytest.approx(res.cbi / (1 - res.cbi))
        assert res.rejected
        assert res.to_dict()["ci"] == [res.ci_lo, res.ci_hi]


class TestAttribution:
    def test_single_component_effect(self):
        prof = np.full((10, 3), 0.4)
        lab = np.repeat([0, 1], 5)
        prof[lab == 1, 1] = 0.9
        res = shapley_attribution(prof, lab, additive_measure((0.3, 0.3, 0.4)))
        assert res.percentages == pytest.approx([0.0, 100.0, 0.0])

    def test_symmetric_split(self):
        prof = np.full((10, 2), 0.2)
        lab = np.repeat([0, 1], 5)
        prof[lab == 1] = 0.8
        res = shapley_attribution(prof, lab, additive_measure((0.5, 0.5)))
        assert res.percentages == pytest.approx([50.0, 50.0])

    def test_additive_closed_form(self):
        rng = np.random.default_rng(9)
        prof = rng.random((40, 4))
        lab = np.repeat([0, 1], 20)
        w = np.array([0.1, 0.2, 0.3, 0.4])
        res = shapley_attribution(prof, lab, additive_measure(w))
        delta = prof[lab == 1].mean(axis=0) - prof[lab == 0].mean(axis=0)
        np.testing.assert_allclose(res.drops, w * delta, atol=1e-14)
        assert res.total_effect == pytest.approx(float(w @ delta), abs=1e-14)

    def test_negative_drops_floored(self):
        prof = np.full((10, 2), 0.5)
        lab = np.repeat([0, 1], 5)
        prof[lab == 1, 0] = 0.9
        prof[lab == 1, 1] = 0.3
        res = shapley_attribution(prof, lab, additive_measure((0.5, 0.5)))
        assert res.drops[1] < 0
        assert res.percentages == pytest.approx([100.0, 0.0])

    def test_zero_attribution(self):
        prof = np.full((6, 2), 0.5)
        with pytest.raises(ZeroAttribution) as info:
            shapley_attribution(prof, [0, 0, 0, 1, 1, 1], additive_measure((0.5, 0.5)))
        assert info.value.result.percentages is None

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_percentages_sum_to_100(self, seed):
        rng = np.random.default_rng(seed)
        prof = rng.random((30, 6))
        lab = np.repeat([0, 1], 15)
        try:
            res = shapley_attribution(prof, lab, default_measure())
        except ZeroAttribution:
            return
        assert res.percentages.sum() == pytest.approx(100.0, abs=1e-6)
