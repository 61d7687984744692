import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bqcd.detectors import (
    GlobalCusum,
    GlrArm,
    PerActionCusum,
    SrStatistic,
    bernoulli_kl,
    first_crossing,
)
from bqcd.errors import DomainError


def glr_bruteforce(xs):
    """From-scratch double-loop GLR evaluation; independent of GlrArm's bookkeeping."""
    n = len(xs)
    if n < 2:
        return 0.0
    total = 0.0
    for x in xs:
        total += x
    mean_all = total / n
    if not 0.0 < mean_all < 1.0:
        return 0.0
    best = 0.0
    left_sum = 0.0
    for s in range(1, n):
        left_sum += xs[s - 1]
        left = min(1.0, left_sum / s)
        right = min(1.0, max(0.0, (total - left_sum) / (n - s)))
        val = s * bernoulli_kl(left, mean_all) + (n - s) * bernoulli_kl(right, mean_all)
        if val > best:
            best = val
    return best


class TestGlobalCusum:
    def test_hand_trace(self):
        c = GlobalCusum()
        assert [c.update(i) for i in (1.0, -2.0, 3.0)] == [1.0, -1.0, 3.0]

    def test_negative_state_resets_before_add(self):
        c = GlobalCusum(-5.0)
        assert c.update(0.0) == 0.0

    def test_positive_state_accumulates(self):
        c = GlobalCusum(2.0)
        assert c.update(-1.0) == 1.0

    def test_nonfinite_increment_fatal(self):
        c = GlobalCusum()
        with pytest.raises(FloatingPointError):
            c.update(math.nan)
        with pytest.raises(FloatingPointError):
            c.update(math.inf)

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), max_size=200))
    @settings(max_examples=100)
    def test_matches_independent_fold(self, increments):
        c = GlobalCusum()
        trace = [c.update(r) for r in increments]
        acc = 0.0
        expected = []
        for r in increments:
            acc = max(acc, 0.0) + r
            expected.append(acc)
        assert trace == expected


class TestPerActionCusum:
    def test_update_touches_only_selected(self):
        d = PerActionCusum(3)
        d.update(1, 2.0)
        assert d.values == [0.0, 2.0, 0.0]

    def test_hand_trace_single_arm(self):
        d = PerActionCusum(3)
        d.update(1, 2.0)
        d.update(1, -3.0)
        assert d.update(1, 1.0) == 1.0

    def test_other_entries_bit_identical(self):
        d = PerActionCusum(3)
        d.update(2, 0.3)
        before = d.values[2]
        for _ in range(50):
            d.update(0, 1.7)
        assert d.values[2] == before


class TestCheckAlarm:
    def test_crossing_at_threshold_exactly(self):
        c = GlobalCusum(4.0)
        assert c.crossed(4.0)

    def test_below_threshold_no_alarm(self):
        c = GlobalCusum(4.0 - 1e-9)
        assert not c.crossed(4.0)

    def test_per_action_smallest_index(self):
        b = 3.0
        assert first_crossing([0.1, b + 1.0, b + 2.0], b) == 1
        assert first_crossing([0.1, 0.2, 0.3], b) is None


class TestBernoulliKl:
    def test_identical_args_zero(self):
        assert bernoulli_kl(0.5, 0.5) == 0.0

    def test_p_zero(self):
        assert bernoulli_kl(0.0, 0.5) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_p_one(self):
        assert bernoulli_kl(1.0, 0.25) == pytest.approx(math.log(4.0), rel=1e-12)

    def test_boundary_q_rejected(self):
        for q in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DomainError):
                bernoulli_kl(0.5, q)

    def test_p_outside_unit_interval_rejected(self):
        with pytest.raises(DomainError):
            bernoulli_kl(1.5, 0.5)

    @given(st.floats(0, 1, allow_nan=False), st.floats(1e-9, 1 - 1e-9, allow_nan=False))
    @settings(max_examples=200)
    def test_nonnegative(self, p, q):
        assert bernoulli_kl(p, q) >= 0.0


class TestGlrArm:
    def test_constant_sequence_zero(self):
        # segment means equal the global mean; only prefix-sum rounding remains
        arm = GlrArm()
        for _ in range(4):
            arm.append(0.3)
        assert arm.g <= 1e-12

    def test_single_sample_zero(self):
        arm = GlrArm()
        arm.append(0.7)
        assert arm.g == 0.0

    def test_step_sequence_matches_bruteforce(self):
        xs = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
        arm = GlrArm()
        for x in xs:
            arm.append(x)
        assert arm.g == glr_bruteforce(xs)
        assert arm.g > 0.0

    def test_all_boundary_samples_zero(self):
        arm = GlrArm()
        for _ in range(5):
            arm.append(0.0)
        assert arm.g == 0.0

    def test_out_of_range_rejected(self):
        arm = GlrArm()
        with pytest.raises(DomainError):
            arm.append(1.5)
        with pytest.raises(DomainError):
            arm.append(-0.1)

    def test_prefix_bookkeeping(self):
        arm = GlrArm()
        for x in (0.2, 0.4, 0.9):
            arm.append(x)
        assert arm.count == 3
        assert len(arm.prefix) == arm.count + 1
        assert arm.prefix[-1] == pytest.approx(1.5)

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=64))
    @settings(max_examples=150, deadline=None)
    def test_incremental_equals_bruteforce_exactly(self, xs):
        arm = GlrArm()
        for i, x in enumerate(xs, start=1):
            arm.append(x)
            assert arm.g == glr_bruteforce(xs[:i])

    def test_vectorized_path_agrees_with_bruteforce(self):
        rng = np.random.default_rng(21)
        xs = rng.beta(0.4, 1.6, size=160).tolist()
        arm = GlrArm()
        for x in xs:
            arm.append(x)
        assert arm.count > 96
        assert arm.g == pytest.approx(glr_bruteforce(xs), rel=1e-9)

    def test_split_subsample_is_lower_bound(self):
        rng = np.random.default_rng(22)
        xs = rng.beta(0.4, 1.6, size=60).tolist()
        exact = GlrArm()
        approx = GlrArm(split_subsample=True)
        for x in xs:
            exact.append(x)
            approx.append(x)
        assert approx.g <= exact.g + 1e-12
        assert approx.g >= 0.5 * exact.g


class TestGlrReward:
    def test_constant_data_zero_reward(self):
        arm = GlrArm()
        for _ in range(4):
            arm.append(0.3)
        assert arm.normalized_reward() <= 1e-12

    def test_reward_is_g_over_count(self):
        xs = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
        arm = GlrArm()
        for x in xs:
            arm.append(x)
        assert arm.normalized_reward() == arm.g / 6

    def test_reward_is_read_only(self):
        arm = GlrArm()
        arm.append(0.5)
        before = (arm.count, arm.g)
        arm.normalized_reward()
        assert (arm.count, arm.g) == before

    def test_empty_arm_rejected(self):
        with pytest.raises(ValueError):
            GlrArm().normalized_reward()


class TestGlrIncrementVariance:
    def test_equal_increments_zero_variance(self):
        # boundary samples keep g at exactly 0, so every increment is exactly 0
        arm = GlrArm()
        for _ in range(6):
            arm.append(0.0)
        assert arm.increment_variance() == 0.0

    def test_near_constant_increments_tiny_variance(self):
        arm = GlrArm()
        for _ in range(6):
            arm.append(0.4)
        assert arm.increment_variance() <= 1e-30

    def test_undefined_below_three_samples(self):
        arm = GlrArm()
        assert arm.increment_variance() is None
        arm.append(0.2)
        assert arm.increment_variance() is None
        arm.append(0.8)
        assert arm.increment_variance() is None
        arm.append(0.5)
        assert arm.increment_variance() is not None

    def test_matches_two_pass_within_8_ulp(self):
        xs = [0.0, 1.0, 0.0, 1.0, 0.0]
        arm = GlrArm()
        gs = [arm.append(x) for x in xs]
        increments = [gs[i] - gs[i - 1] for i in range(1, len(gs))]
        mean = sum(increments) / len(increments)
        two_pass = sum((d - mean) ** 2 for d in increments) / (len(xs) - 2)
        streaming = arm.increment_variance()
        assert abs(streaming - two_pass) <= 8 * math.ulp(max(streaming, two_pass, 1e-300))

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_two_pass_property(self, xs):
        arm = GlrArm()
        gs = [arm.append(x) for x in xs]
        increments = [gs[i] - gs[i - 1] for i in range(1, len(gs))]
        mean = sum(increments) / len(increments)
        two_pass = sum((d - mean) ** 2 for d in increments) / (len(xs) - 2)
        streaming = arm.increment_variance()
        assert streaming == pytest.approx(two_pass, rel=1e-9, abs=1e-15)


class TestSrStatistic:
    def test_zero_state_zero_llr(self):
        sr = SrStatistic(2)
        sr.update(0, 0.0)
        assert sr.values[0] == 1.0

    def test_growth_with_log_two(self):
        sr = SrStatistic(2)
        sr.update(0, 0.0)
        sr.update(0, math.log(2.0))
        assert sr.values[0] == pytest.approx(4.0, rel=1e-12)

    def test_other_entries_unchanged(self):
        sr = SrStatistic(2)
        sr.update(0, 0.5)
        assert sr.values[1] == 0.0

    def test_total_is_sum(self):
        sr = SrStatistic(3)
        for a, llr in ((0, 0.1), (1, -0.2), (2, 0.3), (0, 0.05)):
            sr.update(a, llr)
        assert sr.total == sum(sr.values)

    def test_overflow_clamped_and_flagged(self):
        sr = SrStatistic(1)
        sr.update(0, 800.0)
        assert sr.values[0] == 1e300
        assert sr.overflowed
        sr.update(0, 800.0)
        assert sr.values[0] == 1e300
