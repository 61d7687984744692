"""Change-detection statistics.

Contains the global CuSum-like recursion, its per-action variant, the
Bernoulli GLR statistic with incremental bookkeeping for [0,1]-valued
observations, and the exponentiated SR-like statistic whose drift-corrected
sum is a pre-change martingale (used as a false-alarm oracle in tests).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import rel_entr

from .errors import DomainError

# sr_update clamps exp() overflow here instead of erroring; only reachable
# under post-change data, where the martingale oracle never runs.
SR_CLAMP = 1e300


class GlobalCusum:
    """C <- max(C, 0) + increment, alarm when C >= threshold."""

    __slots__ = ("value",)

    def __init__(self, value: float = 0.0):
        self.value = value

    def update(self, increment: float) -> float:
        if not math.isfinite(increment):
            raise FloatingPointError(f"non-finite CuSum increment {increment}")
        c = self.value
        if c < 0.0:
            c = 0.0
        self.value = c + increment
        return self.value

    def crossed(self, threshold: float) -> bool:
        return self.value >= threshold


class PerActionCusum:
    """One CuSum recursion per action; updates touch only the selected entry."""

    __slots__ = ("values",)

    def __init__(self, n_arms: int):
        self.values = [0.0] * n_arms

    def update(self, action: int, increment: float) -> float:
        if not math.isfinite(increment):
            raise FloatingPointError(f"non-finite CuSum increment {increment}")
        c = self.values[action]
        if c < 0.0:
            c = 0.0
        c += increment
        self.values[action] = c
        return c

    def first_crossing(self, threshold: float) -> int | None:
        return first_crossing(self.values, threshold)


def first_crossing(values, threshold: float) -> int | None:
    """Smallest index whose statistic is at or above the threshold, else None."""
    for a, v in enumerate(values):
        if v >= threshold:
            return a
    return None


# Above this length the exact split scan runs vectorized; below it, a scalar
# loop whose arithmetic matches a from-scratch double-loop evaluation
# bit-for-bit (both derive segment sums as prefix differences).
_VECTOR_MIN = 96


def _glr_max_vectorized(prefix: list, n: int, total: float, mean_all: float) -> float:
    arr = np.asarray(prefix[1:n])
    s = np.arange(1, n, dtype=float)
    left = np.clip(arr / s, 0.0, 1.0)
    right = np.clip((total - arr) / (n - s), 0.0, 1.0)
    val = s * (rel_entr(left, mean_all) + rel_entr(1.0 - left, 1.0 - mean_all)) + (n - s) * (
        rel_entr(right, mean_all) + rel_entr(1.0 - right, 1.0 - mean_all)
    )
    best = float(val.max())
    return best if best > 0.0 else 0.0


def bernoulli_kl(p: float, q: float) -> float:
    """kl(p, q) = p ln(p/q) + (1-p) ln((1-p)/(1-q)) with 0 ln 0 = 0.

    q must lie strictly inside (0, 1); a boundary q signals a degenerate
    segment mean and raises.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"kl: p = {p} outside [0, 1]")
    if not 0.0 < q < 1.0:
        raise DomainError(f"kl: q = {q} outside (0, 1)")
    total = 0.0
    if p > 0.0:
        total += p * math.log(p / q)
    if p < 1.0:
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return total


class GlrArm:
    """Bernoulli GLR statistic over one arm's sample stream.

    Keeps prefix sums so each append recomputes the exact maximum over all
    split points in O(n).  Also tracks running moments of the statistic's
    per-sample increments for the empirical variance used by the UCB bonus.
    """

    __slots__ = ("count", "prefix", "g", "_inc_n", "_inc_mean", "_inc_m2", "split_subsample")

    def __init__(self, split_subsample: bool = False):
        self.count = 0
        self.prefix = [0.0]
        self.g = 0.0
        self._inc_n = 0
        self._inc_mean = 0.0
        self._inc_m2 = 0.0
        # Optional geometric split grid; makes g a lower bound of the exact
        # statistic. Off by default.
        self.split_subsample = split_subsample

    def append(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"GLR observation {x} outside [0, 1]")
        prev_g = self.g
        prefix = self.prefix
        prefix.append(prefix[-1] + x)
        n = self.count = self.count + 1
        if n >= 2:
            total = prefix[n]
            mean_all = total / n
            if 0.0 < mean_all < 1.0:
                if n > _VECTOR_MIN and not self.split_subsample:
                    self.g = _glr_max_vectorized(prefix, n, total, mean_all)
                else:
                    best = 0.0
                    for s in self._splits(n):
                        ps = prefix[s]
                        # prefix-difference means can leave [0,1] by one ulp
                        left = ps / s
                        if left > 1.0:
                            left = 1.0
                        right = (total - ps) / (n - s)
                        if right < 0.0:
                            right = 0.0
                        elif right > 1.0:
                            right = 1.0
                        val = s * bernoulli_kl(left, mean_all) + (n - s) * bernoulli_kl(
                            right, mean_all
                        )
                        if val > best:
                            best = val
                    self.g = best
            else:
                # every sample sits at the same boundary: no split carries evidence
                self.g = 0.0
            d = self.g - prev_g
            self._inc_n += 1
            delta = d - self._inc_mean
            self._inc_mean += delta / self._inc_n
            self._inc_m2 += delta * (d - self._inc_mean)
        return self.g

    def _splits(self, n: int):
        if not self.split_subsample or n <= 8:
            return range(1, n)
        grid = []
        s = 1
        while s < n:
            grid.append(s)
            s = max(s + 1, int(s * 1.15))
        if grid[-1] != n - 1:
            grid.append(n - 1)
        return grid

    def normalized_reward(self) -> float:
        if self.count == 0:
            raise ValueError("normalized reward undefined before the first sample")
        return self.g / self.count

    def increment_variance(self) -> float | None:
        """Unbiased variance of the GLR increments; None while count < 3."""
        if self.count < 3:
            return None
        var = self._inc_m2 / (self.count - 2)
        return var if var > 0.0 else 0.0


class SrStatistic:
    """Per-action SR-like statistics S_a and their sum S.

    The selected action's entry maps s -> (s + 1) exp(llr); the sum minus the
    step count is a martingale under pre-change sampling for any policy.
    """

    __slots__ = ("values", "total", "overflowed")

    def __init__(self, n_arms: int):
        self.values = [0.0] * n_arms
        self.total = 0.0
        self.overflowed = False

    def update(self, action: int, llr_value: float) -> float:
        if not math.isfinite(llr_value):
            raise FloatingPointError(f"non-finite LLR {llr_value}")
        try:
            grown = (self.values[action] + 1.0) * math.exp(llr_value)
        except OverflowError:
            grown = SR_CLAMP
            self.overflowed = True
        if grown > SR_CLAMP:
            grown = SR_CLAMP
            self.overflowed = True
        self.values[action] = grown
        self.total = sum(self.values)
        return self.total
