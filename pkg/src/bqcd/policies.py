"""Action-selection controllers.

The restarted UCB policy wipes its bookkeeping every `window` observations so
that post-change rewards are not drowned out by a long pre-change history.
Round-robin and greedy baselines are stateless apart from a step counter and
a per-component cumulative sum, respectively.
"""

from __future__ import annotations

import math
from enum import Enum

from .errors import ConfigError


class RestartedUcb:
    """UCB index policy with periodic restarts.

    `bonus_scale` is either a single float (the 4v scale used with LLR
    rewards) or a per-arm list (2 * empirical increment variance, for GLR
    rewards). math.inf in a per-arm slot forces exploration of that arm.
    """

    def __init__(self, n_arms: int, window: int, bonus_scale):
        if window < 2:
            raise ConfigError(f"UCB window must be >= 2, got {window}")
        if n_arms < 1:
            raise ConfigError("need at least one arm")
        self.n_arms = n_arms
        self.window = window
        self.log_window = math.log(window)
        if isinstance(bonus_scale, (int, float)):
            scale = float(bonus_scale)
            self.bonus_scale = [scale] * n_arms
            # fixed scale: the bonus only depends on the pull count
            self._table = [math.inf] + [
                math.sqrt(scale * self.log_window / n) for n in range(1, window + 1)
            ]
        else:
            self.bonus_scale = list(bonus_scale)
            self._table = None
        self.pulls = [0] * n_arms
        self.means = [0.0] * n_arms
        self.step_in_window = 0
        self._pending: int | None = None

    def set_bonus_scale(self, action: int, scale: float):
        assert self._table is None, "per-arm scales require per-arm mode"
        self.bonus_scale[action] = scale

    def index(self, action: int) -> float:
        n = self.pulls[action]
        if n == 0:
            return math.inf
        if self._table is not None:
            return self.means[action] + self._table[n]
        scale = self.bonus_scale[action]
        if scale == math.inf:
            return math.inf
        return self.means[action] + math.sqrt(scale * self.log_window / n)

    def select(self) -> int:
        assert self._pending is None, "select called twice without observe"
        best = -math.inf
        chosen = 0
        table = self._table
        means = self.means
        pulls = self.pulls
        if table is not None:
            for a in range(self.n_arms):
                n = pulls[a]
                v = math.inf if n == 0 else means[a] + table[n]
                if v > best:
                    best = v
                    chosen = a
        else:
            for a in range(self.n_arms):
                v = self.index(a)
                if v > best:
                    best = v
                    chosen = a
        self._pending = chosen
        return chosen

    def observe(self, action: int, reward: float):
        assert self._pending == action, "observe must follow select of the same action"
        self._pending = None
        n = self.pulls[action]
        self.means[action] = (n * self.means[action] + reward) / (n + 1)
        self.pulls[action] = n + 1
        self.step_in_window += 1
        if self.step_in_window == self.window:
            self.restart()

    def restart(self):
        self.pulls = [0] * self.n_arms
        self.means = [0.0] * self.n_arms
        self.step_in_window = 0


def roundrobin_select(step: int, n_arms: int) -> int:
    return step % n_arms


class GreedyDecision(Enum):
    CONTINUE = "continue"
    ALARM = "alarm"
    SWITCH = "switch"


class GreedyController:
    """Single-component sampler with a restartable cumulative LLR.

    Stays on the current component while its cumulative LLR is in (0, b);
    alarms at or above b; at or below zero it drops the accumulated evidence
    and moves to the next component.
    """

    def __init__(self, n_arms: int, start: int = 0):
        self.n_arms = n_arms
        self.current = start
        self.cum_llr = 0.0

    def step(self, llr_value: float, threshold: float) -> GreedyDecision:
        self.cum_llr += llr_value
        if self.cum_llr >= threshold:
            return GreedyDecision.ALARM
        if self.cum_llr <= 0.0:
            self.cum_llr = 0.0
            self.current = (self.current + 1) % self.n_arms
            return GreedyDecision.SWITCH
        return GreedyDecision.CONTINUE
