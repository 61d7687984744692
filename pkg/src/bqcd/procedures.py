"""Stepping agents: one policy plus one detector over a channel scenario.

Each procedure executes the same per-step cycle: select a channel, draw one
observation from it, update the detection statistic, update the policy, then
check the alarm rule.  The environment clock advances exactly once per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from time import perf_counter
from typing import TYPE_CHECKING, Callable

import numpy as np

from .channels import BETA, make_llr, make_sampler
from .detectors import GlobalCusum, GlrArm, PerActionCusum
from .errors import ConfigError
from .policies import GreedyController, GreedyDecision, RestartedUcb, roundrobin_select

if TYPE_CHECKING:
    from .harness import Scenario


class ProcedureKind(Enum):
    UCB_CUSUM = "UcbCusum"
    PA_UCB_CUSUM = "PaUcbCusum"
    PA_UCB_GLR = "PaUcbGlr"
    GREEDY = "Greedy"
    ROUND_ROBIN = "RoundRobin"
    PA_ROUND_ROBIN = "PaRoundRobin"
    PA_ROUND_ROBIN_GLR = "PaRoundRobinGlr"

    @property
    def uses_glr(self) -> bool:
        return self in (ProcedureKind.PA_UCB_GLR, ProcedureKind.PA_ROUND_ROBIN_GLR)

    @property
    def uses_ucb(self) -> bool:
        return self in (
            ProcedureKind.UCB_CUSUM,
            ProcedureKind.PA_UCB_CUSUM,
            ProcedureKind.PA_UCB_GLR,
        )

    @property
    def needs_v(self) -> bool:
        return self in (ProcedureKind.UCB_CUSUM, ProcedureKind.PA_UCB_CUSUM)

    @property
    def per_action(self) -> bool:
        return self in (
            ProcedureKind.PA_UCB_CUSUM,
            ProcedureKind.PA_UCB_GLR,
            ProcedureKind.PA_ROUND_ROBIN,
            ProcedureKind.PA_ROUND_ROBIN_GLR,
        )


def parse_kind(name: str) -> ProcedureKind:
    for kind in ProcedureKind:
        if kind.value == name:
            return kind
    known = ", ".join(k.value for k in ProcedureKind)
    raise ConfigError(f"unknown procedure {name!r}; known procedures: {known}")


@dataclass(frozen=True)
class ProcedureConfig:
    kind: ProcedureKind
    threshold: float
    window: int = 2
    v: float | None = None
    glr_split_subsample: bool = False

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.v is not None and self.v <= 0.0:
            raise ConfigError(f"sub-Gaussian bound v must be > 0, got {self.v}")


@dataclass(slots=True)
class StepOutcome:
    """One step's action, draw, alarm decision, and statistic snapshot.

    For per-action procedures the snapshot is the updated entry's value
    (other entries never change within a step).
    """

    action: int
    observation: float
    alarmed: bool
    alarm_action: int | None
    statistic: float


@dataclass(slots=True)
class TrialRecord:
    """Result of running one trial to alarm or censoring cap."""

    stopping_time: int
    censored: bool
    alarm_action: int | None
    steps: int
    elapsed_s: float
    sample_s: float


class Environment:
    """Draws one observation per step from the scenario's regime at that step.

    Observations at 1-indexed steps n >= change_point come from the
    post-change density on affected channels, otherwise from the pre-change
    density.  `t` counts completed draws; exactly one draw per procedure step.
    """

    __slots__ = ("nu", "t", "sample_seconds", "_affected", "_pre", "_post", "_timed")

    def __init__(self, scenario, rng: np.random.Generator, measure_time: bool = False):
        self.nu = scenario.change_point
        self._affected = [m.affected for m in scenario.channels]
        self._pre = [make_sampler(m.pre, rng) for m in scenario.channels]
        self._post = [make_sampler(m.post, rng) for m in scenario.channels]
        self.t = 0
        self.sample_seconds = 0.0
        self._timed = measure_time

    def sample(self, action: int) -> float:
        n = self.t + 1
        draw = self._post[action] if (n >= self.nu and self._affected[action]) else self._pre[action]
        if self._timed:
            t0 = perf_counter()
            x = draw()
            self.sample_seconds += perf_counter() - t0
        else:
            x = draw()
        self.t = n
        return x


class Procedure:
    """Base stepping agent; subclasses implement one paired policy/detector."""

    kind: ProcedureKind

    def __init__(self, config: ProcedureConfig, scenario):
        self.config = config
        self.k = len(scenario.channels)
        self.threshold = config.threshold
        self.steps = 0
        self.alarmed = False
        self.alarm_action: int | None = None

    def step(self, env: Environment) -> StepOutcome:
        raise NotImplementedError

    def _check_not_alarmed(self):
        if self.alarmed:
            raise RuntimeError("procedure stepped after alarm")


class _LlrProcedure(Procedure):
    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.llrs: list[Callable[[float], float]] = [make_llr(m) for m in scenario.channels]


class UcbCusumProcedure(_LlrProcedure):
    kind = ProcedureKind.UCB_CUSUM

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.policy = RestartedUcb(self.k, config.window, 4.0 * config.v)
        self.detector = GlobalCusum()

    def step(self, env):
        self._check_not_alarmed()
        a = self.policy.select()
        x = env.sample(a)
        r = self.llrs[a](x)
        c = self.detector.update(r)
        self.policy.observe(a, r)
        self.steps += 1
        if c >= self.threshold:
            self.alarmed = True
        return StepOutcome(a, x, self.alarmed, None, c)


class PaUcbCusumProcedure(_LlrProcedure):
    kind = ProcedureKind.PA_UCB_CUSUM

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.policy = RestartedUcb(self.k, config.window, 4.0 * config.v)
        self.detector = PerActionCusum(self.k)

    def step(self, env):
        self._check_not_alarmed()
        a = self.policy.select()
        x = env.sample(a)
        r = self.llrs[a](x)
        c = self.detector.update(a, r)
        self.policy.observe(a, r)
        self.steps += 1
        if c >= self.threshold:
            self.alarmed = True
            self.alarm_action = a
        return StepOutcome(a, x, self.alarmed, self.alarm_action, c)


class PaUcbGlrProcedure(Procedure):
    kind = ProcedureKind.PA_UCB_GLR

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.policy = RestartedUcb(self.k, config.window, [math.inf] * self.k)
        self.arms = [GlrArm(config.glr_split_subsample) for _ in range(self.k)]

    def step(self, env):
        self._check_not_alarmed()
        a = self.policy.select()
        x = env.sample(a)
        arm = self.arms[a]
        g = arm.append(x)
        reward = g / arm.count
        var = arm.increment_variance()
        self.policy.set_bonus_scale(a, math.inf if var is None else 2.0 * var)
        self.policy.observe(a, reward)
        self.steps += 1
        if g >= self.threshold:
            self.alarmed = True
            self.alarm_action = a
        return StepOutcome(a, x, self.alarmed, self.alarm_action, g)


class GreedyProcedure(_LlrProcedure):
    kind = ProcedureKind.GREEDY

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.controller = GreedyController(self.k)

    def step(self, env):
        self._check_not_alarmed()
        a = self.controller.current
        x = env.sample(a)
        r = self.llrs[a](x)
        decision = self.controller.step(r, self.threshold)
        self.steps += 1
        if decision is GreedyDecision.ALARM:
            self.alarmed = True
        return StepOutcome(a, x, self.alarmed, None, self.controller.cum_llr)


class RoundRobinProcedure(_LlrProcedure):
    kind = ProcedureKind.ROUND_ROBIN

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.detector = GlobalCusum()

    def step(self, env):
        self._check_not_alarmed()
        a = roundrobin_select(self.steps, self.k)
        x = env.sample(a)
        c = self.detector.update(self.llrs[a](x))
        self.steps += 1
        if c >= self.threshold:
            self.alarmed = True
        return StepOutcome(a, x, self.alarmed, None, c)


class PaRoundRobinProcedure(_LlrProcedure):
    kind = ProcedureKind.PA_ROUND_ROBIN

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.detector = PerActionCusum(self.k)

    def step(self, env):
        self._check_not_alarmed()
        a = roundrobin_select(self.steps, self.k)
        x = env.sample(a)
        c = self.detector.update(a, self.llrs[a](x))
        self.steps += 1
        if c >= self.threshold:
            self.alarmed = True
            self.alarm_action = a
        return StepOutcome(a, x, self.alarmed, self.alarm_action, c)


class PaRoundRobinGlrProcedure(Procedure):
    kind = ProcedureKind.PA_ROUND_ROBIN_GLR

    def __init__(self, config, scenario):
        super().__init__(config, scenario)
        self.arms = [GlrArm(config.glr_split_subsample) for _ in range(self.k)]

    def step(self, env):
        self._check_not_alarmed()
        a = roundrobin_select(self.steps, self.k)
        x = env.sample(a)
        g = self.arms[a].append(x)
        self.steps += 1
        if g >= self.threshold:
            self.alarmed = True
            self.alarm_action = a
        return StepOutcome(a, x, self.alarmed, self.alarm_action, g)


_PROCEDURES = {
    cls.kind: cls
    for cls in (
        UcbCusumProcedure,
        PaUcbCusumProcedure,
        PaUcbGlrProcedure,
        GreedyProcedure,
        RoundRobinProcedure,
        PaRoundRobinProcedure,
        PaRoundRobinGlrProcedure,
    )
}


def procedure_new(config: ProcedureConfig, scenario) -> Procedure:
    """Build a cold procedure (zero statistics, uninitialized policy) for the scenario."""
    kind = config.kind
    if kind.uses_glr:
        for i, model in enumerate(scenario.channels):
            if model.pre.family != BETA:
                raise ConfigError(
                    f"{kind.value} needs observations bounded in [0,1]; "
                    f"channel {i} has family {model.pre.family!r}"
                )
    if kind.needs_v and config.v is None:
        raise ConfigError(f"{kind.value} needs the sub-Gaussian bound v in its config")
    return _PROCEDURES[kind](config, scenario)


def run_until_alarm(
    procedure: Procedure,
    env: Environment,
    cap: int,
    trace: Callable[[int, StepOutcome], None] | None = None,
) -> TrialRecord:
    """Step until the alarm fires or `cap` steps have run (censoring).

    Stopping times are 1-indexed; a censored record reports stopping_time=cap.
    """
    if cap <= 0:
        raise ConfigError(f"cap must be > 0, got {cap}")
    out = None
    t0 = perf_counter()
    if trace is None:
        while procedure.steps < cap:
            out = procedure.step(env)
            if out.alarmed:
                break
    else:
        while procedure.steps < cap:
            out = procedure.step(env)
            trace(procedure.steps, out)
            if out.alarmed:
                break
    elapsed = perf_counter() - t0
    alarmed = out is not None and out.alarmed
    return TrialRecord(
        stopping_time=procedure.steps if alarmed else cap,
        censored=not alarmed,
        alarm_action=procedure.alarm_action if alarmed else None,
        steps=procedure.steps,
        elapsed_s=elapsed,
        sample_s=env.sample_seconds,
    )
