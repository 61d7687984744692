"""Monte-Carlo engine: MTFA and detection-delay estimation over threshold sweeps.

Trials are embarrassingly parallel.  Every trial owns an RNG stream derived
from (seed, stream id, trial index) through numpy's SeedSequence spawn keys,
so results are identical for any worker count and any scheduling order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import ChannelModel, make_llr, subgaussian_bound
from .detectors import SrStatistic
from .errors import ConfigError
from .policies import RestartedUcb, roundrobin_select
from .procedures import (
    Environment,
    ProcedureConfig,
    ProcedureKind,
    TrialRecord,
    procedure_new,
    run_until_alarm,
)

SWEEP_CSV_COLUMNS = (
    "procedure",
    "scenario",
    "gamma",
    "b",
    "W",
    "trials",
    "mtfa_mean",
    "mtfa_stderr",
    "delay_mean",
    "delay_stderr",
    "censored_fraction",
    "cost_per_step_s",
)

# stream id reserved for the martingale oracle, away from sweep rows
_ORACLE_STREAM = 1_000_003
_TRACE_STREAM = 1_000_019

CENSOR_FLAG_LEVEL = 0.01


@dataclass(frozen=True)
class Scenario:
    """A complete experiment definition: channels plus the change regime."""

    label: str
    channels: tuple[ChannelModel, ...]
    change_point: float = 1
    v: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) < 1:
            raise ConfigError("scenario needs at least one channel")
        nu = self.change_point
        if nu != math.inf:
            if nu != int(nu) or nu < 1:
                raise ConfigError(f"change_point must be a positive integer or inf, got {nu}")
            object.__setattr__(self, "change_point", int(nu))
            if not any(m.affected for m in self.channels):
                raise ConfigError(
                    "a finite change_point needs a nonempty affected set "
                    "(some channel with pre != post)"
                )

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def affected_set(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.channels) if m.affected)

    def information_rate(self) -> float:
        """Largest post-vs-pre KL divergence over affected channels."""
        rates = [m.kl_divergence() for m in self.channels if m.affected]
        if not rates:
            raise ConfigError("information rate undefined: no affected channels")
        return max(rates)

    def with_change_point(self, nu) -> "Scenario":
        return replace(self, change_point=nu)

    def subgaussian_v(self) -> float:
        return self.v if self.v is not None else subgaussian_bound(list(self.channels))


@dataclass
class EstimateResult:
    mean: float
    stderr: float
    censored_fraction: float
    false_alarm_fraction: float = 0.0
    cost_per_step: float = 0.0
    cost_per_step_total: float = 0.0
    trials: int = 0


@dataclass
class SweepRow:
    procedure: str
    scenario: str
    gamma: float
    b: float
    window: int
    trials: int
    mtfa_mean: float
    mtfa_stderr: float
    delay_mean: float
    delay_stderr: float
    censored_fraction: float
    cost_per_step_s: float
    # end-to-end cost including sampling; equals cost_per_step_s unless the
    # pure-detector-cost mode selected the sampling-free figure for the CSV
    cost_end_to_end_s: float = 0.0


def resolve_workers(workers: int | None = None) -> int:
    limit = os.environ.get("BQCD_THREADS")
    cap = int(limit) if limit else None
    n = workers if workers is not None else (os.cpu_count() or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, n)


def trial_rng(seed: int, stream: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, trial)))


def _run_batch(args) -> list[TrialRecord]:
    config, scenario, cap, seed, stream, lo, hi, timed = args
    records = []
    for trial in range(lo, hi):
        env = Environment(scenario, trial_rng(seed, stream, trial), measure_time=timed)
        proc = procedure_new(config, scenario)
        records.append(run_until_alarm(proc, env, cap))
    return records


def _run_trials(config, scenario, trials, cap, seed, stream, workers, timed) -> list[TrialRecord]:
    workers = resolve_workers(workers)
    if workers == 1 or trials <= 8:
        return _run_batch((config, scenario, cap, seed, stream, 0, trials, timed))
    chunk = max(1, math.ceil(trials / (workers * 4)))
    tasks = [
        (config, scenario, cap, seed, stream, lo, min(lo + chunk, trials), timed)
        for lo in range(0, trials, chunk)
    ]
    records: list[TrialRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for batch in pool.map(_run_batch, tasks):
            records.extend(batch)
    return records


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def _cost(records: list[TrialRecord], pure: bool) -> float:
    per_step = [
        ((r.elapsed_s - r.sample_s) if pure else r.elapsed_s) / r.steps
        for r in records
        if r.steps > 0
    ]
    return float(np.mean(per_step)) if per_step else 0.0


def estimate_mtfa(
    config: ProcedureConfig,
    scenario: Scenario,
    trials: int,
    cap: int,
    seed: int,
    stream: int = 0,
    workers: int | None = None,
    measure_time: bool = True,
    pure_cost: bool = False,
) -> EstimateResult:
    """Mean time to false alarm under pure pre-change sampling.

    Censored trials contribute `cap`, biasing the estimate downward, which is
    conservative for lower-bound checks.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if scenario.change_point != math.inf:
        raise ConfigError("MTFA estimation needs change_point = inf (no change ever occurs)")
    records = _run_trials(config, scenario, trials, cap, seed, stream, workers, measure_time)
    values = np.array([r.stopping_time for r in records], dtype=float)
    mean, stderr = _mean_stderr(values)
    return EstimateResult(
        mean=mean,
        stderr=stderr,
        censored_fraction=sum(r.censored for r in records) / trials,
        cost_per_step=_cost(records, pure_cost) if measure_time else 0.0,
        cost_per_step_total=_cost(records, False) if measure_time else 0.0,
        trials=trials,
    )


def estimate_delay(
    config: ProcedureConfig,
    scenario: Scenario,
    trials: int,
    cap: int,
    seed: int,
    stream: int = 1,
    workers: int | None = None,
    measure_time: bool = True,
    pure_cost: bool = False,
) -> EstimateResult:
    """Expected detection delay (T - nu + 1) for trials alarming at or after nu.

    Trials alarming before nu are false alarms: excluded from the delay mean
    and reported via false_alarm_fraction.  Censored trials contribute
    cap - nu + 1 and are counted in censored_fraction.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    nu = scenario.change_point
    if nu == math.inf:
        raise ConfigError("delay estimation needs a finite change_point")
    records = _run_trials(config, scenario, trials, cap, seed, stream, workers, measure_time)
    delays = [
        r.stopping_time - nu + 1
        for r in records
        if r.censored or r.stopping_time >= nu
    ]
    false_alarms = sum(1 for r in records if not r.censored and r.stopping_time < nu)
    mean, stderr = _mean_stderr(np.array(delays, dtype=float))
    return EstimateResult(
        mean=mean,
        stderr=stderr,
        censored_fraction=sum(r.censored for r in records) / trials,
        false_alarm_fraction=false_alarms / trials,
        cost_per_step=_cost(records, pure_cost) if measure_time else 0.0,
        cost_per_step_total=_cost(records, False) if measure_time else 0.0,
        trials=trials,
    )


def ucb_window(b: float) -> int:
    """Interval length rule W = ceil(8 ln b), clamped to the minimum of 2."""
    if b <= 1.0:
        return 2
    return max(2, math.ceil(8.0 * math.log(b)))


def default_nu(kind: ProcedureKind, n_channels: int) -> int:
    # GLR procedures locate a change inside each arm's own sample stream; the
    # statistic saturates near (pre samples on the arm) * kl(pre mean, post
    # mean), so the change must land after the arms hold comfortably more
    # pre-change history than a threshold's worth of evidence.
    if kind.uses_glr:
        return 100 * n_channels + 1
    return 1


def sweep(
    kind: ProcedureKind,
    scenario: Scenario,
    gammas: list[float],
    trials: int,
    seed: int,
    cap: int | None = None,
    nu: int | None = None,
    workers: int | None = None,
    measure_cost: bool = True,
    pure_detector_cost: bool = False,
    glr_split_subsample: bool = False,
) -> list[SweepRow]:
    """One row per target MTFA level gamma, ascending, with b = ln gamma."""
    for g in gammas:
        if not g > 1.0:
            raise ConfigError(f"gamma must exceed 1 (got {g}); b = ln gamma must be positive")
    v = scenario.subgaussian_v() if kind.needs_v else None
    nu_row = nu if nu is not None else default_nu(kind, scenario.n_channels)
    rows = []
    for i, gamma in enumerate(sorted(gammas)):
        b = math.log(gamma)
        window = ucb_window(b)
        row_cap = cap if cap is not None else math.ceil(50.0 * gamma)
        config = ProcedureConfig(
            kind=kind,
            threshold=b,
            window=window,
            v=v,
            glr_split_subsample=glr_split_subsample,
        )
        mtfa = estimate_mtfa(
            config,
            scenario.with_change_point(math.inf),
            trials,
            row_cap,
            seed,
            stream=2 * i,
            workers=workers,
            measure_time=measure_cost,
            pure_cost=pure_detector_cost,
        )
        delay = estimate_delay(
            config,
            scenario.with_change_point(nu_row),
            trials,
            row_cap,
            seed,
            stream=2 * i + 1,
            workers=workers,
            measure_time=measure_cost,
            pure_cost=pure_detector_cost,
        )
        cost = 0.0
        cost_total = 0.0
        if measure_cost:
            n = mtfa.trials + delay.trials
            cost = (mtfa.cost_per_step * mtfa.trials + delay.cost_per_step * delay.trials) / n
            cost_total = (
                mtfa.cost_per_step_total * mtfa.trials + delay.cost_per_step_total * delay.trials
            ) / n
        rows.append(
            SweepRow(
                procedure=kind.value,
                scenario=scenario.label,
                gamma=gamma,
                b=b,
                window=window,
                trials=trials,
                mtfa_mean=mtfa.mean,
                mtfa_stderr=mtfa.stderr,
                delay_mean=delay.mean,
                delay_stderr=delay.stderr,
                censored_fraction=max(mtfa.censored_fraction, delay.censored_fraction),
                cost_per_step_s=cost,
                cost_end_to_end_s=cost_total,
            )
        )
    return rows


def sweep_csv_lines(rows: list[SweepRow]) -> list[str]:
    lines = [",".join(SWEEP_CSV_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.procedure,
                    r.scenario,
                    repr(r.gamma),
                    repr(r.b),
                    str(r.window),
                    str(r.trials),
                    repr(r.mtfa_mean),
                    repr(r.mtfa_stderr),
                    repr(r.delay_mean),
                    repr(r.delay_stderr),
                    repr(r.censored_fraction),
                    repr(r.cost_per_step_s),
                ]
            )
        )
    return lines


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(sweep_csv_lines(rows)) + "\n")


def trace_trial(config: ProcedureConfig, scenario: Scenario, cap: int, seed: int):
    """Run one dedicated trial recording (step, outcome) pairs for debugging."""
    env = Environment(scenario, trial_rng(seed, _TRACE_STREAM, 0))
    proc = procedure_new(config, scenario)
    steps = []
    run_until_alarm(proc, env, cap, trace=lambda n, out: steps.append((n, out)))
    return steps


@dataclass
class MartingaleReport:
    policy: str
    scenario: str
    paths: int
    checkpoints: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "scenario": self.scenario,
            "paths": self.paths,
            "checkpoints": self.checkpoints,
        }


def run_martingale_oracle(
    scenario: Scenario,
    policy: str,
    paths: int,
    horizon: int,
    seed: int = 0,
    checkpoints: list[int] | None = None,
    window: int = 16,
) -> MartingaleReport:
    """Estimate E[S_n - n] under pre-change sampling; zero for any policy.

    S_n is the sum over actions of the exponentiated SR-like statistics; its
    drift-corrected value is a martingale regardless of how actions are
    chosen, which this oracle checks empirically for the round-robin and
    restarted-UCB policies.
    """
    if scenario.change_point != math.inf:
        raise ConfigError("martingale oracle needs change_point = inf")
    if policy not in ("roundrobin", "ucb"):
        raise ConfigError(f"policy must be 'roundrobin' or 'ucb', got {policy!r}")
    if checkpoints is None:
        checkpoints = [horizon]
    if any(c < 0 or c > horizon for c in checkpoints):
        raise ConfigError("checkpoints must lie in [0, horizon]")
    checkpoints = sorted(checkpoints)
    k = scenario.n_channels
    llrs = [make_llr(m) for m in scenario.channels]
    v = scenario.subgaussian_v() if policy == "ucb" else None
    totals = np.zeros((len(checkpoints), paths))
    for p in range(paths):
        rng = trial_rng(seed, _ORACLE_STREAM, p)
        env = Environment(scenario, rng)
        sr = SrStatistic(k)
        ucb = RestartedUcb(k, window, 4.0 * v) if policy == "ucb" else None
        ci = 0
        while ci < len(checkpoints) and checkpoints[ci] == 0:
            ci += 1
        for n in range(1, horizon + 1):
            a = ucb.select() if ucb is not None else roundrobin_select(n - 1, k)
            x = env.sample(a)
            r = llrs[a](x)
            sr.update(a, r)
            if ucb is not None:
                ucb.observe(a, r)
            while ci < len(checkpoints) and checkpoints[ci] == n:
                totals[ci, p] = sr.total
                ci += 1
    report = MartingaleReport(policy=policy, scenario=scenario.label, paths=paths)
    for i, n in enumerate(checkpoints):
        drift = totals[i] - n
        mean, stderr = _mean_stderr(drift)
        report.checkpoints.append(
            {
                "n": n,
                "mean_s": float(np.mean(totals[i])),
                "mean_minus_n": mean,
                "stderr": stderr,
                "zscore": mean / stderr if stderr > 0 else 0.0,
            }
        )
    return report
