"""Multichannel bandit quickest change detection library and benchmark harness."""

from .channels import ChannelModel, DistributionSpec, Regime, subgaussian_bound
from .detectors import GlobalCusum, GlrArm, PerActionCusum, SrStatistic, bernoulli_kl
from .errors import ConfigError, DomainError
from .harness import (
    Scenario,
    SweepRow,
    estimate_delay,
    estimate_mtfa,
    run_martingale_oracle,
    sweep,
    write_sweep_csv,
)
from .policies import GreedyController, RestartedUcb, roundrobin_select
from .procedures import (
    Environment,
    ProcedureConfig,
    ProcedureKind,
    StepOutcome,
    TrialRecord,
    procedure_new,
    run_until_alarm,
)

__version__ = "0.1.0"
