"""Command-line front end: presets, sweep orchestration, and file output.

Scenario presets follow the ten-channel benchmark design: a sparse shift
vector touches channels 3, 6 and 9 (1-indexed), two mildly and one strongly;
channels are stored 0-indexed internally.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness
from .channels import ChannelModel, DistributionSpec, beta, exponential, gaussian, laplace, shifted
from .errors import ConfigError
from .harness import Scenario, default_nu, run_martingale_oracle, sweep, ucb_window
from .procedures import ProcedureConfig, ProcedureKind, parse_kind

PRESET_NAMES = ("gaussian10", "exponential10", "laplace10", "beta10")

# sparse heterogeneous shift: two mild channels and one strong one
_SHIFTS = (0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0, 0.0)
_BETA_SHIFTS = {0.1: 0.04, 1.0: 0.19}


def preset(name: str) -> Scenario:
    """Ten-channel benchmark scenario for one observation family."""
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available presets: {', '.join(PRESET_NAMES)}")
    if name == "gaussian10":
        base = gaussian(0.0, 1.0)
        shifts = _SHIFTS
    elif name == "exponential10":
        base = exponential(1.0)
        shifts = _SHIFTS
    elif name == "laplace10":
        base = laplace(0.0, 1.0)
        shifts = _SHIFTS
    else:
        base = beta(0.02, 1.98)
        shifts = tuple(_BETA_SHIFTS.get(s, s) for s in _SHIFTS)
    channels = tuple(ChannelModel(base, shifted(base, s)) for s in shifts)
    return Scenario(label=name, channels=channels, change_point=1)


@dataclass
class RunConfig:
    scenario: str = "gaussian10"
    procedures: list[str] = field(default_factory=lambda: ["UcbCusum"])
    gammas: list[float] = field(default_factory=list)
    trials: int = 5000
    cap: int | None = None
    seed: int = 0
    output_dir: str = "out"
    nu: int | None = None
    nu_sweep: bool = False
    pure_detector_cost: bool = False
    trace: bool = False
    measure_cost: bool = True


def validate_run_config(cfg: RunConfig) -> None:
    if not cfg.procedures:
        raise ConfigError("procedures: need at least one procedure")
    for name in cfg.procedures:
        parse_kind(name)
    if not cfg.gammas:
        raise ConfigError("gammas: need at least one gamma")
    for g in cfg.gammas:
        if not g > 1.0:
            raise ConfigError(f"gamma must exceed 1 (got {g})")
    if cfg.trials < 1:
        raise ConfigError(f"trials: must be >= 1, got {cfg.trials}")
    if cfg.cap is not None and cfg.cap < 1:
        raise ConfigError(f"cap: must be >= 1, got {cfg.cap}")
    if cfg.nu is not None and cfg.nu < 1:
        raise ConfigError(f"nu: must be >= 1, got {cfg.nu}")
    if not cfg.scenario:
        raise ConfigError("scenario: missing")
    resolve_scenario(cfg.scenario)


def resolve_scenario(name_or_path: str) -> Scenario:
    if name_or_path in PRESET_NAMES:
        return preset(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(
            f"scenario {name_or_path!r} is neither a preset ({', '.join(PRESET_NAMES)}) "
            "nor an existing file"
        )
    return load_scenario_file(path)


def load_scenario_file(path: Path) -> Scenario:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    sc = data.get("scenario")
    if sc is None:
        raise ConfigError(f"{path}: missing [scenario] table")
    try:
        channels = tuple(
            ChannelModel(
                pre=DistributionSpec.from_dict(ch["pre"]),
                post=DistributionSpec.from_dict(ch["post"]),
            )
            for ch in sc["channels"]
        )
    except KeyError as e:
        raise ConfigError(f"{path}: channel entry missing field {e}") from e
    return Scenario(
        label=sc.get("label", path.stem),
        channels=channels,
        change_point=sc.get("change_point", 1),
        v=sc.get("v"),
    )


_CONFIG_FIELDS = (
    "scenario",
    "procedures",
    "gammas",
    "trials",
    "cap",
    "seed",
    "output_dir",
    "nu",
    "nu_sweep",
    "pure_detector_cost",
    "trace",
    "measure_cost",
)


def load_run_config(path: Path) -> RunConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - set(_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
    cfg = RunConfig()
    for name in _CONFIG_FIELDS:
        if name in data:
            setattr(cfg, name, data[name])
    # TOML has no null: 0 means "auto" for cap and nu
    if cfg.cap == 0:
        cfg.cap = None
    if cfg.nu == 0:
        cfg.nu = None
    cfg.gammas = [float(g) for g in cfg.gammas]
    return cfg


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def dump_run_config(cfg: RunConfig, path: Path) -> None:
    lines = []
    for name in _CONFIG_FIELDS:
        value = getattr(cfg, name)
        if value is None:
            value = 0  # auto
        lines.append(f"{name} = {_toml_value(value)}")
    path.write_text("\n".join(lines) + "\n")


def _merge_cli_over_file(args, cfg: RunConfig) -> RunConfig:
    if args.scenario is not None:
        cfg.scenario = args.scenario
    if args.procedures is not None:
        cfg.procedures = [p.strip() for p in args.procedures.split(",") if p.strip()]
    if args.gammas is not None:
        try:
            cfg.gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
        except ValueError as e:
            raise ConfigError(f"gammas: {e}") from e
    if args.trials is not None:
        cfg.trials = args.trials
    if args.cap is not None:
        cfg.cap = args.cap
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.nu is not None:
        cfg.nu = args.nu
    if args.nu_sweep:
        cfg.nu_sweep = True
    if args.pure_detector_cost:
        cfg.pure_detector_cost = True
    if args.trace:
        cfg.trace = True
    if args.no_cost_timing:
        cfg.measure_cost = False
    return cfg


def _summary_line(row) -> str:
    line = (
        f"{row.procedure} {row.scenario} gamma={row.gamma:g} b={row.b:.4g} W={row.window} "
        f"mtfa={row.mtfa_mean:.4g}+-{row.mtfa_stderr:.2g} "
        f"delay={row.delay_mean:.4g}+-{row.delay_stderr:.2g} "
        f"cost={row.cost_per_step_s:.3g}s"
    )
    if row.cost_end_to_end_s != row.cost_per_step_s:
        line += f" (end-to-end {row.cost_end_to_end_s:.3g}s)"
    if row.censored_fraction > harness.CENSOR_FLAG_LEVEL:
        line += f" [CENSORED {row.censored_fraction:.1%}]"
    return line


def _cmd_run(args) -> int:
    cfg = load_run_config(Path(args.config)) if args.config else RunConfig()
    cfg = _merge_cli_over_file(args, cfg)
    validate_run_config(cfg)
    scenario = resolve_scenario(cfg.scenario)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.dump_config:
        dump_run_config(cfg, out_dir / "config.toml")
    all_rows = []
    for name in cfg.procedures:
        kind = parse_kind(name)
        rows = sweep(
            kind,
            scenario,
            cfg.gammas,
            cfg.trials,
            cfg.seed,
            cap=cfg.cap,
            nu=cfg.nu,
            measure_cost=cfg.measure_cost,
            pure_detector_cost=cfg.pure_detector_cost,
        )
        all_rows.extend(rows)
        for row in rows:
            print(_summary_line(row))
    harness.write_sweep_csv(all_rows, out_dir / "sweep.csv")
    if cfg.nu_sweep:
        _write_nu_sweep(cfg, scenario, out_dir)
    if cfg.trace:
        _write_traces(cfg, scenario, out_dir)
    return 0


def _row_config(kind: ProcedureKind, scenario: Scenario, gamma: float) -> ProcedureConfig:
    b = math.log(gamma)
    return ProcedureConfig(
        kind=kind,
        threshold=b,
        window=ucb_window(b),
        v=scenario.subgaussian_v() if kind.needs_v else None,
    )


def _write_nu_sweep(cfg: RunConfig, scenario: Scenario, out_dir: Path) -> None:
    lines = ["procedure,scenario,gamma,b,W,nu,trials,delay_mean,delay_stderr,censored_fraction"]
    for name in cfg.procedures:
        kind = parse_kind(name)
        for gamma in sorted(cfg.gammas):
            config = _row_config(kind, scenario, gamma)
            w = config.window
            base = cfg.nu if cfg.nu is not None else default_nu(kind, scenario.n_channels)
            nus = sorted({base, max(1, w // 2), w, 2 * w, 5 * w})
            cap = cfg.cap if cfg.cap is not None else math.ceil(50.0 * gamma)
            for i, nu in enumerate(nus):
                est = harness.estimate_delay(
                    config,
                    scenario.with_change_point(nu),
                    cfg.trials,
                    cap,
                    cfg.seed,
                    stream=100 + i,
                    measure_time=False,
                )
                lines.append(
                    f"{kind.value},{scenario.label},{gamma!r},{config.threshold!r},{w},{nu},"
                    f"{cfg.trials},{est.mean!r},{est.stderr!r},{est.censored_fraction!r}"
                )
    (out_dir / "nu_sweep.csv").write_text("\n".join(lines) + "\n")


def _write_traces(cfg: RunConfig, scenario: Scenario, out_dir: Path) -> None:
    for name in cfg.procedures:
        kind = parse_kind(name)
        for gamma in sorted(cfg.gammas):
            config = _row_config(kind, scenario, gamma)
            nu = cfg.nu if cfg.nu is not None else default_nu(kind, scenario.n_channels)
            cap = cfg.cap if cfg.cap is not None else math.ceil(50.0 * gamma)
            steps = harness.trace_trial(config, scenario.with_change_point(nu), cap, cfg.seed)
            lines = ["step,action,observation,statistic"]
            for n, out in steps:
                lines.append(f"{n},{out.action},{out.observation!r},{out.statistic!r}")
            (out_dir / f"trace_{kind.value}_gamma{gamma:g}.csv").write_text(
                "\n".join(lines) + "\n"
            )


def _cmd_oracle(args) -> int:
    scenario = resolve_scenario(args.scenario).with_change_point(math.inf)
    policies = ["roundrobin", "ucb"] if args.policy == "both" else [args.policy]
    reports = []
    for policy in policies:
        report = run_martingale_oracle(
            scenario, policy, paths=args.paths, horizon=args.horizon, seed=args.seed
        )
        reports.append(report.to_dict())
        for ck in report.checkpoints:
            print(
                f"{policy} n={ck['n']}: mean(S_n)-n={ck['mean_minus_n']:+.4f} "
                f"stderr={ck['stderr']:.4f} z={ck['zscore']:+.2f}"
            )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "oracle.json", "w") as fh:
        json.dump({"reports": reports}, fh, indent=2)
    return 0


def _cmd_presets(_args) -> int:
    for name in PRESET_NAMES:
        print(name)
    return 0


def _cmd_validate(args) -> int:
    cfg = load_run_config(Path(args.config))
    validate_run_config(cfg)
    print(f"{args.config}: OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqcd",
        description="Multichannel bandit quickest-change-detection benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a threshold sweep and write sweep.csv")
    run.add_argument("--config", help="TOML run config; CLI flags override file values")
    run.add_argument("--scenario", help="preset name or scenario TOML path")
    run.add_argument("--procedures", help="comma-separated procedure names")
    run.add_argument("--gammas", help="comma-separated target MTFA levels (each > 1)")
    run.add_argument("--trials", type=int)
    run.add_argument("--cap", type=int, help="censoring cap in steps (default 50*gamma)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--nu", type=int, help="change point for delay runs (1-indexed)")
    run.add_argument("--nu-sweep", action="store_true", help="also sweep nu over {1, W/2, W, 2W, 5W}")
    run.add_argument("--trace", action="store_true", help="write per-step trace CSVs")
    run.add_argument(
        "--pure-detector-cost",
        action="store_true",
        help="exclude environment sampling time from the cost column",
    )
    run.add_argument(
        "--no-cost-timing",
        action="store_true",
        help="skip wall-clock measurement; cost column becomes 0.0 (deterministic output)",
    )
    run.add_argument("--dump-config", action="store_true", help="write effective config.toml")
    run.set_defaults(func=_cmd_run)

    oracle = sub.add_parser("oracle", help="martingale oracle report (pre-change drift of S_n)")
    oracle.add_argument("--scenario", required=True)
    oracle.add_argument("--paths", type=int, required=True)
    oracle.add_argument("--horizon", type=int, required=True)
    oracle.add_argument("--policy", choices=["roundrobin", "ucb", "both"], default="both")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--out", default=".")
    oracle.set_defaults(func=_cmd_oracle)

    presets = sub.add_parser("presets", help="list scenario presets")
    presets.set_defaults(func=_cmd_presets)

    validate = sub.add_parser("validate", help="validate a TOML run config")
    validate.add_argument("config")
    validate.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
