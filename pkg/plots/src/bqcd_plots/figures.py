"""Figure builders over sweep.csv: trade-off curves and cost bars.

The data layer is pure: `extract_tradeoff` and `extract_cost_bars` map a CSV
to plain arrays, and `render` draws exactly those arrays.  Tests assert on the
extracted data, never on pixels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

SWEEP_COLUMNS = (
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

KINDS = ("delay_vs_logmtfa", "cost_bars")


class SchemaError(ValueError):
    """The CSV does not conform to the sweep schema."""


class EmptyFilterError(ValueError):
    """No rows survive the scenario filter."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    scenario: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


@dataclass
class Curve:
    procedure: str
    x: list[float]
    y: list[float]
    yerr: list[float]


def read_rows(csv_path, scenario: str | None = None) -> list[dict]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SWEEP_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing column {missing[0]!r} in {csv_path}")
        rows = list(reader)
    if scenario is not None:
        rows = [r for r in rows if r["scenario"] == scenario]
    if not rows:
        raise EmptyFilterError("no rows after filter")
    return rows


def extract_tradeoff(rows: list[dict]) -> list[Curve]:
    """One curve per procedure, sorted by name; x = ln(mtfa), ascending gamma."""
    by_procedure: dict[str, list[dict]] = {}
    for row in rows:
        by_procedure.setdefault(row["procedure"], []).append(row)
    curves = []
    for procedure in sorted(by_procedure):
        points = sorted(by_procedure[procedure], key=lambda r: float(r["gamma"]))
        curves.append(
            Curve(
                procedure=procedure,
                x=[math.log(float(r["mtfa_mean"])) for r in points],
                y=[float(r["delay_mean"]) for r in points],
                yerr=[float(r["delay_stderr"]) for r in points],
            )
        )
    return curves


def extract_cost_bars(rows: list[dict]) -> tuple[list[str], list[float]]:
    """Mean per-step cost per procedure, procedures sorted by name."""
    sums: dict[str, list[float]] = {}
    for row in rows:
        sums.setdefault(row["procedure"], []).append(float(row["cost_per_step_s"]))
    procedures = sorted(sums)
    return procedures, [sum(sums[p]) / len(sums[p]) for p in procedures]


def render(spec: FigureSpec):
    """Write the figure and return the plotted data (curves or bar arrays)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_rows(spec.csv_path, spec.scenario)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        if spec.kind == "delay_vs_logmtfa":
            data = extract_tradeoff(rows)
            for curve in data:
                yerr = curve.yerr if any(e > 0 for e in curve.yerr) else None
                ax.errorbar(
                    curve.x, curve.y, yerr=yerr, marker="o", capsize=3, label=curve.procedure
                )
            ax.set_xlabel("log(MTFA)")
            ax.set_ylabel("expected detection delay (steps)")
        else:
            procedures, costs = extract_cost_bars(rows)
            data = (procedures, costs)
            ax.bar(procedures, costs)
            ax.set_yscale("log")
            ax.set_ylabel("cost per step (s)")
            ax.tick_params(axis="x", rotation=30)
        title = spec.scenario or "all scenarios"
        ax.set_title(title)
        if spec.kind == "delay_vs_logmtfa":
            ax.legend()
        fig.tight_layout()
        Path(spec.out_path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return data
