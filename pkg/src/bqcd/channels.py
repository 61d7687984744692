"""Per-action observation models: sampling, log-likelihood ratios, KL divergences.

Four families are supported: gaussian, exponential (parametrized by its mean),
laplace, and beta.  A channel pairs a pre-change and a post-change distribution
of the same family; unaffected channels have identical pre and post.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import betaln, digamma

from .errors import ConfigError, DomainError

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"
LAPLACE = "laplace"
BETA = "beta"

FAMILIES = (GAUSSIAN, EXPONENTIAL, LAPLACE, BETA)

_PARAM_NAMES = {
    GAUSSIAN: ("mean", "stddev"),
    EXPONENTIAL: ("mean",),
    LAPLACE: ("loc", "scale"),
    BETA: ("alpha", "beta"),
}

# Fixed stream for the sub-Gaussian calibration draws so that the bound is a
# pure function of the channel list.
_CALIBRATION_SEED = 0x5CA1AB1E


class Regime(Enum):
    PRE = 0
    POST = 1


@dataclass(frozen=True)
class DistributionSpec:
    """One density: a family name plus its parameters."""

    family: str
    params: dict[str, float]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        expected = _PARAM_NAMES[self.family]
        if tuple(sorted(self.params)) != tuple(sorted(expected)):
            raise ConfigError(
                f"{self.family} needs params {expected}, got {tuple(self.params)}"
            )
        p = self.params
        if self.family == GAUSSIAN and p["stddev"] <= 0:
            raise ConfigError("gaussian stddev must be > 0")
        if self.family == EXPONENTIAL and p["mean"] <= 0:
            raise ConfigError("exponential mean must be > 0")
        if self.family == LAPLACE and p["scale"] <= 0:
            raise ConfigError("laplace scale must be > 0")
        if self.family == BETA and (p["alpha"] <= 0 or p["beta"] <= 0):
            raise ConfigError("beta alpha and beta must be > 0")

    def mean(self) -> float:
        p = self.params
        if self.family == GAUSSIAN:
            return p["mean"]
        if self.family == EXPONENTIAL:
            return p["mean"]
        if self.family == LAPLACE:
            return p["loc"]
        return p["alpha"] / (p["alpha"] + p["beta"])

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        try:
            return cls(family=d["family"], params={k: float(v) for k, v in d["params"].items()})
        except KeyError as e:
            raise ConfigError(f"distribution spec missing field {e}") from e


def gaussian(mean: float, stddev: float = 1.0) -> DistributionSpec:
    return DistributionSpec(GAUSSIAN, {"mean": mean, "stddev": stddev})


def exponential(mean: float) -> DistributionSpec:
    return DistributionSpec(EXPONENTIAL, {"mean": mean})


def laplace(loc: float, scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec(LAPLACE, {"loc": loc, "scale": scale})


def beta(alpha: float, beta_: float) -> DistributionSpec:
    return DistributionSpec(BETA, {"alpha": alpha, "beta": beta_})


def shifted(spec: DistributionSpec, shift: float) -> DistributionSpec:
    """Post-change spec obtained by adding `shift` to the mean of `spec`.

    Gaussian and laplace move the location parameter; exponential moves the
    mean; beta moves the mean while holding alpha + beta constant.
    """
    if shift == 0.0:
        return spec
    p = spec.params
    if spec.family == GAUSSIAN:
        return gaussian(p["mean"] + shift, p["stddev"])
    if spec.family == EXPONENTIAL:
        return exponential(p["mean"] + shift)
    if spec.family == LAPLACE:
        return laplace(p["loc"] + shift, p["scale"])
    total = p["alpha"] + p["beta"]
    new_mean = p["alpha"] / total + shift
    if not 0.0 < new_mean < 1.0:
        raise ConfigError(f"beta mean shift {shift} leaves (0,1): mean would be {new_mean}")
    return beta(new_mean * total, (1.0 - new_mean) * total)


@dataclass(frozen=True)
class ChannelModel:
    """Pre/post distribution pair for one action-channel."""

    pre: DistributionSpec
    post: DistributionSpec
    affected: bool = field(init=False)

    def __post_init__(self):
        if self.pre.family != self.post.family:
            raise ConfigError(
                f"pre family {self.pre.family!r} != post family {self.post.family!r}"
            )
        object.__setattr__(self, "affected", self.pre != self.post)

    def sample(self, regime: Regime, rng: np.random.Generator) -> float:
        """One i.i.d. draw from the pre- or post-change density."""
        spec = self.post if regime is Regime.POST else self.pre
        p = spec.params
        if spec.family == GAUSSIAN:
            return rng.normal(p["mean"], p["stddev"])
        if spec.family == EXPONENTIAL:
            return rng.exponential(p["mean"])
        if spec.family == LAPLACE:
            return rng.laplace(p["loc"], p["scale"])
        # Beta draws with very small alpha can underflow to exactly 0.0;
        # redraw to stay in the open interval (measure-zero event).
        while True:
            x = rng.beta(p["alpha"], p["beta"])
            if 0.0 < x < 1.0:
                return x

    def llr(self, x: float) -> float:
        """log(f_post(x) / f_pre(x)), in closed form per family."""
        fam = self.pre.family
        a, b = self.pre.params, self.post.params
        if fam == GAUSSIAN:
            s0, s1 = a["stddev"], b["stddev"]
            half0 = (x - a["mean"]) / s0
            half1 = (x - b["mean"]) / s1
            return math.log(s0 / s1) + 0.5 * (half0 * half0 - half1 * half1)
        if fam == EXPONENTIAL:
            if x < 0.0:
                raise DomainError(f"exponential observation {x} < 0")
            t0, t1 = a["mean"], b["mean"]
            return math.log(t0 / t1) + x * (1.0 / t0 - 1.0 / t1)
        if fam == LAPLACE:
            b0, b1 = a["scale"], b["scale"]
            return math.log(b0 / b1) + abs(x - a["loc"]) / b0 - abs(x - b["loc"]) / b1
        if not 0.0 < x < 1.0:
            raise DomainError(f"beta observation {x} outside (0, 1)")
        da = b["alpha"] - a["alpha"]
        db = b["beta"] - a["beta"]
        return (
            da * math.log(x)
            + db * math.log1p(-x)
            + betaln(a["alpha"], a["beta"])
            - betaln(b["alpha"], b["beta"])
        )

    def kl_divergence(self) -> float:
        """D(f_post || f_pre), analytic per family."""
        fam = self.pre.family
        a, b = self.pre.params, self.post.params
        if not self.affected:
            return 0.0
        if fam == GAUSSIAN:
            s0, s1 = a["stddev"], b["stddev"]
            d = b["mean"] - a["mean"]
            return math.log(s0 / s1) + (s1 * s1 + d * d) / (2.0 * s0 * s0) - 0.5
        if fam == EXPONENTIAL:
            t0, t1 = a["mean"], b["mean"]
            return math.log(t0 / t1) + t1 / t0 - 1.0
        if fam == LAPLACE:
            b0, b1 = a["scale"], b["scale"]
            d = abs(b["loc"] - a["loc"])
            return math.log(b0 / b1) + (b1 * math.exp(-d / b1) + d) / b0 - 1.0
        a0, b0 = a["alpha"], a["beta"]
        a1, b1 = b["alpha"], b["beta"]
        return (
            betaln(a0, b0)
            - betaln(a1, b1)
            + (a1 - a0) * digamma(a1)
            + (b1 - b0) * digamma(b1)
            + (a0 - a1 + b0 - b1) * digamma(a1 + b1)
        )


def unaffected(spec: DistributionSpec) -> ChannelModel:
    return ChannelModel(pre=spec, post=spec)


def make_sampler(spec: DistributionSpec, rng: np.random.Generator):
    """Zero-argument draw closure bound to `rng`; same stream as ChannelModel.sample."""
    p = spec.params
    if spec.family == GAUSSIAN:
        m, s = p["mean"], p["stddev"]
        return lambda: rng.normal(m, s)
    if spec.family == EXPONENTIAL:
        m = p["mean"]
        return lambda: rng.exponential(m)
    if spec.family == LAPLACE:
        loc, scale = p["loc"], p["scale"]
        return lambda: rng.laplace(loc, scale)
    a, b = p["alpha"], p["beta"]

    def draw_beta():
        while True:
            x = rng.beta(a, b)
            if 0.0 < x < 1.0:
                return x

    return draw_beta


def make_llr(model: ChannelModel):
    """Specialized LLR closure, bit-identical to model.llr on in-support inputs.

    Skips support validation; callers feed sampled observations only.
    """
    if not model.affected:
        return lambda x: 0.0
    fam = model.pre.family
    a, b = model.pre.params, model.post.params
    if fam == GAUSSIAN:
        m0, s0 = a["mean"], a["stddev"]
        m1, s1 = b["mean"], b["stddev"]
        log_ratio = math.log(s0 / s1)

        def llr_gaussian(x):
            half0 = (x - m0) / s0
            half1 = (x - m1) / s1
            return log_ratio + 0.5 * (half0 * half0 - half1 * half1)

        return llr_gaussian
    if fam == EXPONENTIAL:
        t0, t1 = a["mean"], b["mean"]
        c0 = math.log(t0 / t1)
        c1 = 1.0 / t0 - 1.0 / t1
        return lambda x: c0 + x * c1
    if fam == LAPLACE:
        l0, b0 = a["loc"], a["scale"]
        l1, b1 = b["loc"], b["scale"]
        c = math.log(b0 / b1)
        return lambda x: c + abs(x - l0) / b0 - abs(x - l1) / b1
    da = b["alpha"] - a["alpha"]
    db = b["beta"] - a["beta"]
    lb0 = betaln(a["alpha"], a["beta"])
    lb1 = betaln(b["alpha"], b["beta"])
    return lambda x: da * math.log(x) + db * math.log1p(-x) + lb0 - lb1


def _is_mean_shift_gaussian(model: ChannelModel) -> bool:
    return (
        model.pre.family == GAUSSIAN
        and model.pre.params["stddev"] == model.post.params["stddev"]
    )


def subgaussian_bound(
    channels: list[ChannelModel],
    calibration_draws: int = 100_000,
    safety: float = 2.0,
) -> float:
    """Variance proxy v for the post-change LLR, valid across all channels.

    Mean-shift gaussian channels admit the exact value (shift/stddev)^2; other
    families use the empirical LLR variance under the post-change law from
    calibration draws, inflated by `safety`.  Deterministic: calibration uses
    a fixed internal stream.
    """
    if not channels:
        raise ConfigError("subgaussian bound needs a nonempty channel list")
    affected = [m for m in channels if m.affected]
    if not affected:
        raise ConfigError(
            "sub-Gaussian bound undefined: affected set is empty (every channel has pre == post)"
        )
    rng = np.random.default_rng(_CALIBRATION_SEED)
    v = 0.0
    for model in affected:
        if _is_mean_shift_gaussian(model):
            delta = model.post.params["mean"] - model.pre.params["mean"]
            sigma = model.pre.params["stddev"]
            v = max(v, (delta / sigma) ** 2)
        else:
            draws = [model.sample(Regime.POST, rng) for _ in range(calibration_draws)]
            llrs = np.array([model.llr(x) for x in draws])
            v = max(v, safety * float(np.var(llrs, ddof=1)))
    return v
