"""Seeded random sampling and the distribution registry for simulator inputs.

All sampling goes through inverse-CDF transforms of ``random.Random`` uniforms
(Mersenne Twister), so streams are reproducible bit-for-bit from the seed on
any platform. Each named purpose gets an independent stream, which keeps
parameter sweeps comparable: changing one distribution does not perturb the
draws of another.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace

from .errors import ScenarioError

KINDS = ("constant", "uniform", "triangular", "normal_truncated", "empirical")


def derive_seed(root_seed: int, stream: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{stream}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RandomStreams:
    """One independent deterministic RNG per named purpose."""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        if name not in self._streams:
            self._streams[name] = random.Random(derive_seed(self.seed, name))
        return self._streams[name]


def _inv_norm_cdf(p: float) -> float:
    """Rational approximation of the standard normal quantile (Acklam).

    Pure arithmetic, no libm special functions, so it is deterministic
    across platforms. Absolute error below 1.2e-9 over (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = (-2.0 * _ln(p)) ** 0.5
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > p_high:
        q = (-2.0 * _ln(1.0 - p)) ** 0.5
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def _ln(x: float) -> float:
    import math
    return math.log(x)


@dataclass(frozen=True)
class Distribution:
    """A sampleable quantity with an explicit support clamp.

    ``params`` is kind-specific:
      constant          (value,)
      uniform           (low, high)
      triangular        (low, mode, high)
      normal_truncated  (mean, std)
      empirical         sorted sample tuple; inverse-CDF with linear interpolation
    """

    kind: str
    params: tuple[float, ...]
    support: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "empirical":
            if not self.params:
                raise ScenarioError("empirical distribution needs at least one sample")
            object.__setattr__(self, "params", tuple(sorted(self.params)))
        if self.kind == "normal_truncated" and self.support is None:
            raise ScenarioError("normal_truncated requires an explicit support")
        if self.support is not None and self.support[0] > self.support[1]:
            raise ScenarioError(f"empty support {self.support}")

    def _clamp(self, value: float) -> float:
        if self.support is None:
            return value
        lo, hi = self.support
        return min(max(value, lo), hi)

    def quantile(self, u: float) -> float:
        """Inverse CDF at u in [0, 1]. Not defined for truncated normals."""
        if not 0.0 <= u <= 1.0:
            raise ValueError("u must be in [0, 1]")
        if self.kind == "constant":
            return self._clamp(self.params[0])
        if self.kind == "uniform":
            lo, hi = self.params
            return self._clamp(lo + (hi - lo) * u)
        if self.kind == "triangular":
            lo, mode, hi = self.params
            if hi == lo:
                return self._clamp(lo)
            fc = (mode - lo) / (hi - lo)
            if u < fc:
                value = lo + ((hi - lo) * (mode - lo) * u) ** 0.5
            else:
                value = hi - ((hi - lo) * (hi - mode) * (1.0 - u)) ** 0.5
            return self._clamp(value)
        if self.kind == "empirical":
            samples = self.params
            if len(samples) == 1:
                return self._clamp(samples[0])
            pos = u * (len(samples) - 1)
            i = min(int(pos), len(samples) - 2)
            frac = pos - i
            return self._clamp(samples[i] + (samples[i + 1] - samples[i]) * frac)
        raise ScenarioError(f"quantile not defined for kind {self.kind!r}")

    def sample(self, rng: random.Random) -> float:
        if self.kind == "normal_truncated":
            mean, std = self.params
            lo, hi = self.support
            # Rejection keeps the shape; after 1000 misses clamp (degenerate support).
            for _ in range(1000):
                value = mean + std * _inv_norm_cdf(rng.random())
                if lo <= value <= hi:
                    return value
            return self._clamp(mean)
        return self.quantile(rng.random())

    def scale(self, factor: float) -> "Distribution":
        """Multiply every parameter and the support by a positive factor."""
        if factor <= 0:
            raise ScenarioError("scale factor must be > 0")
        support = None if self.support is None else (self.support[0] * factor,
                                                     self.support[1] * factor)
        return replace(self, params=tuple(p * factor for p in self.params), support=support)

    def mean(self) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            return (self.params[0] + self.params[1]) / 2.0
        if self.kind == "triangular":
            return sum(self.params) / 3.0
        if self.kind == "empirical":
            return sum(self.params) / len(self.params)
        return self.params[0]  # truncated normal: nominal mean

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "parameters": list(self.params)}
        if self.support is not None:
            doc["support"] = list(self.support)
        return doc


def constant(value: float) -> Distribution:
    return Distribution("constant", (value,))


def uniform(low: float, high: float) -> Distribution:
    return Distribution("uniform", (low, high), support=(low, high))


def triangular(low: float, mode: float, high: float) -> Distribution:
    return Distribution("triangular", (low, mode, high), support=(low, high))


def normal_truncated(mean: float, std: float, low: float, high: float) -> Distribution:
    return Distribution("normal_truncated", (mean, std), support=(low, high))


def fit_empirical(samples: list[float]) -> Distribution:
    """Empirical distribution whose CDF matches the sample ECDF at sample points."""
    if not samples:
        raise ScenarioError("cannot fit an empirical distribution to an empty sample set")
    ordered = tuple(sorted(samples))
    return Distribution("empirical", ordered, support=(ordered[0], ordered[-1]))


def sample_positive_from(dist: Distribution, rng: random.Random,
                         allow_zero: bool = True) -> tuple[float, int]:
    """Draw from ``dist``, resampling non-positive values; returns (value, resamples)."""
    resamples = 0
    value = dist.sample(rng)
    while (value < 0.0) or (not allow_zero and value == 0.0):
        resamples += 1
        if resamples > 1000:
            value = max(value, 0.0)
            break
        value = dist.sample(rng)
    return value, resamples


def distribution_from_dict(doc: dict) -> Distribution:
    try:
        kind = doc["kind"]
        params = tuple(float(p) for p in doc["parameters"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad distribution document {doc!r}: {exc}") from exc
    support = tuple(float(s) for s in doc["support"]) if "support" in doc else None
    return Distribution(kind, params, support=support)


@dataclass(frozen=True)
class LinearLiftRateLaw:
    """Optional lift rate conditioned on job size: rate = base + slope * lifts, clipped."""

    base_per_hr: float
    slope_per_lift: float
    min_per_hr: float
    max_per_hr: float

    def rate_per_hr(self, lifts: int) -> float:
        rate = self.base_per_hr + self.slope_per_lift * lifts
        return min(max(rate, self.min_per_hr), self.max_per_hr)


@dataclass
class DistributionRegistry:
    """Per-terminal servicing inputs plus system-wide arrival knobs.

    Lift rates are in lifts/hour; shunt components and delays in minutes.
    """

    lift_rate: dict[str, Distribution] = field(default_factory=dict)
    shunt_in: dict[str, Distribution] = field(default_factory=dict)
    shunt_out: dict[str, Distribution] = field(default_factory=dict)
    split_overhead_min: dict[str, float] = field(default_factory=dict)
    rate_law: dict[str, LinearLiftRateLaw] = field(default_factory=dict)
    container_variance: Distribution = field(default_factory=lambda: constant(0.0))
    placement_delay: Distribution = field(default_factory=lambda: constant(0.0))
    headway: Distribution = field(default_factory=lambda: constant(5.0))

    def validate_against(self, terminal_names: list[str]) -> None:
        for name in terminal_names:
            for table, label in ((self.lift_rate, "lift_rate"),
                                 (self.shunt_in, "shunt_in"),
                                 (self.shunt_out, "shunt_out")):
                if name not in table:
                    raise ScenarioError(f"registry missing {label} entry for terminal {name}")
