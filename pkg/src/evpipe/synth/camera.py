"""Parametric event-camera behavior driven by a bias vector.

The mapping from biases to behavior is a made-up but fixed model. It only has
to be monotone, continuous and rich enough that the tuning objective has
regions of missing events, regions of too many double events and a feasible
region in between. All quantities are in log-intensity units and microseconds.

=============  ==========================================================
threshold_on   ``0.5 * 2**((diff_on - 375) / 100)``
threshold_off  ``0.5 * 2**((diff_off - 225) / 100)``
tau_us         ``2 * 2**(-(bias_fo - 1725) / 150) * 2**(-(bias_pr - 1500) / 300)``
refractory_us  ``4.5 * 2**((bias_refr - 1500) / 150)``
p_double       ``0.1 * exp((4.5 - refractory_us) / 2) * 2**(-(bias_hpf - 1500) / 300)``,
               capped at 0.95
noise_rate_hz  ``100 * 2**(-(bias_hpf - 1500) / 150)
               * 2**((bias_fo - 1725) / 300 + (bias_pr - 1500) / 300)
               * (0.5 / threshold_on)**2 * (0.5 / threshold_off)**2``
=============  ==========================================================

Higher ``diff_*`` raise the thresholds (fewer events), higher ``bias_fo`` /
``bias_pr`` shorten the photoreceptor low-pass, a lower ``bias_refr`` shortens
the refractory period and makes double events more likely, and ``bias_hpf``
trades spurious noise against double events. Low thresholds and a fast
front end also raise the spurious event rate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from ..autotune.bias import BiasVector
from ..errors import ConfigError

P_DOUBLE_CAP = 0.95


@dataclass(frozen=True)
class Behavior:
    threshold_on: float
    threshold_off: float
    tau_us: float
    refractory_us: float
    p_double: float
    noise_rate_hz: float
    threshold_sigma: float = 0.08  # relative per-event threshold mismatch

    def __post_init__(self):
        vals = asdict(self)
        if not all(math.isfinite(v) for v in vals.values()):
            raise ConfigError("behavior parameters must be finite")
        if self.threshold_on <= 0 or self.threshold_off <= 0:
            raise ConfigError("contrast thresholds must be positive")
        if self.tau_us < 0 or self.refractory_us < 0 or self.noise_rate_hz < 0:
            raise ConfigError("time constants and noise rate must be non-negative")
        if not 0 <= self.p_double < 1:
            raise ConfigError("double-event probability must lie in [0, 1)")
        if not 0 <= self.threshold_sigma < 0.3:
            raise ConfigError("threshold_sigma must lie in [0, 0.3)")

    @classmethod
    def ideal(cls, threshold=0.5) -> "Behavior":
        """One event per threshold transition, no noise, no doubles, no dead time."""
        return cls(threshold, threshold, 0.0, 0.0, 0.0, 0.0, 0.0)

    def with_(self, **kw) -> "Behavior":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "Behavior":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def biased_behavior(bias: BiasVector) -> Behavior:
    """Derived behavior for a bias vector (see the module docstring)."""
    th_on = 0.5 * 2.0 ** ((bias.diff_on - 375.0) / 100.0)
    th_off = 0.5 * 2.0 ** ((bias.diff_off - 225.0) / 100.0)
    refr = 4.5 * 2.0 ** ((bias.bias_refr - 1500.0) / 150.0)
    p_double = 0.1 * math.exp((4.5 - refr) / 2.0) * 2.0 ** (-(bias.bias_hpf - 1500.0) / 300.0)
    noise = (
        100.0 * 2.0 ** (-(bias.bias_hpf - 1500.0) / 150.0)
        * 2.0 ** ((bias.bias_fo - 1725.0) / 300.0 + (bias.bias_pr - 1500.0) / 300.0)
        * (0.5 / th_on) ** 2 * (0.5 / th_off) ** 2
    )
    return Behavior(
        threshold_on=th_on,
        threshold_off=th_off,
        tau_us=2.0 * 2.0 ** (-(bias.bias_fo - 1725.0) / 150.0) * 2.0 ** (-(bias.bias_pr - 1500.0) / 300.0),
        refractory_us=refr,
        p_double=min(p_double, P_DOUBLE_CAP),
        noise_rate_hz=noise,
    )


@dataclass(frozen=True)
class SimCamera:
    """Sensor geometry plus behavior.

    Built either from a bias vector or from an explicit behavior; the explicit
    behavior wins when both are given.
    """

    width: int
    height: int
    bias: BiasVector = BiasVector()
    behavior_override: Behavior | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width > 65535 or self.height > 65535:
            raise ConfigError("sensor size must lie in 1..65535")

    @property
    def behavior(self) -> Behavior:
        if self.behavior_override is not None:
            return self.behavior_override
        return biased_behavior(self.bias)

    @classmethod
    def ideal(cls, width, height, threshold=0.5) -> "SimCamera":
        return cls(width, height, behavior_override=Behavior.ideal(threshold))

    @classmethod
    def with_behavior(cls, width, height, behavior: Behavior) -> "SimCamera":
        return cls(width, height, behavior_override=behavior)

    def to_dict(self) -> dict:
        d = {"width": self.width, "height": self.height, "bias": self.bias.to_dict()}
        if self.behavior_override is not None:
            d["behavior"] = self.behavior_override.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "SimCamera":
        try:
            bias = BiasVector.from_dict(d.get("bias", {}))
            beh = d.get("behavior")
            if isinstance(beh, str):
                if beh != "ideal":
                    raise ConfigError(f"unknown behavior preset {beh!r}")
                beh = Behavior.ideal()
            elif beh is not None:
                beh = Behavior.from_dict(beh)
            return cls(int(d["width"]), int(d["height"]), bias, beh)
        except KeyError as exc:
            raise ConfigError(f"camera spec misses {exc}") from None
