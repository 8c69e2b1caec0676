"""Camera bias vectors and their box bounds."""
from __future__ import annotations

import json
from dataclasses import astuple, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError

BIAS_NAMES = ("diff_off", "diff_on", "bias_fo", "bias_hpf", "bias_pr", "bias_refr")


@dataclass(frozen=True)
class BiasVector:
    diff_off: float = 225.0
    diff_on: float = 375.0
    bias_fo: float = 1725.0
    bias_hpf: float = 1500.0
    bias_pr: float = 1500.0
    bias_refr: float = 1500.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not np.isfinite(v):
                raise ConfigError(f"{f.name} must be finite")
            object.__setattr__(self, f.name, v)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "BiasVector":
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (len(BIAS_NAMES),):
            raise ConfigError(f"expected {len(BIAS_NAMES)} bias values, got {a.shape}")
        return cls(*a)

    def to_dict(self) -> dict:
        return dict(zip(BIAS_NAMES, astuple(self)))

    @classmethod
    def from_dict(cls, d) -> "BiasVector":
        unknown = set(d) - set(BIAS_NAMES)
        if unknown:
            raise ConfigError(f"unknown bias names: {sorted(unknown)}")
        return cls(**d)


# Gen3 reference settings: factory defaults and the published tuned values
DEFAULT_BIAS = BiasVector()
TUNED_REFERENCE_BIAS = BiasVector(176, 529, 1665, 1724, 1768, 1538)


@dataclass(frozen=True)
class BiasBounds:
    lower: np.ndarray
    upper: np.ndarray
    default: BiasVector

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (6,) or hi.shape != (6,):
            raise ConfigError("bounds need one (min, max) pair per bias")
        if not np.all(np.isfinite(lo) & np.isfinite(hi)) or np.any(hi <= lo):
            raise ConfigError("every bias needs finite bounds with min < max")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not self.contains(self.default):
            raise ConfigError("default bias lies outside the bounds")

    def contains(self, bias: BiasVector) -> bool:
        a = bias.as_array()
        return bool(np.all((a >= self.lower) & (a <= self.upper)))

    def clip(self, a) -> np.ndarray:
        return np.clip(a, self.lower, self.upper)

    def to_dict(self) -> dict:
        d = self.default.to_dict()
        return {
            n: {"min": float(lo), "max": float(hi), "default": d[n]}
            for n, lo, hi in zip(BIAS_NAMES, self.lower, self.upper)
        }

    @classmethod
    def from_dict(cls, d) -> "BiasBounds":
        try:
            missing = [n for n in BIAS_NAMES if n not in d]
            if missing:
                raise ConfigError(f"bounds file misses {missing}")
            lo = [float(d[n]["min"]) for n in BIAS_NAMES]
            hi = [float(d[n]["max"]) for n in BIAS_NAMES]
            default = BiasVector(*[float(d[n].get("default", 0.5 * (d[n]["min"] + d[n]["max"]))) for n in BIAS_NAMES])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed bounds: {exc}") from None
        return cls(np.array(lo), np.array(hi), default)


def load_bounds(path=None) -> BiasBounds:
    """Read a bounds JSON file; without a path the packaged Gen3 bounds are used."""
    if path is None:
        text = resources.files("evpipe.data").joinpath("gen3_bounds.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        return BiasBounds.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_bounds(bounds: BiasBounds, path) -> None:
    Path(path).write_text(json.dumps(bounds.to_dict(), indent=2))
