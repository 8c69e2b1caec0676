"""Marker maps: identities, body-frame positions and blink frequencies."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError

# measured LED frequencies (Hz) and duty cycles of the reference marker board
TAB3_FREQUENCIES = (1730.0, 1980.0, 2290.0, 2610.0, 2860.0)
TAB3_DUTIES = (0.0066, 0.0075, 0.0087, 0.0099, 0.0109)


@dataclass(frozen=True)
class Marker:
    id: int
    xyz: tuple
    freq_hz: float
    duty: float

    @property
    def period_us(self) -> float:
        return 1e6 / self.freq_hz

    @property
    def on_time_us(self) -> float:
        return self.duty * 1e6 / self.freq_hz


@dataclass(frozen=True)
class MarkerConfig:
    markers: tuple

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(self.markers))

    def check(self, min_markers=4) -> None:
        """Raise ConfigError unless the map supports unique PnP and anti-aliased IDs."""
        if len(self.markers) < min_markers:
            raise ConfigError(f"need at least {min_markers} markers, got {len(self.markers)}")
        ids = [m.id for m in self.markers]
        if len(set(ids)) != len(ids):
            raise ConfigError("marker ids must be unique")
        f = np.array([m.freq_hz for m in self.markers])
        if np.any(f <= 0):
            raise ConfigError("frequencies must be positive")
        if len(np.unique(f)) != len(f):
            raise ConfigError("marker frequencies must be distinct")
        if f.max() / f.min() >= 2.0:
            raise ConfigError("max/min frequency ratio must stay below 2 to avoid aliasing")
        for m in self.markers:
            if not 0 < m.duty < 1:
                raise ConfigError(f"marker {m.id}: duty cycle must lie in (0, 1)")

    @property
    def ids(self) -> np.ndarray:
        return np.array([m.id for m in self.markers])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.freq_hz for m in self.markers], dtype=float)

    @property
    def points(self) -> np.ndarray:
        return np.array([m.xyz for m in self.markers], dtype=float)

    def by_id(self, marker_id) -> Marker:
        for m in self.markers:
            if m.id == marker_id:
                return m
        raise KeyError(marker_id)

    def to_list(self) -> list[dict]:
        return [
            {"id": m.id, "xyz_m": list(map(float, m.xyz)), "freq_hz": m.freq_hz, "duty": m.duty}
            for m in self.markers
        ]

    @classmethod
    def from_list(cls, items) -> "MarkerConfig":
        try:
            return cls(tuple(
                Marker(int(d["id"]), tuple(float(v) for v in d["xyz_m"]), float(d["freq_hz"]), float(d["duty"]))
                for d in items
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad marker entry: {exc}") from None


def default_markers() -> MarkerConfig:
    """Five-LED quadrotor layout blinking at the reference board frequencies."""
    xyz = [
        (0.070, 0.070, 0.0),
        (-0.070, 0.070, 0.0),
        (-0.070, -0.070, 0.0),
        (0.070, -0.070, 0.0),
        (0.0, 0.090, -0.025),
    ]
    return MarkerConfig(tuple(
        Marker(i, p, f, d) for i, (p, f, d) in enumerate(zip(xyz, TAB3_FREQUENCIES, TAB3_DUTIES))
    ))


def load_markers(path) -> MarkerConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("markers", [])
    return MarkerConfig.from_list(data)


def save_markers(cfg: MarkerConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_list(), indent=2))
