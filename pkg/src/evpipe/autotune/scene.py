"""Static blinking-LED scenes used as the tuning target."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..mocap.markers import TAB3_DUTIES, TAB3_FREQUENCIES


def default_duty(freq_hz) -> float:
    """Reference-board duty cycle for a known frequency, 1% otherwise."""
    for f, d in zip(TAB3_FREQUENCIES, TAB3_DUTIES):
        if abs(f - freq_hz) < 1e-9:
            return d
    return 0.01


@dataclass(frozen=True)
class TuningScene:
    """K statically placed LEDs at pixel centers ``(x, y)``.

    ``duration`` is in seconds. ``duties`` defaults per frequency via
    :func:`default_duty`.
    """

    centers: tuple
    frequencies: tuple
    duration: float = 0.1
    duties: tuple | None = None

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        f = np.asarray(self.frequencies, dtype=float).ravel()
        object.__setattr__(self, "centers", tuple(map(tuple, c.tolist())))
        object.__setattr__(self, "frequencies", tuple(f.tolist()))
        if self.duties is None:
            object.__setattr__(self, "duties", tuple(default_duty(x) for x in f))
        else:
            object.__setattr__(self, "duties", tuple(float(d) for d in self.duties))
        if len(c) < 1:
            raise ConfigError("a tuning scene needs at least one marker")
        if len(f) != len(c) or len(self.duties) != len(c):
            raise ConfigError("centers, frequencies and duties must have equal length")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if np.any(f <= 0):
            raise ConfigError("frequencies must be positive")
        if not all(0 < d < 1 for d in self.duties):
            raise ConfigError("duty cycles must lie in (0, 1)")

    @property
    def K(self) -> int:
        return len(self.centers)

    def patch_pixels(self, k) -> tuple[np.ndarray, np.ndarray]:
        """Integer pixel coordinates of the 3x3 patch around marker ``k``."""
        cx, cy = (int(round(v)) for v in self.centers[k])
        dy, dx = np.mgrid[-1:2, -1:2]
        return (cx + dx).ravel(), (cy + dy).ravel()

    def check(self, width, height) -> None:
        """Raise ConfigError unless every 3x3 evaluation patch lies inside the image."""
        for k in range(self.K):
            xs, ys = self.patch_pixels(k)
            if xs.min() < 0 or ys.min() < 0 or xs.max() >= width or ys.max() >= height:
                raise ConfigError(f"marker {k} patch at {self.centers[k]} leaves the {width}x{height} image")

    def to_dict(self) -> dict:
        return {
            "centers": [list(c) for c in self.centers],
            "frequencies": list(self.frequencies),
            "duration": self.duration,
            "duties": list(self.duties),
        }

    @classmethod
    def from_dict(cls, d) -> "TuningScene":
        try:
            return cls(d["centers"], d["frequencies"], float(d.get("duration", 0.1)), d.get("duties"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed tuning scene: {exc}") from None


def default_tuning_scene(duration=0.1) -> TuningScene:
    """Five reference-board LEDs spread over a 640x480 sensor."""
    centers = [(120, 120), (520, 120), (320, 240), (120, 360), (520, 360)]
    return TuningScene(centers, TAB3_FREQUENCIES, duration)


def load_tuning_scene(path) -> TuningScene:
    try:
        return TuningScene.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
