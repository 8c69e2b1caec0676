"""Welch power spectral density and band-wise spectrum comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.integrate import trapezoid

from ..errors import ConfigError, InsufficientDataError

SEGMENT = 1024


@dataclass
class PSD:
    freqs: np.ndarray
    power: np.ndarray  # one-sided density, units^2 / Hz
    fs: float

    def total_power(self) -> float:
        """Integral over frequency; equals the signal variance for a mean-free series."""
        return float(trapezoid(self.power, self.freqs))

    def bands(self, n_bands=8, min_bins=5, fmin=None):
        """Split the positive-frequency axis into ``n_bands`` log-spaced bands.

        Returns a list of boolean masks over ``freqs``; bands with fewer than
        ``min_bins`` bins are dropped.
        """
        f = self.freqs
        lo = f[1] if fmin is None else fmin
        edges = np.geomspace(lo, f[-1], n_bands + 1)
        edges[-1] = np.nextafter(edges[-1], np.inf)
        masks = [(f >= a) & (f < b) for a, b in zip(edges[:-1], edges[1:])]
        return [m for m in masks if m.sum() >= min_bins]


def welch_psd(x, fs=1.0, segment=SEGMENT, overlap=None) -> PSD:
    """Hann-windowed Welch estimate with ``overlap`` samples shared (default 50%).

    Raises
    ------
    InsufficientDataError
        If the series is shorter than two segments.
    """
    x = np.asarray(x, dtype=float).ravel()
    if segment < 2:
        raise ConfigError("segment length must be at least 2")
    if len(x) < 2 * segment:
        raise InsufficientDataError(f"need >= {2 * segment} samples for segment {segment}, got {len(x)}")
    overlap = segment // 2 if overlap is None else int(overlap)
    if not 0 <= overlap < segment:
        raise ConfigError("overlap must lie in [0, segment)")
    f, p = sps.welch(x, fs=fs, window="hann", nperseg=segment, noverlap=overlap, detrend="constant",
                     scaling="density", return_onesided=True)
    return PSD(f, p, float(fs))


def band_ratios(est: PSD, ref_power, n_bands=8, min_bins=5):
    """Ratio of band-mean power ``est / ref`` for every band with enough bins.

    ``ref_power`` is sampled on ``est.freqs`` (an array or a callable of
    frequency).
    """
    ref = ref_power(est.freqs) if callable(ref_power) else np.asarray(ref_power, dtype=float)
    return np.array([est.power[m].mean() / ref[m].mean() for m in est.bands(n_bands, min_bins)])
