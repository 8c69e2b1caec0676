"""Blink-period estimation, marker labeling and clustering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from ..errors import ConfigError
from .markers import MarkerConfig
from .sdtv import SDTV

# widest tolerance whose bands stay disjoint for the reference board (2610/2860 Hz)
DEFAULT_REL_TOL = 0.045


@njit(cache=True)
def _period(d):
    n = d.shape[0]
    start = -1
    for i in range(n - 1):
        if d[i] > 0 and d[i + 1] < 0:
            start = i + 1
            break
    if start < 0:
        return -1.0
    trans = np.empty(n, dtype=np.int64)
    nt = 0
    for j in range(start + 1, n):
        if d[j - 1] < 0 and d[j] > 0:
            trans[nt] = j
            nt += 1
    if nt < 3:
        return -1.0
    periods = np.empty(nt - 1)
    for a in range(nt - 1):
        s = 0
        for m in range(trans[a], trans[a + 1]):
            s += abs(np.int64(d[m]))
        periods[a] = s
    return np.median(periods)


@njit(cache=True)
def _periods_all(stack, cursor, mask, out):
    rows, cols = mask.shape
    depth = stack.shape[2]
    buf = np.empty(depth, dtype=np.int16)
    for y in range(rows):
        for x in range(cols):
            if not mask[y, x]:
                out[y, x] = -1.0
                continue
            c = cursor[y, x]
            for i in range(depth):
                buf[i] = stack[y, x, (c + i) % depth]
            out[y, x] = _period(buf)


def estimate_period(stack) -> float | None:
    """Blink period (us) from one pixel's signed deltas, oldest first.

    Entries up to the first positive-to-negative transition are dropped. Every
    later negative-to-positive transition starts a period; a period's length is
    the sum of absolute deltas from that transition's positive entry up to the
    next transition. Returns the median period, or None with fewer than two
    complete periods.
    """
    p = _period(np.ascontiguousarray(stack, dtype=np.int16))
    return None if p < 0 else float(p)


def check_bands(frequencies, rel_tol) -> None:
    """Raise ConfigError if relative tolerance bands of the frequencies overlap."""
    if not 0 < rel_tol < 1:
        raise ConfigError("rel_tol must lie in (0, 1)")
    f = np.sort(np.asarray(frequencies, dtype=float))
    hi = f[:-1] * (1 + rel_tol)
    lo = f[1:] * (1 - rel_tol)
    bad = np.flatnonzero(hi >= lo)
    if bad.size:
        k = bad[0]
        max_tol = (f[k + 1] - f[k]) / (f[k + 1] + f[k])
        raise ConfigError(
            f"tolerance bands of {f[k]:g} Hz and {f[k + 1]:g} Hz overlap at rel_tol={rel_tol:g} "
            f"(must be < {max_tol:.4f})"
        )


def estimate_periods(sdtv: SDTV, mask=None) -> np.ndarray:
    """Period (us) per pixel, -1 where undefined; only ``mask`` pixels are evaluated."""
    if mask is None:
        mask = sdtv.full
    out = np.empty(mask.shape)
    _periods_all(sdtv.stack, sdtv.cursor, np.ascontiguousarray(mask), out)
    return out


def detect_markers(sdtv: SDTV, cfg: MarkerConfig, rel_tol=DEFAULT_REL_TOL, t_now=None, max_age=None) -> np.ndarray:
    """Label pixels with the marker whose frequency their blink matches.

    Only pixels with a full stack are considered. When ``t_now`` and
    ``max_age`` (us) are given, pixels whose last event is older than
    ``max_age`` are skipped, which drops pixels a moving marker has left.

    Returns
    -------
    ndarray of int
        Marker id per pixel, -1 where unlabeled.
    """
    freqs = cfg.frequencies
    check_bands(freqs, rel_tol)
    mask = sdtv.full
    if t_now is not None and max_age is not None:
        mask = mask & (sdtv.last_t >= t_now - max_age)
    periods = estimate_periods(sdtv, mask)
    labels = np.full(periods.shape, -1, dtype=np.int32)
    ok = periods > 0
    f = np.zeros_like(periods)
    f[ok] = 1e6 / periods[ok]
    ids = cfg.ids
    for k, fk in enumerate(freqs):
        hit = ok & (np.abs(f - fk) <= rel_tol * fk)
        labels[hit] = ids[k]
    return labels


@dataclass(frozen=True)
class Detection:
    marker_id: int
    centroid: tuple  # (u, v) px
    support: int
    time: int  # us


_EIGHT = np.ones((3, 3), dtype=bool)


def cluster_detections(labels, time=0) -> list[Detection]:
    """One detection per label: centroid of its largest 8-connected component."""
    out = []
    for mid in np.unique(labels):
        if mid < 0:
            continue
        comp, n = ndimage.label(labels == mid, structure=_EIGHT)
        sizes = np.bincount(comp.ravel())[1:]
        best = int(np.argmax(sizes)) + 1
        ys, xs = np.nonzero(comp == best)
        out.append(Detection(int(mid), (float(xs.mean()), float(ys.mean())), int(sizes[best - 1]), int(time)))
    return out
