"""Event-ratio statistics and the asymmetric tuning cost.

For an LED blinking at ``f`` observed for ``t`` seconds, an ideal pixel fires
``t * f`` positive and ``t * f`` negative events. The per-polarity ratio
``alpha = count / (t * f) - 1`` is penalized four times harder when events are
missing (``alpha < 0``) than when there are extra ones, and extra events up to
``alpha0`` are free.
"""
from __future__ import annotations

import numpy as np

from ..events import EventStream
from .scene import TuningScene

ALPHA0 = 0.5


def event_ratio(stream: EventStream, pixel, f_k, t) -> tuple[float, float]:
    """``(alpha_plus, alpha_minus)`` of one pixel."""
    if t <= 0 or f_k <= 0:
        raise ValueError("t and f_k must be positive")
    x, y = pixel
    on_px = (stream.x == x) & (stream.y == y)
    pos = int(np.count_nonzero(on_px & (stream.p > 0)))
    neg = int(np.count_nonzero(on_px & (stream.p < 0)))
    expected = t * f_k
    return pos / expected - 1.0, neg / expected - 1.0


def pixel_cost(alpha, alpha0=ALPHA0):
    """Asymmetric per-pixel cost; works elementwise on arrays."""
    a = np.asarray(alpha, dtype=float)
    out = np.where(a < 0, 4.0 * a * a, np.where(a > alpha0, (a - alpha0) ** 2, 0.0))
    return float(out) if out.ndim == 0 else out


def polarity_counts(stream: EventStream, width=None, height=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel positive and negative event counts, shape (height, width)."""
    w = stream.width if width is None else width
    h = stream.height if height is None else height
    idx = stream.y.astype(np.int64) * w + stream.x
    pos = np.bincount(idx[stream.p > 0], minlength=w * h).reshape(h, w)
    neg = np.bincount(idx[stream.p < 0], minlength=w * h).reshape(h, w)
    return pos, neg


def patch_ratios(stream: EventStream, scene: TuningScene) -> tuple[np.ndarray, np.ndarray]:
    """Ratios over every marker's 3x3 patch, each of shape (K, 9)."""
    scene.check(stream.width, stream.height)
    return patch_ratios_from_arrays(stream.x, stream.y, stream.p, stream.width, scene)


def patch_keys(scene: TuningScene, width) -> tuple[np.ndarray, np.ndarray]:
    """Sorted linear pixel indices of all patch pixels and their patch slots."""
    keys = np.concatenate([ys * width + xs for xs, ys in (scene.patch_pixels(k) for k in range(scene.K))])
    order = np.argsort(keys, kind="stable")
    return keys[order], order


def patch_ratios_from_arrays(x, y, p, width, scene: TuningScene, keys=None) -> tuple[np.ndarray, np.ndarray]:
    """Same as :func:`patch_ratios` on raw event columns (order does not matter).

    ``keys`` may carry a cached :func:`patch_keys` result.
    """
    sorted_keys, order = patch_keys(scene, width) if keys is None else keys
    idx = np.asarray(y, dtype=np.int64) * width + x
    pos = np.minimum(np.searchsorted(sorted_keys, idx), len(sorted_keys) - 1)
    hit = sorted_keys[pos] == idx
    slot = order[pos[hit]] * 2 + (np.asarray(p)[hit] < 0)
    counts = np.bincount(slot, minlength=2 * len(sorted_keys)).reshape(scene.K, 9, 2)
    expected = scene.duration * np.asarray(scene.frequencies)[:, None]
    return counts[..., 0] / expected - 1.0, counts[..., 1] / expected - 1.0


def cost_from_ratios(ap, am, alpha0=ALPHA0) -> float:
    return float(np.sum(pixel_cost(ap, alpha0)) + np.sum(pixel_cost(am, alpha0)))


def total_cost(stream: EventStream, scene: TuningScene, alpha0=ALPHA0) -> float:
    """Sum of both polarities' pixel costs over all marker patches."""
    return cost_from_ratios(*patch_ratios(stream, scene), alpha0)
