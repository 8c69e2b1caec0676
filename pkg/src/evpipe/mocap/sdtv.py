"""Signed delta-time volume (SDTV).

Each pixel owns a cyclic stack of ``depth`` int16 entries. An event at time
``t`` with polarity ``p`` pushes ``p * (t - last_t)`` where ``last_t`` is the
pixel's previous event time, so one load yields both the inter-event gap and
the polarity. Gaps that do not fit in int16 reset the pixel's stack.
"""
from __future__ import annotations

import numpy as np
from numba import njit

DELTA_MAX = np.iinfo(np.int16).max


@njit(cache=True)
def _update(stack, cursor, count, last_t, xs, ys, ts, ps, depth):
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        t = np.int64(ts[i])
        dt = t - last_t[y, x]
        last_t[y, x] = t
        if dt > DELTA_MAX:
            count[y, x] = 0
            cursor[y, x] = 0
            continue
        if dt < 1:
            # equal timestamps still need a non-zero magnitude to carry the sign
            dt = 1
        c = cursor[y, x]
        stack[y, x, c] = dt if ps[i] > 0 else -dt
        c += 1
        if c == depth:
            c = 0
        cursor[y, x] = c
        if count[y, x] < depth:
            count[y, x] += 1


class SDTV:
    """Per-pixel cyclic stacks of signed inter-event time deltas.

    Parameters
    ----------
    width, height : int
        Sensor size.
    depth : int
        Stack depth ``D``.
    t_init : int
        Initialization time; the first event at a pixel stores its delta
        against this time.
    """

    def __init__(self, width, height, depth=32, t_init=0):
        self.width = int(width)
        self.height = int(height)
        self.depth = int(depth)
        # D is the contiguous axis
        self.stack = np.zeros((self.height, self.width, self.depth), dtype=np.int16)
        self.cursor = np.zeros((self.height, self.width), dtype=np.int32)
        self.count = np.zeros((self.height, self.width), dtype=np.int32)
        self.last_t = np.full((self.height, self.width), int(t_init), dtype=np.int64)

    def update(self, events) -> "SDTV":
        """Push a time-ordered batch (EventStream or structured array)."""
        ev = getattr(events, "events", events)
        if len(ev) == 0:
            return self
        _update(
            self.stack, self.cursor, self.count, self.last_t,
            np.ascontiguousarray(ev["x"]), np.ascontiguousarray(ev["y"]),
            np.ascontiguousarray(ev["t"]), np.ascontiguousarray(ev["p"]),
            self.depth,
        )
        return self

    def pixel_stack(self, x, y) -> np.ndarray:
        """Stored deltas of one pixel, oldest first."""
        n = self.count[y, x]
        c = self.cursor[y, x]
        raw = self.stack[y, x]
        if n < self.depth:
            return raw[c - n:c].copy()
        return np.concatenate([raw[c:], raw[:c]])

    def ordered_stacks(self) -> np.ndarray:
        """All stacks rolled so that index 0 is the oldest entry (full pixels only meaningful)."""
        idx = (self.cursor[..., None] + np.arange(self.depth)) % self.depth
        return np.take_along_axis(self.stack, idx, axis=2)

    def pixel_events(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Reconstruct ``(t, p)`` of the events held in one pixel's stack."""
        d = self.pixel_stack(x, y).astype(np.int64)
        mag = np.abs(d)
        # time of event i = last_t - sum of magnitudes of all later events
        later = np.concatenate([np.cumsum(mag[::-1])[::-1][1:], [0]])
        return self.last_t[y, x] - later, np.sign(d).astype(np.int8)

    @property
    def full(self) -> np.ndarray:
        return self.count == self.depth


def sdtv_update(sdtv: SDTV, events) -> SDTV:
    """Apply a batch of events to ``sdtv`` in place and return it."""
    return sdtv.update(events)
