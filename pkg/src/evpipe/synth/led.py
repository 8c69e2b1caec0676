"""Blinking-LED event generation.

Each LED is a Gaussian light spot of peak log contrast ``peak`` over the
background, switched on for ``duty / f`` every ``1 / f``. Per pixel and pulse:

* the photoreceptor low-pass (time constant ``tau``) reaches
  ``c_p = c * (1 - exp(-t_on / tau))`` by the end of the pulse;
* the ON event fires when ``c_p`` exceeds the (jittered) ON threshold, at the
  moment the rising level crosses it; the pixel is then blind for the
  refractory period;
* the OFF event fires when the decaying level has dropped by the OFF
  threshold below the reference. If the pixel is still refractory when the
  LED switches off, the reference is taken where the level stands at the end
  of the refractory period, so a long dead time can swallow the OFF event;
* every emitted event is followed by a same-polarity double with
  probability ``p_double``;
* spurious events of random polarity arrive as a Poisson process per pixel in
  a window around each spot.

Pulses are handled analytically per edge instead of on a fixed tick grid.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..autotune.scene import TuningScene
from ..events import EventStream
from ..errors import ConfigError
from .camera import Behavior, SimCamera

SPOT_SIGMA = 1.0  # px
PEAK_CONTRAST = 2.0  # log units
DOUBLE_SPREAD_US = 3.0
NOISE_MARGIN = 8  # px around the spot window


def _window(radius):
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return dx.ravel(), dy.ravel()


def edge_times(freq_hz, duty, duration_us, rng) -> tuple[np.ndarray, float]:
    """ON-edge times (us) in ``[0, duration_us)`` with a random phase, plus the on-time."""
    period = 1e6 / freq_hz
    t_on = duty * period
    phase = rng.uniform(0.0, period - t_on)
    n = int(np.ceil((duration_us - phase) / period))
    return phase + period * np.arange(max(n, 0)), t_on


def pulse_events(edges, cx, cy, t_on, beh: Behavior, rng, *, spot_sigma=SPOT_SIGMA,
                 peak=PEAK_CONTRAST, pixels=None, width=None, height=None):
    """Signal events of one LED.

    Parameters
    ----------
    edges : (E,) ON-edge times, us
    cx, cy : (E,) spot center per pulse, px
    t_on : scalar or (E,) pulse length, us
    pixels : (dx, dy) offsets, optional
        Pixel offsets relative to the rounded spot center; defaults to a
        window of radius ``ceil(4 * spot_sigma)``. When ``width``/``height`` are
        given, pixels outside the sensor are dropped.

    Returns
    -------
    x, y, t (float us), p : flat arrays, unsorted
    """
    edges = np.ascontiguousarray(edges, dtype=float)
    E = len(edges)
    if pixels is None:
        pixels = _window(int(np.ceil(4 * spot_sigma)))
    ox = np.ascontiguousarray(pixels[0], dtype=np.int64)
    oy = np.ascontiguousarray(pixels[1], dtype=np.int64)
    cx = np.ascontiguousarray(np.broadcast_to(np.asarray(cx, dtype=float), (E,)))
    cy = np.ascontiguousarray(np.broadcast_to(np.asarray(cy, dtype=float), (E,)))
    t_on = np.ascontiguousarray(np.broadcast_to(np.asarray(t_on, dtype=float), (E,)))
    shape = (E, len(ox))
    z = rng.standard_normal((2,) + shape) if beh.threshold_sigma > 0 else np.zeros((2,) + shape)
    u = rng.random((4,) + shape)
    x, y, t, p = _pulse_kernel(
        edges, cx, cy, t_on, ox, oy, float(spot_sigma), float(peak),
        beh.threshold_on, beh.threshold_off, beh.threshold_sigma, beh.tau_us,
        beh.refractory_us, beh.p_double, DOUBLE_SPREAD_US, z, u,
    )
    if width is not None:
        keep = (x >= 0) & (x < width) & (y >= 0) & (y < height)
        x, y, t, p = x[keep], y[keep], t[keep], p[keep]
    return x, y, t, p


@njit(cache=True, fastmath=True)
def _pulse_kernel(edges, cx, cy, t_on, ox, oy, sigma, peak, th_on, th_off, th_sigma, tau,
                  refr, p_double, spread, z, u):
    E = edges.shape[0]
    W = ox.shape[0]
    cap = 4 * E * W
    xs = np.empty(cap, np.int64)
    ys = np.empty(cap, np.int64)
    ts = np.empty(cap)
    ps = np.empty(cap, np.int8)
    n = 0
    lag0 = max(refr, 1.0)
    cbuf = np.empty(W)
    for e in range(E):
        rx = np.int64(np.rint(cx[e]))
        ry = np.int64(np.rint(cy[e]))
        ton = t_on[e]
        gain = 1.0 if tau == 0.0 else -np.expm1(-ton / tau)
        if e == 0 or cx[e] != cx[e - 1] or cy[e] != cy[e - 1]:
            for k in range(W):
                d2 = (rx + ox[k] - cx[e]) ** 2 + (ry + oy[k] - cy[e]) ** 2
                cbuf[k] = peak * np.exp(-0.5 * d2 / (sigma * sigma))
        for k in range(W):
            px = rx + ox[k]
            py = ry + oy[k]
            c = cbuf[k]
            cp = c * gain
            thr_on = th_on * (1.0 + th_sigma * z[0, e, k])
            thr_off = th_off * (1.0 + th_sigma * z[1, e, k])
            blocked = -np.inf
            if cp > thr_on:
                t1 = 0.0 if tau == 0.0 else -tau * np.log1p(-thr_on / c)
                xs[n] = px; ys[n] = py; ts[n] = edges[e] + t1; ps[n] = 1
                n += 1
                if u[0, e, k] < p_double:
                    xs[n] = px; ys[n] = py; ts[n] = edges[e] + t1 + lag0 + spread * u[2, e, k]; ps[n] = 1
                    n += 1
                blocked = t1 + refr
            # level the OFF transition starts from
            if blocked > ton:
                ref = 0.0 if tau == 0.0 else cp * np.exp(-(blocked - ton) / tau)
                start = blocked
            else:
                ref = cp
                start = ton
            if ref > thr_off:
                t2 = start if tau == 0.0 else start - tau * np.log1p(-thr_off / ref)
                xs[n] = px; ys[n] = py; ts[n] = edges[e] + t2; ps[n] = -1
                n += 1
                if u[1, e, k] < p_double:
                    xs[n] = px; ys[n] = py; ts[n] = edges[e] + t2 + lag0 + spread * u[3, e, k]; ps[n] = -1
                    n += 1
    return xs[:n], ys[:n], ts[:n], ps[:n]


def noise_events(xs, ys, t_start_us, t_stop_us, rate_hz, rng):
    """Poisson spurious events of random polarity on the given pixels."""
    xs = np.asarray(xs); ys = np.asarray(ys)
    span = max(t_stop_us - t_start_us, 0.0)
    counts = rng.poisson(rate_hz * span * 1e-6, size=len(xs))
    n = int(counts.sum())
    x = np.repeat(xs, counts)
    y = np.repeat(ys, counts)
    t = rng.uniform(t_start_us, t_stop_us, n) if n else np.zeros(0)
    p = np.where(rng.random(n) < 0.5, 1, -1)
    return x, y, t, p


def quantize(parts, width, height, t_end_us):
    """Concatenate (x, y, t, p) parts, floor times to us and drop out-of-range events."""
    if not parts:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, z.astype(np.int8)
    x = np.concatenate([a[0] for a in parts]).astype(np.int64)
    y = np.concatenate([a[1] for a in parts]).astype(np.int64)
    t = np.floor(np.concatenate([a[2] for a in parts])).astype(np.int64)
    p = np.concatenate([a[3] for a in parts]).astype(np.int8)
    keep = (t >= 0) & (t < t_end_us) & (x >= 0) & (x < width) & (y >= 0) & (y < height)
    return x[keep], y[keep], t[keep], p[keep]


def assemble(parts, width, height, t_end_us) -> EventStream:
    """Quantize parts and sort them into a time-ordered stream."""
    x, y, t, p = quantize(parts, width, height, t_end_us)
    order = np.lexsort((p, x, y, t))
    return EventStream.from_arrays(x[order], y[order], t[order], p[order], width, height)


def led_parts(scene: TuningScene, camera: SimCamera, duration, seed, *, spot_sigma=SPOT_SIGMA,
              peak=PEAK_CONTRAST, patch_only=False, noise_margin=NOISE_MARGIN):
    """Unsorted event parts of a static LED scene; see :func:`simulate_led_events`."""
    if duration <= 0:
        raise ConfigError("duration must be positive")
    scene.check(camera.width, camera.height)
    beh = camera.behavior
    rng = np.random.default_rng(seed)
    T = duration * 1e6
    radius = int(np.ceil(4 * spot_sigma))
    if patch_only:
        sig_px = noise_px = _window(1)
    else:
        sig_px = _window(radius)
        noise_px = _window(radius + noise_margin)
    edges, t_on, cx, cy = [], [], [], []
    for k in range(scene.K):
        e, ton = edge_times(scene.frequencies[k], scene.duties[k], T, rng)
        edges.append(e)
        t_on.append(np.full(len(e), ton))
        cx.append(np.full(len(e), float(scene.centers[k][0])))
        cy.append(np.full(len(e), float(scene.centers[k][1])))
    parts = [pulse_events(np.concatenate(edges), np.concatenate(cx), np.concatenate(cy), np.concatenate(t_on),
                          beh, rng, spot_sigma=spot_sigma, peak=peak, pixels=sig_px)]
    if beh.noise_rate_hz > 0:
        centers = np.rint(np.asarray(scene.centers)).astype(np.int64)
        nx = (centers[:, :1] + noise_px[0][None, :]).ravel()
        ny = (centers[:, 1:] + noise_px[1][None, :]).ravel()
        parts.append(noise_events(nx, ny, 0.0, T, beh.noise_rate_hz, rng))
    return parts, T


def simulate_led_events(scene: TuningScene, camera: SimCamera, duration=None, seed=0, *,
                        spot_sigma=SPOT_SIGMA, peak=PEAK_CONTRAST, patch_only=False,
                        noise_margin=NOISE_MARGIN) -> EventStream:
    """Events of statically placed blinking LEDs.

    Parameters
    ----------
    duration : float, optional
        Seconds; defaults to ``scene.duration``.
    patch_only : bool
        Simulate only the 3x3 evaluation patches (signal and noise). Much
        cheaper and sufficient for the tuning cost.
    noise_margin : int
        Spurious events are generated in a square window reaching this many
        pixels beyond each spot window. Overlapping windows of nearby LEDs
        receive noise from each.
    """
    duration = scene.duration if duration is None else float(duration)
    parts, T = led_parts(scene, camera, duration, seed, spot_sigma=spot_sigma, peak=peak,
                         patch_only=patch_only, noise_margin=noise_margin)
    return assemble(parts, camera.width, camera.height, T)


def led_footprint(scene: TuningScene, camera: SimCamera, *, spot_sigma=SPOT_SIGMA, peak=PEAK_CONTRAST,
                  margin=3.0) -> np.ndarray:
    """Ground-truth marker index per pixel, -1 elsewhere.

    A pixel belongs to LED ``k`` when its attenuated pulse contrast exceeds
    both thresholds by ``margin`` standard deviations of the threshold
    mismatch, i.e. when it is expected to fire on essentially every edge.
    """
    beh = camera.behavior
    out = np.full((camera.height, camera.width), -1, dtype=np.int32)
    yy, xx = np.mgrid[0:camera.height, 0:camera.width]
    thr = max(beh.threshold_on, beh.threshold_off) * (1 + margin * beh.threshold_sigma)
    for k in range(scene.K):
        t_on = scene.duties[k] / scene.frequencies[k] * 1e6
        gain = 1.0 if beh.tau_us == 0 else -np.expm1(-t_on / beh.tau_us)
        cx, cy = scene.centers[k]
        c = peak * gain * np.exp(-0.5 * ((xx - cx) ** 2 + (yy - cy) ** 2) / spot_sigma**2)
        out[c > thr] = k
    return out
