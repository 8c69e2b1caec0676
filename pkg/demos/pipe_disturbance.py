"""Disturbance model for a vehicle flying through a pipe.

Wrench samples (lateral force, vertical force, roll torque) recorded at
positions across the pipe cross-section are fitted with a mirror-symmetric
map. What the map cannot explain is treated as coloured noise and modelled
per channel with a low-order autoregressive process, which can then be
replayed in simulation.

    python3 demos/pipe_disturbance.py
"""
import numpy as np

from evpipe.disturbance.ar import fit_channels, generate_channels
from evpipe.disturbance.spectral import band_ratios, welch_psd
from evpipe.disturbance.wrench_map import CHANNELS, PIPE_RADIUS, Basis, fit_disturbance_map, synthetic_samples

P, F = synthetic_samples(800, seed=0, noise=0.05)
print(f"{len(P)} wrench samples inside a pipe of radius {PIPE_RADIUS * 100:.0f} cm")

for basis in (Basis("polynomial", 4), Basis("rbf")):
    m = fit_disturbance_map(P, F, basis, lam=1e-4)
    print(f"{basis.kind:>10} map, {basis.size} terms, training rmse "
          + ", ".join(f"{c} {r:.3f}" for c, r in zip(CHANNELS, m.rmse)))

m = fit_disturbance_map(P, F, Basis("polynomial", 4), lam=1e-4)

# a horizontal slice through the middle of the pipe
y = np.linspace(-0.9, 0.9, 7) * PIPE_RADIUS
w = m(y, np.zeros_like(y))
print("\n   y cm     f_y N    f_z N   tau_x Nm")
for yy, row in zip(y, w):
    print(f"{yy * 100:7.1f} {row[0]:9.3f} {row[1]:8.3f} {row[2]:9.4f}")
print("(f_y and tau_x flip sign across the centre line, f_z does not)")

# residual noise: correlated in time, so fit AR models rather than white noise
rng = np.random.default_rng(1)
n = 2**15
drive = rng.standard_normal((n, 3))
resid = np.zeros_like(drive)
for k in range(1, n):
    resid[k] = 0.85 * resid[k - 1] + drive[k] * [0.05, 0.08, 0.004]

models = fit_channels(resid, order=3)
print()
for ch, am in zip(CHANNELS, models):
    print(f"{ch}: AR({am.order}) coeffs {np.round(am.coeffs, 3).tolist()}, sigma^2 {am.sigma2:.2e}")

replay = generate_channels(models, n, seed=2)
for k, ch in enumerate(CHANNELS):
    r = band_ratios(welch_psd(replay[:, k]), welch_psd(resid[:, k]).power)
    print(f"{ch}: replayed/recorded power per band {np.round(r, 2).tolist()}")
