"""Tuning event-camera biases against blinking LEDs.

A handful of LEDs blink at known rates, so every lit pixel should fire a
known number of ON and OFF events. The cost counts how far each pixel is
off, and particle swarm search moves the six bias currents until the cost
reaches zero.

    python3 demos/bias_autotune.py
"""
import numpy as np

from evpipe.autotune.bias import BIAS_NAMES, load_bounds
from evpipe.autotune.cost import patch_ratios
from evpipe.autotune.objective import SimulatedCameraObjective
from evpipe.autotune.pso import pso_optimize
from evpipe.autotune.scene import default_tuning_scene
from evpipe.synth.camera import SimCamera, biased_behavior
from evpipe.synth.led import simulate_led_events

scene = default_tuning_scene()
bounds = load_bounds()
obj = SimulatedCameraObjective(scene)


def describe(bias):
    b = biased_behavior(bias)
    s = simulate_led_events(scene, SimCamera(640, 480, bias), seed=0, patch_only=True)
    ap, am = patch_ratios(s, scene)
    print(f"  cost {obj(bias):7.1f}   extra-event ratio ON {np.median(ap):+.2f} OFF {np.median(am):+.2f}")
    print(f"  thresholds {b.threshold_on:.2f}/{b.threshold_off:.2f}  refractory {b.refractory_us:.1f} us  "
          f"double-fire p {b.p_double:.2f}  noise {b.noise_rate_hz:.0f} Hz")


print(f"{scene.K} LEDs at {scene.frequencies} Hz, {scene.duration} s per evaluation")
print("\nfactory default bias")
describe(bounds.default)

r = pso_optimize(obj, bounds, particles=100, max_iters=60, seed=0, target=0.0, x0=bounds.default)
print(f"\nswarm stopped after {r.iterations} iterations ({r.evaluations} camera runs)")
print("best cost per iteration:", [round(c, 1) for c in r.trace])
print("\ntuned bias")
describe(r.x)
for name, a, b in zip(BIAS_NAMES, bounds.default.as_array(), r.x.as_array()):
    print(f"  {name:>10}: {a:7.0f} -> {b:7.0f}")
