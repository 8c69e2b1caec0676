"""Tuning objective backed by the simulated camera."""
from __future__ import annotations

import numpy as np

from ..synth.camera import SimCamera
from ..synth.led import led_parts, quantize
from .bias import BiasVector
from .cost import ALPHA0, cost_from_ratios, patch_keys, patch_ratios_from_arrays
from .scene import TuningScene


class SimulatedCameraObjective:
    """``J(bias)`` for a static LED scene seen by the simulated camera.

    Every evaluation replays the scene with the same ``eval_seed``, so the
    objective is a deterministic function of the bias. Only the 3x3
    evaluation patches are simulated; the cost equals ``total_cost`` of the
    corresponding patch-only stream.
    """

    def __init__(self, scene: TuningScene, width=640, height=480, eval_seed=0, alpha0=ALPHA0):
        scene.check(width, height)
        self.scene = scene
        self.width = int(width)
        self.height = int(height)
        self.eval_seed = int(eval_seed)
        self.alpha0 = float(alpha0)
        self.evaluations = 0
        self._keys = patch_keys(scene, self.width)

    def ratios(self, bias: BiasVector):
        cam = SimCamera(self.width, self.height, bias)
        parts, T = led_parts(self.scene, cam, self.scene.duration, self.eval_seed, patch_only=True)
        x, y, _, p = quantize(parts, self.width, self.height, T)
        return patch_ratios_from_arrays(x, y, p, self.width, self.scene, self._keys)

    def __call__(self, bias) -> float:
        if not isinstance(bias, BiasVector):
            bias = BiasVector.from_array(np.asarray(bias))
        self.evaluations += 1
        return cost_from_ratios(*self.ratios(bias), self.alpha0)
