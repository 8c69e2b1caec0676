"""Bounded particle swarm optimization.

Standard global-best PSO with constriction-equivalent coefficients. Positions
are clamped to the box after every move and the velocity component that hit
a wall is zeroed, so every evaluated point lies inside the bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .bias import BiasBounds, BiasVector

INERTIA = 0.729
COGNITIVE = 1.49445
SOCIAL = 1.49445
VMAX_FRACTION = 0.2


@dataclass
class PSOResult:
    x: object  # best position (BiasVector when optimizing over BiasBounds)
    cost: float
    trace: list = field(default_factory=list)  # global best after each iteration
    iterations: int = 0
    evaluations: int = 0
    seed: int = 0

    @property
    def converged(self) -> bool:
        return bool(self.trace) and self.trace[-1] <= 0.0

    def report(self) -> dict:
        x = self.x.to_dict() if isinstance(self.x, BiasVector) else np.asarray(self.x).tolist()
        return {
            "theta_star": x,
            "j_star": float(self.cost),
            "iterations": int(self.iterations),
            "trace": [float(v) for v in self.trace],
            "seed": int(self.seed),
        }


def _box(bounds):
    if isinstance(bounds, BiasBounds):
        return bounds.lower, bounds.upper, BiasVector.from_array
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape != hi.shape or lo.ndim != 1 or np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise ConfigError("bounds must be two finite 1-D arrays of equal length")
    if np.any(hi <= lo):
        raise ConfigError("bounds are degenerate (need min < max in every dimension)")
    return lo, hi, lambda a: a.copy()


def pso_optimize(objective, bounds, particles=100, max_iters=60, seed=0, *, target=None, x0=None,
                 inertia=INERTIA, cognitive=COGNITIVE, social=SOCIAL, vmax_fraction=VMAX_FRACTION,
                 callback=None) -> PSOResult:
    """Minimize ``objective`` over a box.

    Parameters
    ----------
    objective : callable
        Receives a BiasVector when ``bounds`` is a :class:`BiasBounds`,
        otherwise a 1-D array.
    bounds : BiasBounds or (lower, upper)
    max_iters : int
        Iteration 1 evaluates the initial swarm; every further iteration moves
        and re-evaluates all particles.
    target : float, optional
        Stop as soon as the global best reaches this value.
    x0 : array-like or BiasVector, optional
        Placed as particle 0 (e.g. a known default setting).
    callback : callable, optional
        ``callback(iteration, best_cost)`` after each iteration.
    """
    if max_iters <= 0:
        raise ConfigError("max_iters must be positive")
    if particles < 1:
        raise ConfigError("need at least one particle")
    lo, hi, decode = _box(bounds)
    d = lo.size
    rng = np.random.default_rng(seed)
    span = hi - lo
    vmax = vmax_fraction * span

    x = lo + rng.random((particles, d)) * span
    if x0 is not None:
        a = x0.as_array() if isinstance(x0, BiasVector) else np.asarray(x0, dtype=float)
        x[0] = np.clip(a, lo, hi)
    v = rng.uniform(-vmax, vmax, (particles, d))

    def evaluate(pos):
        return np.array([float(objective(decode(p))) for p in pos])

    cost = evaluate(x)
    pbest, pcost = x.copy(), cost.copy()
    g = int(np.argmin(pcost))
    gbest, gcost = pbest[g].copy(), float(pcost[g])
    trace = [gcost]
    evals = particles
    if callback:
        callback(1, gcost)
    it = 1
    while it < max_iters and not (target is not None and gcost <= target):
        r1 = rng.random((particles, d))
        r2 = rng.random((particles, d))
        v = inertia * v + cognitive * r1 * (pbest - x) + social * r2 * (gbest - x)
        v = np.clip(v, -vmax, vmax)
        x = x + v
        wall = (x < lo) | (x > hi)
        x = np.clip(x, lo, hi)
        v[wall] = 0.0
        cost = evaluate(x)
        evals += particles
        better = cost < pcost
        pbest[better] = x[better]
        pcost[better] = cost[better]
        g = int(np.argmin(pcost))
        if pcost[g] < gcost:
            gbest, gcost = pbest[g].copy(), float(pcost[g])
        trace.append(gcost)
        it += 1
        if callback:
            callback(it, gcost)
    return PSOResult(decode(gbest), gcost, trace, it, evals, int(seed))
