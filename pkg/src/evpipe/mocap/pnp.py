"""Perspective-n-point pose estimation.

Minimizes the summed squared pixel reprojection error over SE(3) with a
Levenberg-damped Gauss-Newton iteration (left-multiplicative rotation
updates). Without a prior, several rotation seeds are tried, each with its
translation initialized by linear least squares on the bearing constraints
``ray_i x (R X_i + t) = 0``; the lowest-cost converged solution wins.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EstimationError, InsufficientDataError
from .camera import CameraModel, project_points, projection_jacobian, unproject_points
from .pose import Pose, expm_so3, hat, orthonormalize

MAX_ITERS = 50
STEP_TOL = 1e-10


def _seed_rotations():
    seeds = [np.eye(3)]
    for axis in np.eye(3):
        for angle in (np.pi / 2, -np.pi / 2, np.pi):
            seeds.append(expm_so3(axis * angle))
    return seeds


SEEDS = _seed_rotations()


@dataclass
class PnPResult:
    pose: Pose
    rmse: float
    iterations: int
    converged: bool
    residuals: np.ndarray


def reprojection_residuals(pose: Pose, obj, img, cam: CameraModel) -> np.ndarray:
    uv, _ = project_points(cam, pose.apply(obj))
    return uv - img


def reprojection_rmse(pose: Pose, obj, img, cam: CameraModel) -> float:
    r = reprojection_residuals(pose, obj, img, cam)
    return float(np.sqrt(np.mean(np.sum(r**2, axis=1))))


def _translation_for(R, obj, rays):
    # each ray contributes [r]x t = -[r]x R X
    A = np.concatenate([hat(r) for r in rays])
    b = np.concatenate([-hat(r) @ (R @ X) for r, X in zip(rays, obj)])
    t, *_ = np.linalg.lstsq(A, b, rcond=None)
    return t


def _cost(R, t, obj, img, cam):
    P = obj @ R.T + t
    uv, valid = project_points(cam, P)
    if not valid.all():
        return np.inf, None, P
    r = (uv - img).ravel()
    return float(r @ r), r, P


def _refine(R, t, obj, img, cam, max_iters=MAX_ITERS):
    cost, r, P = _cost(R, t, obj, img, cam)
    if not np.isfinite(cost):
        return R, t, cost, 0, False
    lam = 1e-3
    n = len(obj)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        Jp = projection_jacobian(cam, P)  # (n, 2, 3)
        RX = P - t
        J = np.empty((n, 2, 6))
        for i in range(n):
            J[i, :, :3] = -Jp[i] @ hat(RX[i])
            J[i, :, 3:] = Jp[i]
        J = J.reshape(2 * n, 6)
        H = J.T @ J
        g = J.T @ r
        while True:
            try:
                step = np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-12), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e12:
                    return R, t, cost, it, False
                continue
            R_new = expm_so3(step[:3]) @ R
            t_new = t + step[3:]
            new_cost, new_r, new_P = _cost(R_new, t_new, obj, img, cam)
            if new_cost <= cost:
                R, t, cost, r, P = R_new, t_new, new_cost, new_r, new_P
                lam = max(lam / 10, 1e-12)
                break
            lam *= 10
            if lam > 1e12:
                # no descent direction left: a (local) minimum
                return R, t, cost, it, True
        if np.linalg.norm(step) < STEP_TOL or cost == 0.0:
            converged = True
            break
    return R, t, cost, it, converged


def solve_pnp(obj, img, cam: CameraModel, prior: Pose | None = None) -> PnPResult:
    """Pose of a rigid body from >= 4 body-point / pixel correspondences.

    Parameters
    ----------
    obj : (N, 3) array
        Body-frame points in metres.
    img : (N, 2) array
        Observed pixels.
    cam : CameraModel
    prior : Pose, optional
        Seeds the refinement instead of the multi-seed search.

    Raises
    ------
    InsufficientDataError
        With fewer than 4 correspondences.
    EstimationError
        If the points are (nearly) collinear or no seed yields a valid pose.
    """
    obj = np.asarray(obj, dtype=float).reshape(-1, 3)
    img = np.asarray(img, dtype=float).reshape(-1, 2)
    if len(obj) < 4 or len(img) != len(obj):
        raise InsufficientDataError(f"PnP needs >= 4 correspondences, got {len(obj)}")
    s = np.linalg.svd(obj - obj.mean(axis=0), compute_uv=False)
    if s[1] <= 1e-9 * max(s[0], 1e-300):
        raise EstimationError("degenerate geometry: body points are collinear", {"singular_values": s.tolist()})
    rays, valid = unproject_points(cam, img)
    if not valid.all():
        raise EstimationError("observations outside the camera model domain", {"invalid": np.flatnonzero(~valid).tolist()})

    if prior is not None:
        starts = [(prior.R, prior.t)]
    else:
        starts = [(R0, _translation_for(R0, obj, rays)) for R0 in SEEDS]

    best = None
    tried = []
    for R0, t0 in starts:
        R, t, cost, iters, conv = _refine(R0, t0, obj, img, cam)
        tried.append(cost)
        if np.isfinite(cost) and (best is None or cost < best[2]):
            best = (R, t, cost, iters, conv)
    if best is None:
        raise EstimationError("no initialization produced a valid pose", {"costs": tried})
    R, t, cost, iters, conv = best
    pose = Pose(orthonormalize(R), t)
    res = reprojection_residuals(pose, obj, img, cam)
    rmse = float(np.sqrt(np.mean(np.sum(res**2, axis=1))))
    return PnPResult(pose, rmse, iters, conv, res)
