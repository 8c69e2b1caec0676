"""Pinhole and double-sphere camera models.

Double-sphere projection of a camera-frame point ``(x, y, z)``::

    d1 = |(x, y, z)|
    d2 = |(x, y, xi*d1 + z)|
    u  = fx * x / (alpha*d2 + (1 - alpha)*(xi*d1 + z)) + cx
    v  = fy * y / (alpha*d2 + (1 - alpha)*(xi*d1 + z)) + cy

valid when ``z > -w2 * d1`` with ``w2`` derived from ``xi`` and ``alpha``.
With ``xi = alpha = 0`` this is the pinhole model.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class CameraModel:
    model: str = "pinhole"
    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    xi: float = 0.0
    alpha: float = 0.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.model not in ("pinhole", "double-sphere"):
            raise ConfigError(f"unknown camera model {self.model!r}")
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError("focal lengths must be positive")
        if self.model == "double-sphere" and not 0 <= self.alpha < 1:
            raise ConfigError("double-sphere alpha must lie in [0, 1)")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def in_image(self, uv, margin=0.0) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return (
            (uv[:, 0] >= margin) & (uv[:, 0] <= self.width - 1 - margin)
            & (uv[:, 1] >= margin) & (uv[:, 1] <= self.height - 1 - margin)
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "CameraModel":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_camera(path) -> CameraModel:
    try:
        return CameraModel.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_camera(cam: CameraModel, path) -> None:
    Path(path).write_text(json.dumps(cam.to_dict(), indent=2))


def _w2(xi, alpha):
    w1 = alpha / (1 - alpha) if alpha <= 0.5 else (1 - alpha) / alpha
    return (w1 + xi) / math.sqrt(2 * w1 * xi + xi * xi + 1)


def project_points(cam: CameraModel, pts):
    """Vectorized projection.

    Returns
    -------
    uv : ndarray (N, 2)
        Pixel coordinates; NaN where invalid.
    valid : ndarray (N,) of bool
        False where the point is behind the camera / outside the model domain.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        if cam.model == "pinhole":
            valid = z > 0
            denom = z
        else:
            xi, alpha = cam.xi, cam.alpha
            d1 = np.sqrt(x * x + y * y + z * z)
            zs = xi * d1 + z
            d2 = np.sqrt(x * x + y * y + zs * zs)
            denom = alpha * d2 + (1 - alpha) * zs
            valid = (z > -_w2(xi, alpha) * d1) & (denom > 0)
        uv = np.column_stack([cam.fx * x / denom + cam.cx, cam.fy * y / denom + cam.cy])
    uv[~valid] = np.nan
    return uv, valid


def project(cam: CameraModel, point):
    """Project one camera-frame point; returns ``(u, v)`` or None if behind."""
    uv, valid = project_points(cam, point)
    return (float(uv[0, 0]), float(uv[0, 1])) if valid[0] else None


def unproject_points(cam: CameraModel, uv):
    """Vectorized unprojection to unit rays; NaN rows where outside the domain."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    mx = (uv[:, 0] - cam.cx) / cam.fx
    my = (uv[:, 1] - cam.cy) / cam.fy
    if cam.model == "pinhole":
        rays = np.column_stack([mx, my, np.ones_like(mx)])
        valid = np.isfinite(mx) & np.isfinite(my)
    else:
        xi, alpha = cam.xi, cam.alpha
        r2 = mx * mx + my * my
        arg = 1 - (2 * alpha - 1) * r2
        valid = arg >= 0
        with np.errstate(invalid="ignore"):
            mz = (1 - alpha * alpha * r2) / (alpha * np.sqrt(arg) + 1 - alpha)
            disc = mz * mz + (1 - xi * xi) * r2
            valid &= disc >= 0
            scale = (mz * xi + np.sqrt(disc)) / (mz * mz + r2)
        rays = scale[:, None] * np.column_stack([mx, my, mz]) - np.array([0.0, 0.0, xi])
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    rays[~valid] = np.nan
    return rays, valid


def unproject(cam: CameraModel, uv) -> np.ndarray:
    """Unit ray through pixel ``uv``.

    Raises
    ------
    DomainError
        If ``uv`` lies outside the model's valid image region.
    """
    rays, valid = unproject_points(cam, uv)
    if not valid[0]:
        raise DomainError(f"pixel {tuple(np.ravel(uv))} lies outside the valid image region")
    return rays[0]


def projection_jacobian(cam: CameraModel, pts) -> np.ndarray:
    """d(u, v)/d(x, y, z) per point, shape (N, 2, 3)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if cam.model == "pinhole":
        x, y, z = pts.T
        J = np.zeros((len(pts), 2, 3))
        J[:, 0, 0] = cam.fx / z
        J[:, 0, 2] = -cam.fx * x / z**2
        J[:, 1, 1] = cam.fy / z
        J[:, 1, 2] = -cam.fy * y / z**2
        return J
    # central differences; step scaled to the point's range
    J = np.zeros((len(pts), 2, 3))
    h = 1e-6 * np.maximum(np.linalg.norm(pts, axis=1), 1e-3)
    for a in range(3):
        step = np.zeros_like(pts)
        step[:, a] = h
        up, _ = project_points(cam, pts + step)
        dn, _ = project_points(cam, pts - step)
        J[:, :, a] = (up - dn) / (2 * h[:, None])
    return J
