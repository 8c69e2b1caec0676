"""Rigid poses and small SO(3) helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation


def hat(w) -> np.ndarray:
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0.0]])


def expm_so3(w) -> np.ndarray:
    return Rotation.from_rotvec(np.asarray(w, dtype=float)).as_matrix()


def rotation_angle(R) -> float:
    """Angle (rad) of a rotation matrix, robust near 0 and pi."""
    return float(np.linalg.norm(Rotation.from_matrix(R).as_rotvec()))


def orthonormalize(R) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    Q = u @ vt
    if np.linalg.det(Q) < 0:
        u[:, -1] *= -1
        Q = u @ vt
    return Q


@dataclass(frozen=True, eq=False)
class Pose:
    """Body-to-camera transform: ``p_cam = R @ p_body + t`` (metres)."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.array(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.array(self.t, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rotvec(cls, rotvec, t) -> "Pose":
        return cls(expm_so3(rotvec), t)

    def apply(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.R.T + self.t

    def quaternion(self) -> np.ndarray:
        """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
        x, y, z, w = Rotation.from_matrix(self.R).as_quat()
        q = np.array([w, x, y, z])
        return -q if q[0] < 0 else q

    def rotation_error(self, other: "Pose") -> float:
        return rotation_angle(self.R.T @ other.R)

    def translation_error(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.t - other.t))

    def is_valid(self, tol=1e-9) -> bool:
        return (
            np.allclose(self.R.T @ self.R, np.eye(3), atol=tol)
            and abs(np.linalg.det(self.R) - 1) < tol
        )
