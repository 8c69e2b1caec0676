"""Position-dependent mean disturbance over the pipe cross-section.

Ridge regression of the wrench ``(f_y, f_z, tau_x)`` on a fixed basis in the
normalized coordinates ``(y / R, z / R)``: either all monomials up to a
degree, or Gaussian bumps on a square grid clipped to the disk plus a
constant. Both bases are closed under ``y -> -y``, so mirror-symmetric data
give exactly mirror-symmetric maps.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from ..errors import ConfigError, DomainError, InsufficientDataError, ParseError, SingularSystemError
from ..events import atomic_write
from ..synth.flows import PIPE_RADIUS

CHANNELS = ("fy_N", "fz_N", "taux_Nm")
SAMPLE_FIELDS = ("y_m", "z_m") + CHANNELS
_INSIDE_TOL = 1e-9


@dataclass(frozen=True)
class Basis:
    """``kind`` is ``"polynomial"`` (uses ``degree``) or ``"rbf"`` (uses ``grid``, ``width``)."""

    kind: str = "polynomial"
    degree: int = 4
    grid: int = 5  # RBF centers per side before clipping to the disk
    width: float = 0.5  # RBF std in normalized units

    def __post_init__(self):
        if self.kind not in ("polynomial", "rbf"):
            raise ConfigError(f"unknown basis kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 0:
            raise ConfigError("polynomial degree must be >= 0")
        if self.kind == "rbf" and (self.grid < 1 or self.width <= 0):
            raise ConfigError("rbf grid must be >= 1 and width > 0")

    def exponents(self):
        return [(i, d - i) for d in range(self.degree + 1) for i in range(d, -1, -1)]

    def centers(self) -> np.ndarray:
        g = np.linspace(-1, 1, self.grid) if self.grid > 1 else np.zeros(1)
        yy, zz = np.meshgrid(g, g)
        c = np.column_stack([yy.ravel(), zz.ravel()])
        return c[np.hypot(c[:, 0], c[:, 1]) <= 1 + 1e-12]

    @property
    def size(self) -> int:
        if self.kind == "polynomial":
            return (self.degree + 1) * (self.degree + 2) // 2
        return len(self.centers()) + 1

    def design(self, u, v) -> np.ndarray:
        """Basis functions at normalized points, shape (N, size)."""
        u = np.asarray(u, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        if self.kind == "polynomial":
            return np.column_stack([u**i * v**j for i, j in self.exponents()])
        c = self.centers()
        d2 = (u[:, None] - c[None, :, 0]) ** 2 + (v[:, None] - c[None, :, 1]) ** 2
        return np.column_stack([np.ones_like(u), np.exp(-0.5 * d2 / self.width**2)])

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            return {"kind": "polynomial", "degree": self.degree}
        return {"kind": "rbf", "grid": self.grid, "width": self.width}

    @classmethod
    def from_dict(cls, d) -> "Basis":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"malformed basis: {exc}") from None


@dataclass
class DisturbanceMap:
    basis: Basis
    coeffs: np.ndarray  # (size, 3)
    lam: float
    radius: float = PIPE_RADIUS
    rmse: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))  # training residual per channel

    def __call__(self, y, z) -> np.ndarray:
        return eval_disturbance_map(self, y, z)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.to_dict(),
            "coeffs": {ch: self.coeffs[:, k].tolist() for k, ch in enumerate(CHANNELS)},
            "lambda": self.lam,
            "radius_m": self.radius,
            "rmse": dict(zip(CHANNELS, map(float, self.rmse))),
        }

    @classmethod
    def from_dict(cls, d) -> "DisturbanceMap":
        try:
            basis = Basis.from_dict(d["basis"])
            coeffs = np.column_stack([np.asarray(d["coeffs"][ch], dtype=float) for ch in CHANNELS])
            rmse = np.array([d.get("rmse", {}).get(ch, np.nan) for ch in CHANNELS], dtype=float)
            m = cls(basis, coeffs, float(d["lambda"]), float(d.get("radius_m", PIPE_RADIUS)), rmse)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed disturbance map: {exc}") from None
        if coeffs.shape[0] != basis.size:
            raise ConfigError(f"map has {coeffs.shape[0]} coefficients, basis needs {basis.size}")
        return m


def _normalized(y, z, radius):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(~np.isfinite(z)):
        raise DomainError("positions must be finite")
    r2 = (y**2 + z**2) / radius**2
    if np.any(r2 > 1 + _INSIDE_TOL):
        i = int(np.argmax(r2.ravel()))
        raise DomainError(
            f"position ({y.ravel()[i]:.4g}, {z.ravel()[i]:.4g}) m lies outside the pipe cross-section "
            f"of radius {radius} m"
        )
    return y / radius, z / radius


def fit_disturbance_map(positions, wrenches, basis: Basis = Basis(), lam=1e-6, radius=PIPE_RADIUS) -> DisturbanceMap:
    """Per-channel ridge regression.

    Parameters
    ----------
    positions : (N, 2) array of (y, z) in metres
    wrenches : (N, 3) array of (f_y, f_z, tau_x)
    lam : float
        Ridge parameter on all coefficients.

    Raises
    ------
    InsufficientDataError
        With fewer than 3 samples per basis function.
    SingularSystemError
        If ``lam == 0`` and the design matrix is rank deficient.
    """
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    Y = np.asarray(wrenches, dtype=float).reshape(-1, 3)
    if len(P) != len(Y):
        raise ConfigError("positions and wrenches differ in length")
    if lam < 0 or not np.isfinite(lam):
        raise ConfigError("ridge parameter must be finite and >= 0")
    if len(P) < 3 * basis.size:
        raise InsufficientDataError(f"need >= {3 * basis.size} samples for {basis.size} basis functions, got {len(P)}")
    u, v = _normalized(P[:, 0], P[:, 1], radius)
    X = basis.design(u, v)
    n = X.shape[1]
    if lam == 0:
        rank = np.linalg.matrix_rank(X)
        if rank < n:
            raise SingularSystemError(f"design matrix has rank {rank} < {n} basis functions and lambda = 0")
        C, *_ = linalg.lstsq(X, Y)
    else:
        # augmented least squares is better conditioned than the normal equations
        Xa = np.vstack([X, np.sqrt(lam) * np.eye(n)])
        Ya = np.vstack([Y, np.zeros((n, 3))])
        C, *_ = linalg.lstsq(Xa, Ya)
    rmse = np.sqrt(np.mean((X @ C - Y) ** 2, axis=0))
    return DisturbanceMap(basis, C, float(lam), float(radius), rmse)


def eval_disturbance_map(m: DisturbanceMap, y, z) -> np.ndarray:
    """Wrench ``(f_y, f_z, tau_x)`` at points inside the pipe, shape ``shape(y) + (3,)``."""
    shape = np.broadcast(np.asarray(y), np.asarray(z)).shape
    yb, zb = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    u, v = _normalized(yb, zb, m.radius)
    return (m.basis.design(u, v) @ m.coeffs).reshape(shape + (3,))


def save_map(m: DisturbanceMap, path) -> None:
    atomic_write(Path(path), json.dumps(m.to_dict(), indent=2).encode())


def load_map(path) -> DisturbanceMap:
    try:
        return DisturbanceMap.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ------------------------------------------------------------------ samples


def write_samples(positions, wrenches, path) -> None:
    """Sample CSV with header ``y_m, z_m, fy_N, fz_N, taux_Nm``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_FIELDS)
    for p, f in zip(np.asarray(positions, dtype=float), np.asarray(wrenches, dtype=float)):
        w.writerow([repr(float(v)) for v in (*p, *f)])
    atomic_write(Path(path), buf.getvalue().encode())


def read_samples(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_samples`; returns ``(positions, wrenches)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SAMPLE_FIELDS:
            raise ParseError(f"expected header {','.join(SAMPLE_FIELDS)}", line=1)
        rows = []
        for ln, row in enumerate(reader, start=2):
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ParseError("non-numeric sample value", line=ln) from None
            if len(vals) != 5:
                raise ParseError(f"expected 5 columns, got {len(vals)}", line=ln)
            rows.append(vals)
    a = np.array(rows, dtype=float).reshape(-1, 5)
    return a[:, :2], a[:, 2:]


def synthetic_wrench(y, z, radius=PIPE_RADIUS, push=0.5, lift=0.3, roll=0.05):
    """Smooth mean wrench with an outward push and outward roll, mirror symmetric about y = 0."""
    u = np.asarray(y, dtype=float) / radius
    v = np.asarray(z, dtype=float) / radius
    bump = np.exp(-2.0 * (u**2 + v**2))
    fy = push * u * bump
    fz = -lift * (1 - u**2) * (1 + 0.5 * v)
    tx = roll * u * (1 + v) * bump
    return np.stack([fy, fz, tx], axis=-1)


def synthetic_samples(n, seed=0, noise=0.0, radius=PIPE_RADIUS, mirror=True):
    """Random positions in the disk with :func:`synthetic_wrench` values.

    With ``mirror`` every sample gets its exact ``y -> -y`` partner (``f_y``
    and ``tau_x`` negated, ``f_z`` kept, same noise draw mirrored), so the
    set is exactly mirror symmetric; ``n`` is then rounded up to even.
    """
    rng = np.random.default_rng(seed)
    m = (n + 1) // 2 if mirror else n
    r = radius * np.sqrt(rng.random(m))
    th = rng.uniform(0, 2 * np.pi, m)
    P = np.column_stack([r * np.cos(th), r * np.sin(th)])
    F = synthetic_wrench(P[:, 0], P[:, 1], radius)
    F = F + noise * rng.standard_normal(F.shape)
    if mirror:
        sign = np.array([-1.0, 1.0, -1.0])
        P = np.vstack([P, P * [-1.0, 1.0]])
        F = np.vstack([F, F * sign])
    return P, F
