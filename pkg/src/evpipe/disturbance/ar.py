"""Autoregressive noise models: Yule-Walker fitting and generation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy import signal as sps

from ..errors import ConfigError, InsufficientDataError, SingularSystemError

DEFAULT_ORDER = 8


@dataclass(frozen=True, eq=False)
class ARModel:
    """``x[n] = sum_k a_k x[n-k] + e[n]`` with ``e ~ N(0, sigma2)``."""

    coeffs: np.ndarray
    sigma2: float

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float).ravel()
        object.__setattr__(self, "coeffs", a)
        if a.size < 1:
            raise ConfigError("AR order must be >= 1")
        if not np.all(np.isfinite(a)) or not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ConfigError("coefficients must be finite and sigma2 > 0")
        if not self.is_stationary():
            raise ConfigError("AR model is not stationary (a characteristic root lies on or outside the unit circle)")

    @property
    def order(self) -> int:
        return self.coeffs.size

    def roots(self) -> np.ndarray:
        return np.roots(np.concatenate([[1.0], -self.coeffs]))

    def is_stationary(self) -> bool:
        return bool(np.all(np.abs(self.roots()) < 1.0))

    def autocovariance(self, max_lag=None) -> np.ndarray:
        """Theoretical autocovariance at lags ``0..max_lag`` (default: the order)."""
        p = self.order
        L = p if max_lag is None else int(max_lag)
        # gamma_k - sum_j a_j gamma_|k-j| = sigma2 * delta_k for k = 0..p
        A = np.eye(p + 1)
        for k in range(p + 1):
            for j in range(1, p + 1):
                A[k, abs(k - j)] -= self.coeffs[j - 1]
        b = np.zeros(p + 1)
        b[0] = self.sigma2
        g = list(np.linalg.solve(A, b))
        for k in range(p + 1, L + 1):
            g.append(sum(self.coeffs[j - 1] * g[k - j] for j in range(1, p + 1)))
        return np.array(g[:L + 1])

    def psd(self, freqs, fs=1.0) -> np.ndarray:
        """One-sided spectral density ``2 sigma2 / fs / |A(e^{iw})|^2``."""
        w = 2 * np.pi * np.asarray(freqs, dtype=float) / fs
        k = np.arange(1, self.order + 1)
        A = 1.0 - np.exp(-1j * np.outer(w, k)) @ self.coeffs
        return 2.0 * self.sigma2 / fs / np.abs(A) ** 2

    def to_dict(self) -> dict:
        return {"order": self.order, "coeffs": self.coeffs.tolist(), "sigma2": float(self.sigma2)}

    @classmethod
    def from_dict(cls, d) -> "ARModel":
        try:
            m = cls(d["coeffs"], float(d["sigma2"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed AR model: {exc}") from None
        if "order" in d and int(d["order"]) != m.order:
            raise ConfigError("order does not match the number of coefficients")
        return m


def save_ar_model(model: ARModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_ar_model(path) -> ARModel:
    try:
        return ARModel.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def sample_autocovariance(x, max_lag) -> np.ndarray:
    """Biased (divide by n) autocovariance of the mean-removed series."""
    x = np.asarray(x, dtype=float).ravel()
    x = x - x.mean()
    n = len(x)
    full = sps.correlate(x, x, mode="full", method="fft")
    return full[n - 1:n + max_lag] / n


def yule_walker_fit(x, order=DEFAULT_ORDER) -> ARModel:
    """Fit AR coefficients from sample autocovariances.

    The biased autocovariance sequence is positive definite for any
    non-constant series, so the Levinson-Durbin solution is stationary.

    Raises
    ------
    SingularSystemError
        For a constant (or numerically constant) series.
    InsufficientDataError
        With fewer than ``10 * order`` samples.
    """
    order = int(order)
    if order < 1:
        raise ConfigError("order must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    if len(x) < 10 * order:
        raise InsufficientDataError(f"need >= {10 * order} samples for order {order}, got {len(x)}")
    r = sample_autocovariance(x, order)
    # relative test: rounding leaves a tiny variance on constant inputs
    if np.ptp(x) == 0 or r[0] <= (1e-12 * abs(x.mean())) ** 2:
        raise SingularSystemError("constant signal: zero autocovariance, Yule-Walker system is singular")
    try:
        a = linalg.solve_toeplitz(r[:-1], r[1:])
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"Yule-Walker system is singular: {exc}") from None
    sigma2 = float(r[0] - np.dot(a, r[1:]))
    if not np.isfinite(sigma2) or sigma2 <= 0:
        raise SingularSystemError("Yule-Walker system is singular (non-positive innovation variance)")
    try:
        return ARModel(a, sigma2)
    except ConfigError as exc:
        raise SingularSystemError(f"ill-conditioned autocovariance: {exc}") from None


def default_burn_in(model: ARModel) -> int:
    """Enough samples for the slowest mode to decay by 1e-6 (at least 10 p)."""
    rho = float(np.max(np.abs(model.roots())))
    decay = int(np.ceil(np.log(1e-6) / np.log(rho))) if rho > 0 else 0
    return max(10 * model.order, decay, 100)


def ar_generate(model: ARModel, n, seed=0, burn_in=None) -> np.ndarray:
    """Filter Gaussian white noise through the AR model; the first ``burn_in`` samples are discarded."""
    n = int(n)
    if n < 0:
        raise ConfigError("n must be non-negative")
    burn_in = default_burn_in(model) if burn_in is None else int(burn_in)
    if burn_in < 10 * model.order:
        raise ConfigError(f"burn_in must be >= 10 * order = {10 * model.order}")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + burn_in) * np.sqrt(model.sigma2)
    y = sps.lfilter([1.0], np.concatenate([[1.0], -model.coeffs]), e)
    return y[burn_in:]


def fit_channels(residuals, order=DEFAULT_ORDER) -> list[ARModel]:
    """One independent AR model per column of ``residuals`` (N, C)."""
    R = np.asarray(residuals, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    return [yule_walker_fit(R[:, c], order) for c in range(R.shape[1])]


def generate_channels(models, n, seed=0) -> np.ndarray:
    """Independent draws from each model, shape (n, len(models))."""
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(models))]
    return np.column_stack([ar_generate(m, n, s) for m, s in zip(models, seeds)])
