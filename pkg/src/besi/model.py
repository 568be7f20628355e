"""Core domain types and the Gaussian measurement model.

The measurement model throughout the package is

    y = L x + xi,     xi ~ N(xi_mean, Gamma)

with a block-structured unknown ``x``: ``n`` source locations, ``d``
coefficients per location, stored as one flat vector of length ``d * n``
(location-major, i.e. block ``k`` occupies ``x[k*d:(k+1)*d]``).

All types are immutable after construction; arrays are copied in and
marked read-only so instances can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import DefiniteMatrixError

__all__ = [
    "LeadField",
    "SourceSpace",
    "SourceEstimate",
    "NoiseModel",
    "Measurement",
    "whiten",
    "residual_norm",
]


def _frozen(a, dtype=float) -> np.ndarray:
    """Copy to a contiguous read-only float array."""
    out = np.array(a, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LeadField:
    """Linear forward operator with ``m`` sensors and ``n`` source blocks of size ``d``.

    Parameters
    ----------
    entries : ndarray, shape (m, d*n)
        Dense operator matrix; columns are grouped per source location.
    n : int
        Number of source locations.
    d : int
        Coefficients per location (1, 2 or 3 for oriented dipoles).
    """

    entries: np.ndarray
    n: int
    d: int

    def __post_init__(self):
        entries = _frozen(self.entries)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 2:
            raise ValueError(f"lead field must be 2-D, got shape {entries.shape}")
        if self.n <= 0 or self.d <= 0:
            raise ValueError("n and d must be positive")
        if entries.shape[1] != self.n * self.d:
            raise ValueError(
                f"lead field has {entries.shape[1]} columns, expected n*d = {self.n * self.d}"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("lead field entries must be finite")
        norms = self.block_norms()
        if np.any(norms <= 0.0):
            bad = int(np.flatnonzero(norms <= 0.0)[0])
            raise ValueError(f"lead-field block {bad} has zero Frobenius norm")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def block(self, k: int) -> np.ndarray:
        """Columns of location ``k`` as an (m, d) view."""
        return self.entries[:, k * self.d : (k + 1) * self.d]

    def block_norms(self) -> np.ndarray:
        """Per-location Frobenius norms ||L_k||_F, shape (n,)."""
        sq = self.entries**2
        return np.sqrt(sq.reshape(self.m, self.n, self.d).sum(axis=(0, 2)))


@dataclass(frozen=True)
class SourceSpace:
    """Geometry of the candidate sources.

    positions are in mm; ``depths`` follow the convention
    ``depth_k = r_max_shell - ||position_k||`` of the generating shell.
    ``orientation_basis[k]`` holds ``d`` orthonormal rows spanning the
    moment space of location ``k``.
    """

    positions: np.ndarray
    depths: np.ndarray
    orientation_basis: np.ndarray

    def __post_init__(self):
        pos = _frozen(self.positions)
        dep = _frozen(self.depths)
        bas = _frozen(self.orientation_basis)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "depths", dep)
        object.__setattr__(self, "orientation_basis", bas)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got {pos.shape}")
        n = pos.shape[0]
        if dep.shape != (n,):
            raise ValueError("depths must have one entry per position")
        if np.any(dep < 0):
            raise ValueError("depths must be non-negative")
        if bas.ndim != 3 or bas.shape[0] != n or bas.shape[2] != 3:
            raise ValueError(f"orientation basis must be (n, d, 3), got {bas.shape}")
        if not 1 <= bas.shape[1] <= 3:
            raise ValueError("d must be 1, 2 or 3")
        gram = np.einsum("kij,klj->kil", bas, bas)
        eye = np.eye(bas.shape[1])
        if not np.allclose(gram, eye[None, :, :], atol=1e-9):
            raise ValueError("orientation basis rows must be orthonormal")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.orientation_basis.shape[1]


@dataclass(frozen=True)
class SourceEstimate:
    """Flat coefficient vector plus the block size needed to interpret it."""

    coefficients: np.ndarray
    d: int

    def __post_init__(self):
        coef = _frozen(self.coefficients)
        object.__setattr__(self, "coefficients", coef)
        if coef.ndim != 1:
            raise ValueError("coefficients must be a vector")
        if self.d <= 0 or coef.size % self.d != 0:
            raise ValueError(f"coefficient length {coef.size} not divisible by d={self.d}")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be finite")

    @property
    def n(self) -> int:
        return self.coefficients.size // self.d

    def block_amplitudes(self) -> np.ndarray:
        """Per-location Euclidean amplitudes a_k = ||x_k||_2, shape (n,)."""
        return np.linalg.norm(self.coefficients.reshape(self.n, self.d), axis=1)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian noise xi ~ N(mean, covariance) with SPD covariance.

    The Cholesky factor is computed once at construction; scalar and
    diagonal covariances are detected (exact zero off-diagonals) and
    whitening short-circuits to element-wise scaling for them.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean)
        cov = _frozen(self.covariance)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if mean.ndim != 1:
            raise ValueError("noise mean must be a vector")
        m = mean.size
        if cov.shape != (m, m):
            raise ValueError(f"covariance must be ({m}, {m}), got {cov.shape}")
        scale = np.abs(cov).max()
        if scale == 0.0 or not np.all(np.isfinite(cov)):
            raise DefiniteMatrixError("noise covariance must be finite and nonzero")
        if np.abs(cov - cov.T).max() > 64 * np.finfo(float).eps * scale:
            raise DefiniteMatrixError("noise covariance is not symmetric")
        diag = np.diag(cov)
        off_diag_zero = np.count_nonzero(cov - np.diag(diag)) == 0
        is_diagonal = bool(off_diag_zero and np.all(diag > 0))
        is_scalar = bool(is_diagonal and np.all(diag == diag[0]))
        if is_diagonal:
            chol = None
        else:
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise DefiniteMatrixError("noise covariance is not positive definite") from exc
        if off_diag_zero and np.any(diag <= 0):
            raise DefiniteMatrixError("noise covariance is not positive definite")
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_is_diagonal", is_diagonal)
        object.__setattr__(self, "_is_scalar", is_scalar)

    @property
    def m(self) -> int:
        return self.mean.size

    def whiten_array(self, a: np.ndarray) -> np.ndarray:
        """Apply W with W^T W = covariance^{-1} to the rows of ``a``."""
        if self._is_scalar:
            return a / np.sqrt(self.covariance[0, 0])
        if self._is_diagonal:
            scale = 1.0 / np.sqrt(np.diag(self.covariance))
            return a * scale if a.ndim == 1 else a * scale[:, None]
        return solve_triangular(self._chol, a, lower=True)


@dataclass(frozen=True)
class Measurement:
    """Sensor data vector together with its noise model."""

    values: np.ndarray
    noise: NoiseModel

    def __post_init__(self):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("measurement values must be a vector")
        if values.size != self.noise.m:
            raise ValueError(
                f"measurement has {values.size} channels, noise model has {self.noise.m}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("measurement values must be finite")


def whiten(lead_field: LeadField, measurement: Measurement):
    """Whiten the operator and the (mean-subtracted) data.

    Returns ``(W @ L, W @ (y - xi_mean))`` where ``W^T W = Gamma^{-1}``,
    so ordinary least squares on the whitened pair reproduces the
    Gamma-weighted residual of the original problem.

    Returns
    -------
    (ndarray, ndarray)
        Whitened operator, shape (m, d*n), and whitened data, shape (m,).
    """
    noise = measurement.noise
    if lead_field.m != noise.m:
        raise ValueError(
            f"lead field has {lead_field.m} rows, measurement has {noise.m} channels"
        )
    lw = noise.whiten_array(lead_field.entries)
    yw = noise.whiten_array(measurement.values - noise.mean)
    return lw, yw


def residual_norm(lead_field: LeadField, x, measurement: Measurement) -> float:
    """Squared Mahalanobis residual (y - L x - xi_mean)^T Gamma^{-1} (...)."""
    coef = x.coefficients if isinstance(x, SourceEstimate) else np.asarray(x, float)
    if coef.shape != (lead_field.entries.shape[1],):
        raise ValueError(
            f"coefficient vector has shape {coef.shape}, expected ({lead_field.entries.shape[1]},)"
        )
    noise = measurement.noise
    r = measurement.values - lead_field.entries @ coef - noise.mean
    z = noise.whiten_array(r)
    return float(z @ z)
