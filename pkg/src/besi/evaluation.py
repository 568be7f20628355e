"""Spatial accuracy metrics for source estimates.

The headline metric is the earth-mover (1-Wasserstein) distance between
the normalized amplitude distribution of an estimate and that of the
ground truth, with Euclidean ground cost in millimetres. For arbitrary
pairs it is computed exactly as a transportation linear program; when the
truth is a single point source the closed form (mass-weighted mean
distance to the point) is used instead. Depth-localization quality is
tracked by the depth of the strongest location, a banded error table, and
an ordinary least-squares regression of estimated on true depth.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.stats import linregress

from .exceptions import DegenerateDataError, NumericalError
from .model import SourceEstimate, SourceSpace

__all__ = [
    "MassDistribution",
    "emd",
    "emd_single_truth",
    "depth_of_max",
    "DepthErrorTable",
    "depth_error_bins",
    "SummaryStats",
    "summarize",
    "RegressionResult",
    "depth_regression",
]

_MASS_THRESHOLD = 1e-9  # relative to the largest atom


@dataclass(frozen=True)
class MassDistribution:
    """Discrete probability distribution over points in space (mm)."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (n, 3)")
        if m.shape != (pos.shape[0],):
            raise ValueError("masses must have one entry per position")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(m))):
            raise ValueError("positions and masses must be finite")
        if np.any(m < 0):
            raise ValueError("masses must be non-negative")
        total = m.sum()
        if total <= 0:
            raise DegenerateDataError("distribution has no mass")
        m = m / total
        pos = pos.copy()
        m.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_estimate(
        cls,
        estimate: SourceEstimate,
        space: SourceSpace,
        mode: str = "amplitude",
        threshold: float = _MASS_THRESHOLD,
    ) -> "MassDistribution":
        """Normalized block-amplitude (or squared-amplitude) distribution.

        Atoms whose raw mass falls below ``threshold`` times the largest
        are dropped; an estimate that is identically zero has no mass
        distribution and raises :class:`DegenerateDataError`.
        """
        amps = estimate.block_amplitudes()
        if amps.shape[0] != space.n:
            raise ValueError("estimate and source space location counts differ")
        if mode == "amplitude":
            m = amps.copy()
        elif mode == "squared":
            m = amps**2
        else:
            raise ValueError(f"unknown mass mode {mode!r}")
        peak = m.max()
        if peak <= 0:
            raise DegenerateDataError("estimate is identically zero")
        m[m < threshold * peak] = 0.0
        keep = m > 0
        return cls(positions=space.positions[keep], masses=m[keep])

    def prune(self) -> "MassDistribution":
        keep = self.masses > 0
        if np.all(keep):
            return self
        return MassDistribution(self.positions[keep], self.masses[keep])


def emd(a: MassDistribution, b: MassDistribution) -> float:
    """Exact earth-mover distance between two unit-mass distributions (mm).

    Solves the transportation linear program

        min sum_ij c_ij f_ij   s.t.  sum_j f_ij = a_i,  sum_i f_ij = b_j,
        f_ij >= 0,

    with c_ij the Euclidean distance between atom positions, via the HiGHS
    simplex/interior solvers behind :func:`scipy.optimize.linprog`.
    """
    a = a.prune()
    b = b.prune()
    na, nb = a.masses.size, b.masses.size
    if na == 1:
        return emd_single_truth(b, a.positions[0])
    if nb == 1:
        return emd_single_truth(a, b.positions[0])
    diff = a.positions[:, None, :] - b.positions[None, :, :]
    cost = np.sqrt((diff**2).sum(axis=2)).ravel()
    idx = np.arange(na * nb)
    rows = np.concatenate([idx // nb, na + (idx % nb)])
    cols = np.concatenate([idx, idx])
    a_eq = sp.coo_matrix(
        (np.ones(2 * na * nb), (rows, cols)), shape=(na + nb, na * nb)
    ).tocsr()
    b_eq = np.concatenate([a.masses, b.masses])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:  # pragma: no cover - feasible by construction
        raise NumericalError(f"transport LP failed: {res.message}")
    return float(res.fun)


def emd_single_truth(estimate: MassDistribution, point_mm: np.ndarray) -> float:
    """Earth-mover distance to a single point mass: mean distance under the mass."""
    point = np.asarray(point_mm, dtype=float).reshape(3)
    dists = np.linalg.norm(estimate.positions - point[None, :], axis=1)
    return float(np.dot(estimate.masses, dists))


def depth_of_max(estimate: SourceEstimate, space: SourceSpace) -> float:
    """Depth (mm) of the location with the largest block amplitude.

    Ties resolve to the lowest index, matching ``np.argmax``.
    """
    amps = estimate.block_amplitudes()
    if amps.shape[0] != space.n:
        raise ValueError("estimate and source space location counts differ")
    if amps.max() <= 0.0:
        raise DegenerateDataError("estimate is identically zero; no maximum")
    return float(space.depths[int(np.argmax(amps))])


# depth-error bands, worst to best, in millimetres
_BIN_EDGES = (20.0, 15.0, 10.0, 5.0, 1.0)
_BIN_LABELS = ("> 20", "(15, 20]", "(10, 15]", "(5, 10]", "(1, 5]", "<= 1")


@dataclass(frozen=True)
class DepthErrorTable:
    """Counts and fractions of absolute depth errors per band."""

    labels: Tuple[str, ...]
    counts: np.ndarray
    fractions: np.ndarray

    def as_rows(self):
        return [
            (lab, int(c), float(f))
            for lab, c, f in zip(self.labels, self.counts, self.fractions)
        ]


def depth_error_bins(depth_true: Sequence[float], depth_est: Sequence[float]) -> DepthErrorTable:
    """Band the absolute depth errors into {>20, 15-20, 10-15, 5-10, 1-5, <=1} mm."""
    err = np.abs(np.asarray(depth_est, dtype=float) - np.asarray(depth_true, dtype=float))
    if err.size == 0:
        raise ValueError("need at least one depth pair")
    counts = np.zeros(len(_BIN_LABELS), dtype=int)
    counts[0] = int(np.sum(err > _BIN_EDGES[0]))
    for i in range(len(_BIN_EDGES) - 1):
        hi, lo = _BIN_EDGES[i], _BIN_EDGES[i + 1]
        counts[i + 1] = int(np.sum((err > lo) & (err <= hi)))
    counts[-1] = int(np.sum(err <= _BIN_EDGES[-1]))
    return DepthErrorTable(
        labels=_BIN_LABELS, counts=counts, fractions=counts / err.size
    )


@dataclass(frozen=True)
class SummaryStats:
    n: int
    median: float
    std: float
    iqr: float


def summarize(values: Sequence[float]) -> SummaryStats:
    """Median, sample standard deviation and interquartile range.

    The standard deviation uses the n-1 denominator; a single observation
    reports zero spread. Quartiles follow numpy's default linear
    interpolation.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value")
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    q75, q25 = np.percentile(v, [75.0, 25.0])
    return SummaryStats(
        n=int(v.size), median=float(np.median(v)), std=std, iqr=float(q75 - q25)
    )


@dataclass(frozen=True)
class RegressionResult:
    """Ordinary least squares fit of estimated depth on true depth."""

    slope: float
    intercept: float
    slope_ci: Tuple[float, float]
    intercept_ci: Tuple[float, float]
    r_value: float
    n: int


def depth_regression(
    depth_true: Sequence[float], depth_est: Sequence[float]
) -> RegressionResult:
    """OLS depth calibration line with normal-approximation 95% intervals.

    A perfectly depth-calibrated estimator has slope 1 and intercept 0;
    shallow bias shows up as slope < 1. Intervals are point estimate
    +/- 1.96 standard errors.
    """
    t = np.asarray(depth_true, dtype=float)
    e = np.asarray(depth_est, dtype=float)
    if t.size != e.size or t.size < 3:
        raise ValueError("need at least three depth pairs")
    if np.ptp(t) == 0:
        raise ValueError("true depths are constant; regression undefined")
    fit = linregress(t, e)
    s_lo = fit.slope - 1.96 * fit.stderr
    s_hi = fit.slope + 1.96 * fit.stderr
    i_lo = fit.intercept - 1.96 * fit.intercept_stderr
    i_hi = fit.intercept + 1.96 * fit.intercept_stderr
    return RegressionResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_ci=(float(s_lo), float(s_hi)),
        intercept_ci=(float(i_lo), float(i_hi)),
        r_value=float(fit.rvalue),
        n=int(t.size),
    )
