"""Forward simulation: sphere head model, synthetic operators, grids, noise.

Geometry conventions
--------------------
Positions and radii are in mm, conductivity in S/m, dipole moments in A*m;
potentials come out in volts (the sphere kernel converts mm to meters
internally). Source depth is defined against the generating shell:
``depth_k = r_max_shell - ||position_k||``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import ConfigError, GeometryError
from .model import LeadField, Measurement, NoiseModel, SourceSpace

__all__ = [
    "SphereHeadModel",
    "SimulationConfig",
    "GroundTruth",
    "fibonacci_directions",
    "orientation_bases",
    "sphere_surface_potential",
    "build_sphere_leadfield",
    "build_synthetic_leadfield",
    "make_dual_grids",
    "simulate_measurement",
    "empirical_snr",
]

_CENTER_TOL_MM = 1e-9


def fibonacci_directions(count: int, polar_max_deg: float = 180.0) -> np.ndarray:
    """Deterministic, nearly uniform unit directions on a spherical cap.

    The golden-angle spiral places ``count`` points with equal solid-angle
    spacing over polar angles ``[0, polar_max_deg]`` about +z. The default
    180 covers the whole sphere; smaller values leave the lower cap bare,
    like a scalp montage that stops below the ears.
    """
    if count < 3:
        raise GeometryError("need at least 3 electrode directions")
    if not 0.0 < polar_max_deg <= 180.0:
        raise GeometryError("polar_max_deg must lie in (0, 180]")
    cos_min = np.cos(np.radians(polar_max_deg))
    i = np.arange(count, dtype=float)
    z = 1.0 - (1.0 - cos_min) * (i + 0.5) / count
    rho = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    dirs = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass(frozen=True)
class SphereHeadModel:
    """Homogeneous conducting sphere with surface electrodes.

    Parameters
    ----------
    radius_mm : float
        Sphere (electrode) radius.
    shell_mm : (float, float)
        Radial interval [r_min, r_max] hosting sources; must satisfy
        0 < r_min <= r_max < radius_mm.
    conductivity_s_per_m : float
        Homogeneous conductivity.
    electrode_directions : ndarray, shape (m, 3)
        Unit vectors; electrode positions are radius * direction.
    """

    radius_mm: float
    shell_mm: tuple
    conductivity_s_per_m: float
    electrode_directions: np.ndarray

    def __post_init__(self):
        dirs = np.array(self.electrode_directions, dtype=float, copy=True)
        dirs.flags.writeable = False
        object.__setattr__(self, "electrode_directions", dirs)
        object.__setattr__(self, "shell_mm", (float(self.shell_mm[0]), float(self.shell_mm[1])))
        r_min, r_max = self.shell_mm
        if not (0.0 < r_min <= r_max < self.radius_mm):
            raise GeometryError(
                f"source shell [{r_min}, {r_max}] must sit strictly inside radius {self.radius_mm}"
            )
        if self.conductivity_s_per_m <= 0:
            raise GeometryError("conductivity must be positive")
        if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] < 3:
            raise GeometryError("electrode_directions must be (m >= 3, 3)")
        if not np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-9):
            raise GeometryError("electrode directions must be unit vectors")

    @classmethod
    def with_fibonacci_electrodes(
        cls,
        n_electrodes: int,
        radius_mm: float = 100.0,
        shell_mm: tuple = (55.0, 85.0),
        conductivity_s_per_m: float = 0.33,
        polar_max_deg: float = 180.0,
    ) -> "SphereHeadModel":
        return cls(
            radius_mm=radius_mm,
            shell_mm=shell_mm,
            conductivity_s_per_m=conductivity_s_per_m,
            electrode_directions=fibonacci_directions(n_electrodes, polar_max_deg),
        )

    @property
    def m(self) -> int:
        return self.electrode_directions.shape[0]

    @property
    def max_depth_mm(self) -> float:
        return self.shell_mm[1] - self.shell_mm[0]

    def electrode_positions_mm(self) -> np.ndarray:
        return self.radius_mm * self.electrode_directions


def _tangent_pair(e: np.ndarray) -> tuple:
    """Deterministic orthonormal tangents completing the radial direction e."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(e)))] = 1.0
    t1 = np.cross(e, axis)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(e, t1)
    return t1, t2


def orientation_bases(positions: np.ndarray, d: int) -> np.ndarray:
    """Local frames per position: [radial, tangential, tangential][:d].

    A position at the exact centre has no radial direction; that is only
    representable with d = 3 (canonical basis) and raises otherwise.
    """
    positions = np.asarray(positions, dtype=float)
    if d not in (1, 2, 3):
        raise GeometryError("d must be 1, 2 or 3")
    n = positions.shape[0]
    basis = np.empty((n, d, 3))
    for k in range(n):
        r = np.linalg.norm(positions[k])
        if r < _CENTER_TOL_MM:
            if d != 3:
                raise GeometryError(
                    f"source {k} at the centre has no radial direction (d={d})"
                )
            basis[k] = np.eye(3)
            continue
        e = positions[k] / r
        frame = [e]
        if d > 1:
            t1, t2 = _tangent_pair(e)
            frame.extend([t1, t2])
        basis[k] = np.array(frame[:d])
    return basis


def sphere_surface_potential(
    position_mm: np.ndarray,
    moment: np.ndarray,
    model: SphereHeadModel,
) -> np.ndarray:
    """Surface potential of a current dipole in a homogeneous sphere.

    Evaluates, at every electrode, the closed-form sum of the interior
    Legendre series for the no-flux (insulating scalp) boundary condition:

        V = [p_r * S_r + (p . rhat - u p_r) * S_t] / (4 pi sigma R^2)

    with f = ||r0||/R, u = cos(angle between r0 and the electrode),
    D = sqrt(1 - 2 f u + f^2), and

        S_r = 2 (u - f)/D^3 + (2 u - f)/(D (1 + D))
        S_t = 2/D^3 + C

    where the series tail C is evaluated in one of two algebraically
    identical but differently conditioned forms, switched on |u| (the
    first cancels near |u| = 1, the second near u = f/2 <= 0.5):

        C = (1 + D - 2 u^2 + u f) / (D (1 + D) (1 - u^2))       |u| <= 0.7
        C = (f - 2 u)^2 / (D (1 + D) (D - 1 - u f + 2 u^2))     |u| >  0.7

    The f -> 0 limit reduces exactly to the central-dipole pattern
    3 (p . rhat) / (4 pi sigma R^2).

    Returns
    -------
    ndarray, shape (m,)
        Raw (not re-referenced) electrode potentials in volts.
    """
    position_mm = np.asarray(position_mm, dtype=float)
    moment = np.asarray(moment, dtype=float)
    radius_m = model.radius_mm * 1e-3
    b_mm = np.linalg.norm(position_mm)
    if b_mm >= model.radius_mm:
        raise GeometryError(
            f"dipole at radius {b_mm:.3f} mm is not strictly inside the sphere"
        )
    rhat = model.electrode_directions
    if b_mm < _CENTER_TOL_MM:
        e = np.array([0.0, 0.0, 1.0])  # arbitrary; the f=0 value is axis-free
        f = 0.0
    else:
        e = position_mm / b_mm
        f = b_mm / model.radius_mm

    u = rhat @ e
    u = np.clip(u, -1.0, 1.0)
    p_r = float(moment @ e)
    p_dot_rhat = rhat @ moment

    D = np.sqrt(1.0 - 2.0 * f * u + f * f)
    one_plus = 1.0 + D
    s_r = 2.0 * (u - f) / D**3 + (2.0 * u - f) / (D * one_plus)

    c = np.empty_like(u)
    near_axis = np.abs(u) > 0.7
    ua, Da, oa = u[near_axis], D[near_axis], one_plus[near_axis]
    h = Da - 1.0 - ua * f + 2.0 * ua * ua
    c[near_axis] = (f - 2.0 * ua) ** 2 / (Da * oa * h)
    ub, Db, ob = u[~near_axis], D[~near_axis], one_plus[~near_axis]
    n2 = 1.0 + Db - 2.0 * ub * ub + ub * f
    c[~near_axis] = n2 / (Db * ob * (1.0 - ub * ub))
    s_t = 2.0 / D**3 + c

    numer = p_r * s_r + (p_dot_rhat - u * p_r) * s_t
    return numer / (4.0 * np.pi * model.conductivity_s_per_m * radius_m**2)


def build_sphere_leadfield(model: SphereHeadModel, space: SourceSpace) -> LeadField:
    """Analytic lead field; every column is average-referenced.

    Column (k*d + i) holds the electrode potentials of a unit dipole with
    moment ``orientation_basis[k, i]`` at ``positions[k]``.
    """
    radii = np.linalg.norm(space.positions, axis=1)
    if np.any(radii >= model.radius_mm):
        bad = int(np.flatnonzero(radii >= model.radius_mm)[0])
        raise GeometryError(f"source {bad} lies on or outside the electrode sphere")
    if space.d < 3 and np.any(radii < _CENTER_TOL_MM):
        raise GeometryError("a centre source requires d=3 (no radial direction)")
    m, n, d = model.m, space.n, space.d
    entries = np.empty((m, n * d))
    for k in range(n):
        for i in range(d):
            col = sphere_surface_potential(
                space.positions[k], space.orientation_basis[k, i], model
            )
            entries[:, k * d + i] = col - col.mean()
    return LeadField(entries=entries, n=n, d=d)


def build_synthetic_leadfield(
    m: int,
    n: int,
    d: int,
    depth_decay_exponent: float,
    seed: int,
    depths: Optional[np.ndarray] = None,
    depth_range_mm: tuple = (0.0, 30.0),
    shell_rmax_mm: float = 85.0,
    offset_mm: float = 1.0,
):
    """Random Gaussian operator with depth-graded block scales.

    Block ``k`` is i.i.d. N(0, 1) scaled by ``(depth_k + offset)^(-decay)``,
    so expected block norms fall off polynomially with depth — a cheap
    stand-in for the sphere model in solver-level tests.

    Returns
    -------
    (LeadField, SourceSpace)
    """
    if depth_decay_exponent < 0:
        raise ConfigError("depth decay exponent must be >= 0")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if depths is None:
        depths = rng.uniform(depth_range_mm[0], depth_range_mm[1], size=n)
    else:
        depths = np.asarray(depths, dtype=float)
        if depths.shape != (n,):
            raise ConfigError(f"depths must have shape ({n},)")
    dirs = rng.standard_normal((n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    positions = dirs * (shell_rmax_mm - depths)[:, None]
    scales = (depths + offset_mm) ** (-depth_decay_exponent)
    entries = rng.standard_normal((m, n * d))
    entries *= np.repeat(scales, d)[None, :]
    space = SourceSpace(
        positions=positions, depths=depths, orientation_basis=orientation_bases(positions, d)
    )
    return LeadField(entries=entries, n=n, d=d), space


@dataclass(frozen=True)
class SimulationConfig:
    """Shared knobs of one simulated trial sweep.

    ``source_cap_deg`` restricts both grids to directions within that
    half-angle of +z; 180 (the default) means the whole shell.
    """

    n_sources_per_depth: int
    depth_bins_mm: tuple
    noise_percent: float
    rng_seed: int
    grid_jitter_max_mm: float = 3.0
    source_cap_deg: float = 180.0

    def __post_init__(self):
        bins = tuple((float(lo), float(hi)) for lo, hi in self.depth_bins_mm)
        object.__setattr__(self, "depth_bins_mm", bins)
        if self.n_sources_per_depth < 0:
            raise ConfigError("n_sources_per_depth must be >= 0")
        if self.noise_percent < 0:
            raise ConfigError("noise_percent must be >= 0")
        if self.grid_jitter_max_mm <= 0:
            raise ConfigError("grid jitter bound must be positive")
        if not 0.0 < self.source_cap_deg <= 180.0:
            raise ConfigError("source_cap_deg must lie in (0, 180]")
        for lo, hi in bins:
            if not (0.0 <= lo < hi):
                raise ConfigError(f"invalid depth bin [{lo}, {hi}]")


def _uniform_direction(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    norm = np.linalg.norm(v)
    while norm < 1e-12:
        v = rng.standard_normal(3)
        norm = np.linalg.norm(v)
    return v / norm


def _cap_direction(rng, cos_min: float) -> np.ndarray:
    """Uniform unit direction on the cap ``{v : v_z >= cos_min}`` (area measure)."""
    z = rng.uniform(cos_min, 1.0)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    rho = np.sqrt(max(0.0, 1.0 - z * z))
    return np.array([rho * np.cos(phi), rho * np.sin(phi), z])


def make_dual_grids(
    model: SphereHeadModel,
    config: SimulationConfig,
    d: int = 3,
):
    """Depth-stratified simulation and reconstruction grids that never share a point.

    Both grids draw ``n_sources_per_depth`` locations per depth bin inside
    the model shell (restricted to the angular cap when the config sets
    one). Each simulation source is an isotropic jitter (at most
    ``grid_jitter_max_mm``, staying inside the shell, its depth bin and the
    cap) of its reconstruction partner, so the inverse-crime distance to
    the reconstruction grid is bounded by the jitter. After 100 rejected
    jitter draws the fallback rotates at constant radius toward the cap
    axis, which preserves the depth exactly and cannot leave the cap.

    Returns
    -------
    (SourceSpace, SourceSpace, ndarray)
        Simulation grid, reconstruction grid, and for every simulation
        source the index of its nearest reconstruction source.
    """
    r_min, r_max = model.shell_mm
    max_depth = r_max - r_min
    for lo, hi in config.depth_bins_mm:
        if hi > max_depth + 1e-12:
            raise GeometryError(
                f"depth bin [{lo}, {hi}] exceeds shell depth range [0, {max_depth}]"
            )
    if config.n_sources_per_depth == 0 or not config.depth_bins_mm:
        empty = lambda: SourceSpace(  # noqa: E731 - two independent instances
            positions=np.zeros((0, 3)),
            depths=np.zeros(0),
            orientation_basis=np.zeros((0, d, 3)),
        )
        return empty(), empty(), np.zeros(0, dtype=int)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.rng_seed)))
    recon_pos, recon_depth, sim_pos, sim_depth = [], [], [], []
    jit = config.grid_jitter_max_mm
    cos_cap = np.cos(np.radians(config.source_cap_deg))
    for lo, hi in config.depth_bins_mm:
        for _ in range(config.n_sources_per_depth):
            depth = rng.uniform(lo, hi)
            pos = _cap_direction(rng, cos_cap) * (r_max - depth)
            recon_pos.append(pos)
            recon_depth.append(depth)
            partner = None
            for _attempt in range(100):
                offset = _uniform_direction(rng) * (jit * rng.uniform() ** (1.0 / 3.0))
                cand = pos + offset
                radius = np.linalg.norm(cand)
                cand_depth = r_max - radius
                dist = np.linalg.norm(cand - pos)
                if (
                    r_min <= radius <= r_max
                    and lo <= cand_depth <= hi
                    and 0.0 < dist <= jit
                    and cand[2] >= cos_cap * radius
                ):
                    partner = (cand, cand_depth)
                    break
            if partner is None:
                # rotate at constant radius: same depth, chord jit/2 <= jit
                radius = np.linalg.norm(pos)
                e = pos / radius
                t = np.array([0.0, 0.0, 1.0]) - e[2] * e  # poleward tangent
                t_norm = np.linalg.norm(t)
                t = t / t_norm if t_norm > 1e-6 else _tangent_pair(e)[0]
                cand = pos + t * (jit / 2.0)
                cand *= radius / np.linalg.norm(cand)
                partner = (cand, depth)
            sim_pos.append(partner[0])
            sim_depth.append(partner[1])
    recon_pos = np.array(recon_pos)
    sim_pos = np.array(sim_pos)
    recon = SourceSpace(
        positions=recon_pos,
        depths=np.array(recon_depth),
        orientation_basis=orientation_bases(recon_pos, d),
    )
    sim = SourceSpace(
        positions=sim_pos,
        depths=np.array(sim_depth),
        orientation_basis=orientation_bases(sim_pos, d),
    )
    dist, nearest = cKDTree(recon_pos).query(sim_pos)
    if np.any(dist == 0.0):
        raise GeometryError("simulation grid reproduced a reconstruction point exactly")
    if np.any(dist > jit + 1e-9):
        raise GeometryError("jitter construction exceeded the nearest-neighbour bound")
    return sim, recon, nearest.astype(int)


@dataclass(frozen=True)
class GroundTruth:
    """Provenance of one simulated measurement."""

    source_index: int
    moment: tuple
    noise_percent: float
    seed: int
    sigma: float
    depth_mm: Optional[float] = None


def simulate_measurement(
    lead_field: LeadField,
    true_index: int,
    moment: np.ndarray,
    noise_percent: float,
    seed: int,
    space: Optional[SourceSpace] = None,
):
    """Single-source measurement with noise scaled to the clean signal.

    The noise standard deviation follows
    ``sigma = noise_percent * ||L x_true||_2 / sqrt(m)``, which makes the
    model SNR equal to 1 + 1/noise_percent^2. ``noise_percent = 0`` yields
    ``y = L x_true`` exactly; the returned NoiseModel then carries a
    floor variance (1e-15 of the signal scale, squared) so that it remains
    positive definite for downstream solvers.

    Returns
    -------
    (Measurement, GroundTruth)
    """
    if not 0 <= true_index < lead_field.n:
        raise ValueError(f"true_index {true_index} out of range [0, {lead_field.n})")
    moment = np.asarray(moment, dtype=float)
    if moment.shape != (lead_field.d,):
        raise ValueError(f"moment must have shape ({lead_field.d},)")
    if noise_percent < 0:
        raise ValueError("noise_percent must be >= 0")
    y_clean = lead_field.block(true_index) @ moment
    signal_rms = np.linalg.norm(y_clean) / np.sqrt(lead_field.m)
    if signal_rms == 0.0:
        raise ValueError("true source produces no signal")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if noise_percent > 0:
        sigma = noise_percent * signal_rms
        y = y_clean + sigma * rng.standard_normal(lead_field.m)
    else:
        sigma = 1e-15 * signal_rms
        y = y_clean.copy()
    noise = NoiseModel(
        mean=np.zeros(lead_field.m), covariance=sigma**2 * np.eye(lead_field.m)
    )
    truth = GroundTruth(
        source_index=int(true_index),
        moment=tuple(float(v) for v in moment),
        noise_percent=float(noise_percent),
        seed=int(seed),
        sigma=float(sigma),
        depth_mm=float(space.depths[true_index]) if space is not None else None,
    )
    return Measurement(values=y, noise=noise), truth


def empirical_snr(lead_field: LeadField, x_true: np.ndarray, noise: NoiseModel) -> float:
    """Model SNR trace{L x x^T L^T} / trace{Gamma} + 1 for a realized source."""
    x_true = np.asarray(x_true, dtype=float)
    if x_true.shape != (lead_field.n * lead_field.d,):
        raise ValueError("x_true has the wrong length")
    tr = float(np.trace(noise.covariance))
    if tr <= 0:
        raise ValueError("noise covariance trace must be positive")
    signal = lead_field.entries @ x_true
    return float(signal @ signal) / tr + 1.0
