"""MAP solvers for block-structured linear inverse problems.

All solvers share the measurement model ``y = L x + xi`` with Gaussian
noise and operate internally in whitened coordinates (the noise mean is
subtracted and the operator/data are premultiplied by the inverse Cholesky
factor of the noise covariance once, at ingestion). Quadratic subproblems
use the dual (m x m) form whenever the sensor count is below the current
coefficient dimension, and tolerate exactly-zero prior variances there.

Three tiers of estimator are provided:

* fixed quadratic prior: :func:`solve_wmne`;
* fixed sparsity-promoting prior, minimized by iteratively reweighted
  quadratic majorization: :func:`solve_mm_lqa`;
* hierarchical (conditionally Gaussian / conditional Laplace families)
  with per-location variance or rate hyperparameters, optimized either by
  alternating maximization (IAS) or by expectation-maximization:
  :func:`solve_ias_cg`, :func:`solve_em_cg`, :func:`solve_wcl`,
  :func:`solve_wcgl`.

:func:`solve` dispatches a :class:`~besi.weighting.PriorSpec` to the right
routine.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq, newton
from scipy.special import kve

from .bessel import kv_ratio
from .exceptions import ConfigError, DegenerateDataError, NumericalError, UnsupportedModelError
from .model import LeadField, Measurement, NoiseModel, SourceEstimate
from .weighting import Optimizer, PriorFamily, PriorSpec

__all__ = [
    "RootSolver",
    "SolverConfig",
    "SolveTrace",
    "solve_wmne",
    "solve_mm_lqa",
    "solve_ias_cg",
    "solve_em_cg",
    "solve_wcl",
    "solve_wcgl",
    "solve",
    "gamma_update_cg",
]

_EM_Z_FLOOR = 1e-8  # below this the Gamma-branch E-step argument is clamped
_TINY = 1e-300


class RootSolver(str, enum.Enum):
    NEWTON = "newton"
    BISECTION = "bisection"


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budgets and numerical guards shared by every solver."""

    max_outer_iters: int = 200
    max_inner_iters: int = 200
    outer_tol: float = 1e-6
    inner_tol: float = 1e-8
    lqa_epsilon: float = 1e-8
    bessel_delta: float = 1e-12
    rescale_mu: float = 0.9
    root_solver: RootSolver = RootSolver.NEWTON

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ConfigError("iteration budgets must be >= 1")
        if min(self.outer_tol, self.inner_tol, self.lqa_epsilon) <= 0:
            raise ConfigError("tolerances must be positive")
        if self.bessel_delta < 0:
            raise ConfigError("bessel_delta must be >= 0")
        if not 0 < self.rescale_mu < 1:
            raise ConfigError("rescale_mu must lie in (0, 1)")
        object.__setattr__(self, "root_solver", RootSolver(self.root_solver))


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of one solver run."""

    solver_id: str = ""
    status: str = "converged"
    iterations: int = 0
    objectives: List[float] = field(default_factory=list)
    x_change: List[float] = field(default_factory=list)
    gamma_summary: List[Tuple[float, float, float]] = field(default_factory=list)
    gamma_final: Optional[np.ndarray] = None

    def record_gamma(self, gamma: np.ndarray) -> None:
        self.gamma_summary.append(
            (float(gamma.min()), float(np.median(gamma)), float(gamma.max()))
        )


# ---------------------------------------------------------------------------
# shared plumbing


def _as_operator(lead_field) -> Tuple[np.ndarray, int, int]:
    if isinstance(lead_field, LeadField):
        return lead_field.entries, lead_field.n, lead_field.d
    raise TypeError("lead_field must be a LeadField")


def _ingest(lead_field, y, noise: NoiseModel):
    """Whitened operator/data plus block bookkeeping."""
    entries, n, d = _as_operator(lead_field)
    values = y.values if isinstance(y, Measurement) else np.asarray(y, dtype=float)
    if values.shape != (entries.shape[0],):
        raise ValueError("data vector length does not match the lead field")
    lw = noise.whiten_array(entries)
    yw = noise.whiten_array(values - noise.mean)
    return lw, yw, n, d


def _ridge_solve_variance(lw: np.ndarray, yw: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """argmin ||yw - lw x||^2 + x^T diag(1/variances) x, allowing zero variances.

    Uses x = V L^T (L V L^T + I)^{-1} y (dual) when m < dim or any variance
    is (near) zero, otherwise the primal normal equations.
    """
    m, dim = lw.shape
    vmax = variances.max() if variances.size else 0.0
    primal_ok = dim <= m and vmax > 0 and variances.min() > 1e-14 * vmax
    if primal_ok:
        a = lw.T @ lw
        a[np.diag_indices_from(a)] += 1.0 / variances
        try:
            fac = cho_factor(a, check_finite=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
            raise NumericalError("primal ridge system not positive definite") from exc
        return cho_solve(fac, lw.T @ yw, check_finite=False)
    lv = lw * variances[None, :]
    gram = lv @ lw.T
    gram[np.diag_indices_from(gram)] += 1.0
    try:
        fac = cho_factor(gram, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("dual ridge system not positive definite") from exc
    return lv.T @ cho_solve(fac, yw, check_finite=False)


def _ridge_solve_precision(lw: np.ndarray, yw: np.ndarray, precisions: np.ndarray) -> np.ndarray:
    return _ridge_solve_variance(lw, yw, 1.0 / precisions)


def _rel_change(x_new: np.ndarray, x_old: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(x_old)), 1e-30)
    return float(np.linalg.norm(x_new - x_old)) / denom


def _block_view(x: np.ndarray, n: int, d: int) -> np.ndarray:
    return x.reshape(n, d)


# ---------------------------------------------------------------------------
# fixed-prior solvers


def solve_wmne(lead_field, y, noise: NoiseModel, weights: np.ndarray, d: Optional[int] = None) -> SourceEstimate:
    """Weighted minimum-norm estimate.

    Minimizes ``(y - L x)^T Gamma^{-1} (y - L x)/2 + sum_k w_k ||x_k||_2^2``,
    i.e. ridge regression with per-location weights; solved in closed form
    through either the primal normal equations or the equivalent dual
    (m x m) system with prior variances 1/(2 w_k).
    """
    lw, yw, n, d_lf = _ingest(lead_field, y, noise)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise ValueError(f"weights must have shape ({n},)")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    variances = np.repeat(1.0 / (2.0 * weights), d_lf)
    x = _ridge_solve_variance(lw, yw, variances)
    return SourceEstimate(coefficients=x, d=d_lf)


def _lqa_weights(x: np.ndarray, w_scalar, w_block, p: int, n: int, d: int, eps: float) -> np.ndarray:
    if p == 1:
        return 2.0 * w_scalar / (2.0 * np.abs(x) + eps)
    amps = np.linalg.norm(_block_view(x, n, d), axis=1)
    return np.repeat(w_block / (amps + eps), d)


def _lqa_objective(lw, yw, x, w_scalar, w_block, p, n, d, eps) -> float:
    r = yw - lw @ x
    fit = 0.5 * float(r @ r)
    if p == 1:
        a = np.abs(x)
        pen = float(np.sum(w_scalar * (a - (eps / 2.0) * np.log1p(2.0 * a / eps))))
    else:
        a = np.linalg.norm(_block_view(x, n, d), axis=1)
        pen = float(np.sum(w_block * (a - eps * np.log1p(a / eps))))
    return fit + pen


def _mm_lqa_core(lw, yw, weights, p, n, d, config, x0=None):
    """Iteratively reweighted quadratic loop shared by all L1-type solvers.

    ``weights`` is per location; for p=1 the blocks decompose into scalars
    whose weight is their location's. Returns (x, iterations, objectives,
    converged) where ``objectives`` tracks the epsilon-smoothed objective,
    which the majorize-minimize step decreases monotonically.
    """
    eps = config.lqa_epsilon
    w_block = np.asarray(weights, dtype=float)
    w_scalar = np.repeat(w_block, d)
    x = np.zeros(n * d) if x0 is None else np.asarray(x0, dtype=float).copy()
    objectives = []
    converged = False
    it = 0
    for it in range(1, config.max_inner_iters + 1):
        q = _lqa_weights(x, w_scalar, w_block, p, n, d, eps)
        x_new = _ridge_solve_precision(lw, yw, q)
        change = _rel_change(x_new, x)
        x = x_new
        objectives.append(_lqa_objective(lw, yw, x, w_scalar, w_block, p, n, d, eps))
        if change < config.inner_tol:
            converged = True
            break
    return x, it, objectives, converged


def solve_mm_lqa(
    lead_field,
    y,
    noise: NoiseModel,
    weights: np.ndarray,
    p: int,
    d: Optional[int] = None,
    config: Optional[SolverConfig] = None,
):
    """Weighted L1 (p=1) or group-L2,1 (p=2) MAP via quadratic majorization.

    Each sweep replaces the non-smooth penalty by its tangent quadratic at
    the current iterate — weight ``2 w_i / (2|x_i| + eps)`` per scalar for
    p=1, ``w_k / (||x_k||_2 + eps)`` per block for p=2 — and solves the
    resulting ridge system. The recorded objective is the eps-smoothed
    penalty (exact as eps -> 0) and never increases.

    Returns
    -------
    (SourceEstimate, SolveTrace)
    """
    if p not in (1, 2):
        raise ConfigError("p must be 1 or 2")
    config = config or SolverConfig()
    lw, yw, n, d_lf = _ingest(lead_field, y, noise)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise ValueError(f"weights must have shape ({n},)")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    x, iters, objectives, converged = _mm_lqa_core(lw, yw, weights, p, n, d_lf, config)
    trace = SolveTrace(
        solver_id="wl" if p == 1 else "wgl",
        status="converged" if converged else "max-iters",
        iterations=iters,
        objectives=objectives,
    )
    return SourceEstimate(coefficients=x, d=d_lf), trace


# ---------------------------------------------------------------------------
# conditionally Gaussian hierarchy


def _make_gamma_equation(xb2: float, alpha: float, beta: float, s: float, d: int):
    c = s * alpha - (d + 2.0) / 2.0

    def g(gamma: float) -> float:
        return xb2 / 2.0 - s * gamma ** (s + 1.0) / beta**s + c * gamma

    def gprime(gamma: float) -> float:
        return -s * (s + 1.0) * gamma**s / beta**s + c

    return g, gprime, c


def _solve_gamma_generic(
    xb2: float, alpha: float, beta: float, s: float, d: int, config: SolverConfig
) -> float:
    g, gprime, c = _make_gamma_equation(xb2, alpha, beta, s, d)
    if xb2 == 0.0:
        # boundary: the stationary point collapses to the hyperprior mode,
        # which is interior iff c and s share a sign (for s < 0 the penalty
        # blows up at gamma = 0, so the mode never sits on the boundary)
        if c / s > 0.0:
            return beta * (c / s) ** (1.0 / s)
        return 0.0
    scale = max(beta, np.sqrt(xb2), 1e-30)
    lo = 1e-12 * scale
    while g(lo) <= 0.0 and lo > 1e-250:
        lo *= 0.1
    hi = scale
    while g(hi) > 0.0 and hi < 1e250:
        hi *= 10.0
    if g(lo) <= 0.0 or g(hi) > 0.0:
        raise NumericalError("failed to bracket the gamma stationarity root")
    if config.root_solver is RootSolver.NEWTON:
        try:
            # Newton may step outside (0, inf) for fractional s, where the
            # equation is undefined; the NaNs that produces are rejected by
            # the bracket check below and we fall back to bisection.
            with np.errstate(invalid="ignore"):
                root = newton(
                    g, x0=np.sqrt(lo * hi), fprime=gprime, tol=1e-14 * scale, maxiter=80
                )
            if lo <= root <= hi and abs(g(root)) < 1e-9 * max(xb2, 1.0):
                return float(root)
        except (RuntimeError, OverflowError, ValueError, ZeroDivisionError):
            pass  # fall through to the bracketed solve
    return float(brentq(g, lo, hi, xtol=1e-30, rtol=8.9e-16, maxiter=300))


def gamma_update_cg(
    xb2: np.ndarray,
    alpha: float,
    beta: np.ndarray,
    s: float,
    d: int,
    config: Optional[SolverConfig] = None,
) -> np.ndarray:
    """Per-location variance update of the alternating-maximization step.

    ``xb2`` holds the squared block norms ||x_k||_2^2. Closed forms:

    * s = +1:  gamma_k = (beta/2) (eta + sqrt(eta^2 + 2 ||x_k||^2 / beta)),
      eta = alpha - (d+2)/2;
    * s = -1:  gamma_k = (||x_k||^2 / 2 + beta) / (alpha + (d+2)/2), the
      mode of the conjugate inverse-gamma conditional;
    * other s: 1-D root of the stationarity equation (Newton with a
      bracketed bisection fallback, or bisection directly, per config).
    """
    config = config or SolverConfig()
    xb2 = np.asarray(xb2, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), xb2.shape)
    if np.any(beta <= 0):
        raise ConfigError("beta must be positive")
    if s == 1.0:
        eta = alpha - (d + 2.0) / 2.0
        return (beta / 2.0) * (eta + np.sqrt(eta * eta + 2.0 * xb2 / beta))
    if s == -1.0:
        return (xb2 / 2.0 + beta) / (alpha + (d + 2.0) / 2.0)
    if s == 0.0:
        raise ConfigError("s must be nonzero")
    return np.array(
        [
            _solve_gamma_generic(float(x2), alpha, float(b), s, d, config)
            for x2, b in zip(xb2, beta)
        ]
    )


def _ias_objective(lw, yw, x, xb2, gamma, alpha, beta, s, d) -> float:
    r = yw - lw @ x
    g = np.maximum(gamma, _TINY)
    c = s * alpha - (d + 2.0) / 2.0
    terms = xb2 / (2.0 * g) + (g / beta) ** s - c * np.log(g)
    return 0.5 * float(r @ r) + float(terms.sum())


def solve_ias_cg(
    lead_field,
    y,
    noise: NoiseModel,
    alpha: float,
    beta: np.ndarray,
    s: float,
    d: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    gamma0: Optional[np.ndarray] = None,
):
    """Alternating maximization for the conditionally Gaussian hierarchy.

    Repeats until the coefficient update stalls: (i) the quadratic
    x-update with the current variances gamma_k, (ii) the per-location
    variance update :func:`gamma_update_cg`. Both steps are exact argmaxes
    of the joint posterior, so the recorded joint objective never
    increases. Variances start at 1.

    Returns
    -------
    (SourceEstimate, ndarray, SolveTrace)
        Estimate, final variances, diagnostics.
    """
    config = config or SolverConfig()
    lw, yw, n, d_lf = _ingest(lead_field, y, noise)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    gamma = np.ones(n) if gamma0 is None else np.asarray(gamma0, dtype=float).copy()
    if gamma.shape != (n,) or np.any(gamma < 0):
        raise ConfigError("gamma0 must be non-negative with one entry per location")
    trace = SolveTrace(solver_id=f"cg(s={s:g})-ias", status="max-iters")
    x = np.zeros(n * d_lf)
    for it in range(1, config.max_outer_iters + 1):
        x_new = _ridge_solve_variance(lw, yw, np.repeat(gamma, d_lf))
        xb2 = (_block_view(x_new, n, d_lf) ** 2).sum(axis=1)
        gamma = gamma_update_cg(xb2, alpha, beta, s, d_lf, config)
        change = _rel_change(x_new, x)
        x = x_new
        trace.iterations = it
        trace.x_change.append(change)
        trace.record_gamma(gamma)
        trace.objectives.append(_ias_objective(lw, yw, x, xb2, gamma, alpha, beta, s, d_lf))
        if change < config.outer_tol:
            trace.status = "converged"
            break
    trace.gamma_final = gamma
    return SourceEstimate(coefficients=x, d=d_lf), gamma, trace


def _em_variances(
    xb_norm: np.ndarray, alpha: float, beta: np.ndarray, s: float, d: int, delta: float
) -> np.ndarray:
    """Prior variances diag(1/w_k) from the E-step precision w_k.

    Gamma hyperprior (s=1): 1/w_k = sqrt(2 beta) ||x_k|| K_nu(z)/(K_{nu-1}(z)+delta)
    with nu = alpha - d/2 and z = sqrt(2/beta) ||x_k||, written entirely in
    z (clamped at 1e-8) so the x -> 0 limit is taken smoothly: the variance
    tends to 2 beta (nu - 1) for nu > 1 and to 0 otherwise. The delta guard
    acts on the exponentially scaled denominator.

    Inverse-gamma hyperprior (s=-1): w_k = (alpha + d/2)/(||x_k||^2 + beta).
    """
    if s == 1.0:
        nu = alpha - d / 2.0
        z = np.maximum(np.sqrt(2.0 / beta) * xb_norm, _EM_Z_FLOOR)
        return beta * z * kve(nu, z) / (kve(nu - 1.0, z) + delta)
    if s == -1.0:
        return (xb_norm**2 + beta) / (alpha + d / 2.0)
    raise UnsupportedModelError(f"EM is implemented only for s = +/-1, got s={s}")


def _em_objective(lw, yw, x, xb_norm, alpha, beta, s, d) -> float:
    """Descent function of the EM iteration; diagnostic only.

    The penalty is the antiderivative of the per-block score implied by
    the E-step precisions (P'(t)/t = w(t)), so the recorded sequence is
    non-increasing under exact E/M steps.
    """
    r = yw - lw @ x
    fit = 0.5 * float(r @ r)
    if s == -1.0:
        pen = 0.5 * (alpha + d / 2.0) * np.log1p(xb_norm**2 / beta)
        return fit + float(pen.sum())
    nu = alpha - d / 2.0
    z = np.maximum(np.sqrt(2.0 / beta) * xb_norm, _EM_Z_FLOOR)
    pen = 0.5 * (z - nu * np.log(z) - np.log(kve(nu, z)))
    return fit + float(pen.sum())


def solve_em_cg(
    lead_field,
    y,
    noise: NoiseModel,
    alpha: float,
    beta: np.ndarray,
    s: float,
    d: Optional[int] = None,
    config: Optional[SolverConfig] = None,
):
    """Expectation-maximization for the conditionally Gaussian hierarchy.

    Only the conjugate cases s = +1 (gamma hyperprior, Bessel-ratio
    E-step) and s = -1 (inverse-gamma hyperprior) are supported. The
    E-step produces per-location precisions w_k; the M-step is the ridge
    update with prior variance matrix diag(1/w_k I_d). Iteration starts
    from the hyperprior-mean variances so that locations are not frozen at
    zero amplitude.

    Returns
    -------
    (SourceEstimate, SolveTrace)
        The final variances 1/w_k are exposed as ``trace.gamma_final``.
    """
    config = config or SolverConfig()
    if s not in (1.0, -1.0):
        raise UnsupportedModelError(f"EM is implemented only for s = +/-1, got s={s}")
    lw, yw, n, d_lf = _ingest(lead_field, y, noise)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    if s == 1.0:
        variances = alpha * beta
    else:
        variances = beta / (alpha - 1.0) if alpha > 1.0 else beta.copy()
    trace = SolveTrace(solver_id=f"cg(s={s:g})-em", status="max-iters")
    x = np.zeros(n * d_lf)
    for it in range(1, config.max_outer_iters + 1):
        x_new = _ridge_solve_variance(lw, yw, np.repeat(variances, d_lf))
        xb_norm = np.linalg.norm(_block_view(x_new, n, d_lf), axis=1)
        variances = _em_variances(xb_norm, alpha, beta, s, d_lf, config.bessel_delta)
        change = _rel_change(x_new, x)
        x = x_new
        trace.iterations = it
        trace.x_change.append(change)
        trace.record_gamma(variances)
        trace.objectives.append(_em_objective(lw, yw, x, xb_norm, alpha, beta, s, d_lf))
        if change < config.outer_tol:
            trace.status = "converged"
            break
    trace.gamma_final = variances
    return SourceEstimate(coefficients=x, d=d_lf), trace


# ---------------------------------------------------------------------------
# conditional Laplace hierarchies


def _check_nondegenerate(
    corr: np.ndarray, gamma0: np.ndarray, n: int, d: int, p: int, mu: float
) -> np.ndarray:
    """First-iterate activity guard of the conditional Laplace solvers.

    The first x-step is a weighted L1/L2,1 problem whose zero solution is
    optimal exactly when every (scalar or block) correlation of the data
    falls below its penalty gamma_k^(0). If that happens the initial rates
    are rescaled by mu * max_ratio, which lifts the maximal ratio to 1/mu
    > 1; all-zero data cannot be rescued and raises.
    """
    if p == 1:
        stat = np.abs(corr.reshape(n, d)).max(axis=1)
    else:
        stat = np.linalg.norm(corr.reshape(n, d), axis=1)
    ratios = stat / gamma0
    max_ratio = float(ratios.max())
    if max_ratio <= 0.0:
        raise DegenerateDataError("data is orthogonal to the operator (all correlations zero)")
    if max_ratio > 1.0:
        return gamma0
    return gamma0 * (mu * max_ratio)


def _solve_conditional_laplace(
    lead_field,
    y,
    noise: NoiseModel,
    alpha_bar: float,
    beta: np.ndarray,
    d: Optional[int],
    variant,
    config: SolverConfig,
    p: int,
    solver_tag: str,
):
    variant = Optimizer(variant)
    if variant not in (Optimizer.IAS, Optimizer.EM):
        raise ConfigError(f"{solver_tag} requires the IAS or EM variant")
    lw, yw, n, d_lf = _ingest(lead_field, y, noise)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    if np.any(beta <= 0):
        raise ConfigError("beta must be positive")
    if alpha_bar <= 0:
        raise ConfigError("alpha_bar must be positive")
    if p == 1:
        shift = 0.0 if variant is Optimizer.IAS else 1.0
        numer = alpha_bar + shift
    else:
        shift = (d_lf - 1.0) if variant is Optimizer.IAS else float(d_lf)
        numer = alpha_bar + shift
    gamma = numer / beta
    gamma = _check_nondegenerate(lw.T @ yw, gamma, n, d_lf, p, config.rescale_mu)

    trace = SolveTrace(solver_id=f"{solver_tag}-{variant.value}", status="max-iters")
    x = np.zeros(n * d_lf)
    for it in range(1, config.max_outer_iters + 1):
        x_new, _inner_iters, _objs, _conv = _mm_lqa_core(
            lw, yw, gamma, p, n, d_lf, config, x0=x
        )
        if p == 1:
            xb = np.abs(_block_view(x_new, n, d_lf)).sum(axis=1)
        else:
            xb = np.linalg.norm(_block_view(x_new, n, d_lf), axis=1)
        gamma = numer / (beta + xb)
        change = _rel_change(x_new, x)
        x = x_new
        trace.iterations = it
        trace.x_change.append(change)
        trace.record_gamma(gamma)
        r = yw - lw @ x
        if variant is Optimizer.IAS:
            obj = 0.5 * float(r @ r) + float(
                (gamma * (beta + xb) - numer * np.log(np.maximum(gamma, _TINY))).sum()
            )
        else:
            obj = 0.5 * float(r @ r) + numer * float(np.log(beta + xb).sum())
        trace.objectives.append(obj)
        if change < config.outer_tol:
            trace.status = "converged"
            break
    trace.gamma_final = gamma
    return SourceEstimate(coefficients=x, d=d_lf), gamma, trace


def solve_wcl(
    lead_field,
    y,
    noise: NoiseModel,
    alpha_bar: float,
    beta: np.ndarray,
    d: Optional[int] = None,
    variant=Optimizer.IAS,
    config: Optional[SolverConfig] = None,
):
    """Conditional Laplace hierarchy: L1 blocks with gamma-distributed rates.

    Alternates a weighted L1 x-step (majorize-minimize, warm-started) with
    the closed-form rate update

        IAS: gamma_k = alpha_bar / (beta_k + ||x_k||_1)
        EM:  gamma_k = (alpha_bar + 1) / (beta_k + ||x_k||_1)

    initialized at the x = 0 value of the same expression. Before the
    first x-step the initial rates are checked (and if needed rescaled by
    ``rescale_mu`` times the maximal correlation ratio) so that the first
    iterate cannot degenerate to zero.

    Returns
    -------
    (SourceEstimate, ndarray, SolveTrace)
    """
    return _solve_conditional_laplace(
        lead_field, y, noise, alpha_bar, beta, d, variant, config or SolverConfig(), 1, "wcl"
    )


def solve_wcgl(
    lead_field,
    y,
    noise: NoiseModel,
    alpha_bar: float,
    beta: np.ndarray,
    d: Optional[int] = None,
    variant=Optimizer.IAS,
    config: Optional[SolverConfig] = None,
):
    """Conditional group-Laplace hierarchy: L2 blocks with gamma rates.

    Same alternation as :func:`solve_wcl` with block Euclidean norms and

        IAS: gamma_k = (alpha_bar + d - 1) / (beta_k + ||x_k||_2)
        EM:  gamma_k = (alpha_bar + d) / (beta_k + ||x_k||_2).

    Returns
    -------
    (SourceEstimate, ndarray, SolveTrace)
    """
    return _solve_conditional_laplace(
        lead_field, y, noise, alpha_bar, beta, d, variant, config or SolverConfig(), 2, "wcgl"
    )


# ---------------------------------------------------------------------------
# dispatch


def solve(
    prior_spec: PriorSpec,
    lead_field,
    y,
    noise: NoiseModel,
    config: Optional[SolverConfig] = None,
):
    """Route a prior specification to its solver.

    Returns
    -------
    (SourceEstimate, SolveTrace)
        ``trace.solver_id`` matches ``prior_spec.solver_id``; hierarchical
        runs expose their final variances/rates as ``trace.gamma_final``.
    """
    config = config or SolverConfig()
    fam = prior_spec.family
    if fam is PriorFamily.WG:
        est = solve_wmne(lead_field, y, noise, prior_spec.weights, prior_spec.d)
        lw, yw, n, d_lf = _ingest(lead_field, y, noise)
        r = yw - lw @ est.coefficients
        amps2 = (est.coefficients.reshape(n, d_lf) ** 2).sum(axis=1)
        obj = 0.5 * float(r @ r) + float((prior_spec.weights * amps2).sum())
        trace = SolveTrace(
            solver_id=prior_spec.solver_id, status="converged", iterations=1, objectives=[obj]
        )
        return est, trace
    if fam in (PriorFamily.WL, PriorFamily.WGL):
        p = 1 if fam is PriorFamily.WL else 2
        est, trace = solve_mm_lqa(lead_field, y, noise, prior_spec.weights, p, prior_spec.d, config)
        trace.solver_id = prior_spec.solver_id
        return est, trace
    if fam in (PriorFamily.WCG_GA, PriorFamily.WCG_IG, PriorFamily.WCG_GEN):
        s_eff = prior_spec.effective_s()
        if prior_spec.optimizer is Optimizer.IAS:
            est, _gamma, trace = solve_ias_cg(
                lead_field, y, noise, prior_spec.alpha_bar, prior_spec.beta, s_eff,
                prior_spec.d, config,
            )
        else:
            est, trace = solve_em_cg(
                lead_field, y, noise, prior_spec.alpha_bar, prior_spec.beta, s_eff,
                prior_spec.d, config,
            )
        trace.solver_id = prior_spec.solver_id
        return est, trace
    if fam in (PriorFamily.WCL, PriorFamily.WCGL):
        fn = solve_wcl if fam is PriorFamily.WCL else solve_wcgl
        est, _gamma, trace = fn(
            lead_field, y, noise, prior_spec.alpha_bar, prior_spec.beta, prior_spec.d,
            prior_spec.optimizer, config,
        )
        trace.solver_id = prior_spec.solver_id
        return est, trace
    raise UnsupportedModelError(f"no solver for family {fam}")
