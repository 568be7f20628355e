"""Ratios of modified Bessel functions of the second kind.

The quantity needed by the hierarchical EM updates is K_nu(z)/K_{nu-1}(z).
Both K values underflow to zero well before z = 50 in double precision, so
the ratio is always formed from exponentially scaled evaluations
kve(nu, z) = exp(z) K_nu(z), never by dividing two raw K values.
"""
from __future__ import annotations

import numpy as np
from scipy.special import kve

__all__ = ["kv_ratio"]


def kv_ratio(nu: float, z, delta: float = 0.0):
    """K_nu(z) / K_{nu-1}(z), optionally with a guarded denominator.

    Parameters
    ----------
    nu : float
        Order of the numerator; the denominator uses ``nu - 1``.
    z : float or ndarray
        Positive argument(s).
    delta : float
        Additive guard applied to the *scaled* denominator
        (kve(nu-1, z) + delta), which leaves the large-z limit of the
        ratio intact while protecting against an underflowing denominator.

    Notes
    -----
    For z -> infinity the ratio tends to 1 (both orders share the
    asymptotic sqrt(pi/(2 z)) exp(-z) envelope); for z -> 0 and nu > 1 it
    grows like 2 (nu - 1) / z.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("z must be positive")
    out = kve(nu, z) / (kve(nu - 1.0, z) + delta)
    return float(out) if out.ndim == 0 else out
