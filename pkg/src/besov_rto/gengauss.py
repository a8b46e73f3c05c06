"""Generalized Gaussian distribution and the Gaussian-to-GG prior transform.

The distribution is parametrized by shape p >= 1 and a scaled
regularization parameter lam > 0, giving scale
alpha = (Gamma(1/p)/Gamma(3/p))^(1/2) * lam^(-1/p) and rate
tau = (Gamma(1/p)/Gamma(3/p))^(-p/2) * lam, so that lam = 1 yields unit
variance.  The componentwise map g1d sends a standard normal variate to a
GG variate through the two CDFs; its derivative is evaluated in log space
because the sampler needs log-determinants anyway.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "GenGaussParams",
    "gg_log_pdf",
    "gg_cdf",
    "gg_quantile",
    "g1d",
    "g1d_deriv",
    "g1d_log_deriv",
    "tail_saturated",
    "prior_transform",
    "transform_jacobian_diag",
    "TAIL_SATURATION_LIMIT",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# beyond this |h| the normal tail mass underflows double precision and the
# quantile composition switches to the asymptotic tail map
TAIL_SATURATION_LIMIT = 38.0

# |h| above which the quantile composition goes through complementary CDFs
_TAIL_SPLIT = 2.0

# smallest tail mass the direct upper-gamma inverse handles reliably;
# below it (normal tails near the saturation limit) the asymptotic
# log-space solver takes over
_MIN_DIRECT_TAIL = 1e-280


@dataclass(frozen=True)
class GenGaussParams:
    """Shape p >= 1 and scaled regularization lam > 0; mean fixed at 0."""

    p: float
    lam: float
    alpha: float = field(init=False)
    tau: float = field(init=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"shape p must be >= 1, got {self.p}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        log_ratio = special.gammaln(1.0 / self.p) - special.gammaln(3.0 / self.p)
        object.__setattr__(self, "alpha", np.exp(0.5 * log_ratio) * self.lam ** (-1.0 / self.p))
        object.__setattr__(self, "tau", np.exp(-0.5 * self.p * log_ratio) * self.lam)

    @property
    def variance(self) -> float:
        return self.alpha**2 * np.exp(
            special.gammaln(3.0 / self.p) - special.gammaln(1.0 / self.p)
        )


def gg_log_pdf(x, params: GenGaussParams):
    """Log density log[p / (2 alpha Gamma(1/p))] - |x/alpha|^p."""
    x = np.asarray(x, dtype=np.float64)
    log_norm = (
        np.log(params.p)
        - np.log(2.0 * params.alpha)
        - special.gammaln(1.0 / params.p)
    )
    return log_norm - np.abs(x / params.alpha) ** params.p


def gg_cdf(x, params: GenGaussParams):
    """CDF via the regularized lower incomplete gamma function."""
    x = np.asarray(x, dtype=np.float64)
    t = np.abs(x / params.alpha) ** params.p
    half_mass = 0.5 * special.gammainc(1.0 / params.p, t)
    return np.where(x >= 0, 0.5 + half_mass, 0.5 - half_mass)


def gg_quantile(u, params: GenGaussParams):
    """Inverse CDF; u must lie strictly inside (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    a = 1.0 / params.p
    central = np.abs(2.0 * u - 1.0)
    half_tail = np.minimum(u, 1.0 - u)  # exact for u < 0.5, 1 ulp above
    t = np.empty_like(central)

    bulk = central <= 0.9
    t[bulk] = special.gammaincinv(a, central[bulk])
    outer = (~bulk) & (2.0 * half_tail >= _MIN_DIRECT_TAIL)
    t[outer] = special.gammainccinv(a, 2.0 * half_tail[outer])
    ext = (~bulk) & (2.0 * half_tail < _MIN_DIRECT_TAIL)
    if np.any(ext):
        t[ext] = _tail_quantile_log(np.log(2.0) + np.log(half_tail[ext]), a)

    x = np.sign(u - 0.5) * params.alpha * t**a
    return float(x[0]) if scalar else x


def _tail_quantile_log(log_tail_mass, a: float):
    """Solve Q(a, t) = exp(log_tail_mass) for t in log space.

    Uses the asymptotic Q(a,t) ~ t^(a-1) exp(-t) / Gamma(a) * (1+(a-1)/t)
    with Newton refinement; valid for large t, engaged only for tail
    masses too small for the direct inverse.
    """
    rhs = -(np.asarray(log_tail_mass, dtype=np.float64) + special.gammaln(a))
    t = np.maximum(rhs, 2.0)
    for _ in range(60):
        resid = t - (a - 1.0) * np.log(t) - np.log1p((a - 1.0) / t) - rhs
        slope = 1.0 - (a - 1.0) / t + (a - 1.0) / (t * (t + a - 1.0))
        step = resid / slope
        t = np.maximum(t - step, 1.0)
        if np.all(np.abs(step) < 1e-12 * np.maximum(t, 1.0)):
            break
    return t


def tail_saturated(h) -> np.ndarray:
    """Mask of inputs handled by the asymptotic tail map."""
    return np.abs(np.asarray(h, dtype=np.float64)) > TAIL_SATURATION_LIMIT


def g1d(h, params: GenGaussParams):
    """Componentwise transform: GG quantile of the standard normal CDF.

    Monotone increasing and odd.  The composition is routed through
    complementary CDFs for |h| > 2 to avoid cancellation, and through the
    asymptotic tail map past TAIL_SATURATION_LIMIT.
    """
    h = np.asarray(h, dtype=np.float64)
    scalar = h.ndim == 0
    ah = np.atleast_1d(np.abs(h))
    sign = np.sign(np.atleast_1d(h))
    a = 1.0 / params.p
    t = np.empty_like(ah)

    central = ah <= _TAIL_SPLIT
    if np.any(central):
        t[central] = special.gammaincinv(a, special.erf(ah[central] / np.sqrt(2.0)))
    mass = np.where(central, 1.0, 2.0 * special.ndtr(-ah))
    tail = (~central) & (mass >= _MIN_DIRECT_TAIL)
    if np.any(tail):
        t[tail] = special.gammainccinv(a, mass[tail])
    extreme = (~central) & (mass < _MIN_DIRECT_TAIL)
    if np.any(extreme):
        log_mass = np.log(2.0) + special.log_ndtr(-ah[extreme])
        t[extreme] = _tail_quantile_log(log_mass, a)

    x = sign * params.alpha * t**a
    return float(x[0]) if scalar else x.reshape(h.shape)


def g1d_log_deriv(h, params: GenGaussParams):
    """log g1d'(h) = log pdf_N(h) - log pdf_GG(g1d(h))."""
    h = np.asarray(h, dtype=np.float64)
    log_normal = -0.5 * h**2 - _LOG_SQRT_2PI
    return log_normal - gg_log_pdf(g1d(h, params), params)


def g1d_deriv(h, params: GenGaussParams):
    """Derivative of g1d; strictly positive."""
    return np.exp(g1d_log_deriv(h, params))


def prior_transform(h, params: GenGaussParams, wavelet, weights) -> np.ndarray:
    """Prior map T(h) = B^-1 g(h) from standard normal to Besov variables."""
    from .wavelets import apply_B_inverse

    h = np.asarray(h, dtype=np.float64)
    return apply_B_inverse(g1d(h, params), wavelet, weights)


def transform_jacobian_diag(h, params: GenGaussParams) -> np.ndarray:
    """Diagonal of J_g at h (the nonlinear part of T's Jacobian)."""
    return g1d_deriv(h, params)
