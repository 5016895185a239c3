"""Normal CDF/quantile helpers and truncated-Normal mixture sampling, compiled with numba.

Every sampler here is an inverse-CDF transform of a single uniform, so a draw
is a deterministic function of ``u``.
"""

import math

import numba
import numpy as np

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation to the normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


@numba.njit(cache=True)
def ndtr(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@numba.njit(cache=True)
def log_ndtr(x):
    if x > 5.0:
        return math.log1p(-0.5 * math.erfc(x / _SQRT2))
    if x > -30.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    if x == -math.inf:
        return -math.inf
    # asymptotic expansion of the Mills ratio
    x2 = x * x
    s = 1.0 - 1.0 / x2 + 3.0 / x2 ** 2 - 15.0 / x2 ** 3 + 105.0 / x2 ** 4 - 945.0 / x2 ** 5
    return -0.5 * x2 - math.log(-x) - _LOG_SQRT_2PI + math.log(s)


@numba.njit(cache=True)
def ndtri(p):
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # Halley refinement, done on the smaller tail for accuracy
    for _ in range(2):
        if x < 0.0:
            e = 0.5 * math.erfc(-x / _SQRT2) - p
        else:
            e = (1.0 - p) - 0.5 * math.erfc(x / _SQRT2)
        u = e * _SQRT_2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


@numba.njit(cache=True)
def log_diff_exp(a, b):
    """log(exp(a) - exp(b)) for a >= b."""
    if b == -math.inf:
        return a
    if b >= a:
        return -math.inf
    return a + math.log1p(-math.exp(b - a))


@numba.njit(cache=True)
def log_interval_mass(a, b):
    """log P(a < Z < b) for a standard normal Z."""
    if not b > a:
        return -math.inf
    if a >= 0.0:
        return log_diff_exp(log_ndtr(-a), log_ndtr(-b))
    if b <= 0.0:
        return log_diff_exp(log_ndtr(b), log_ndtr(a))
    return math.log(ndtr(b) - ndtr(a))


@numba.njit(cache=True)
def _upper_tail_isf(v, a, b):
    # a >= 0: point x of N(0,1) truncated to (a, b) with P(X > x) = v
    if v < 1e-300:
        v = 1e-300
    sa = ndtr(-a)
    if sa > 1e-290:
        sb = ndtr(-b)
        return -ndtri(sb + v * (sa - sb))
    # far tail: density ~ exp(-a (x - a))
    e = 0.0 if b == math.inf else math.exp(-a * (b - a))
    return a - math.log(v * (1.0 - e) + e) / a


@numba.njit(cache=True)
def truncnorm_ppf(u, a, b):
    """Quantile ``u`` of the standard normal truncated to ``(a, b)``."""
    if a >= 0.0:
        x = _upper_tail_isf(1.0 - u, a, b)
    elif b <= 0.0:
        x = -_upper_tail_isf(u, -b, -a)
    else:
        pa = ndtr(a)
        pb = ndtr(b)
        x = ndtri(pa + u * (pb - pa))
        if x == -math.inf or x == math.inf:
            x = ndtri(min(max(pa + u * (pb - pa), 1e-300), 1.0 - 1.1e-16))
    if x < a:
        x = a
    if x > b:
        x = b
    return x


@numba.njit(cache=True)
def mixture_log_weights(mu, var, lam, loglik_on, loglik_off, out):
    """Normalized log weights of the three truncated components.

    Components are ``(-inf, -lam)``, ``(-lam, lam)`` and ``(lam, inf)`` of
    ``N(mu, var)``; the outer two carry ``loglik_on`` and the middle one
    ``loglik_off``.
    """
    sd = math.sqrt(var)
    lo = (-lam - mu) / sd
    hi = (lam - mu) / sd
    out[0] = loglik_on + log_ndtr(lo)
    out[1] = loglik_off + log_interval_mass(lo, hi)
    out[2] = loglik_on + log_ndtr(-hi)
    m = max(out[0], max(out[1], out[2]))
    tot = 0.0
    for k in range(3):
        out[k] -= m  # exact when out[k] and m are close; keeps the small part precise
        tot += math.exp(out[k])
    log_tot = math.log(tot)
    for k in range(3):
        out[k] -= log_tot


@numba.njit(cache=True)
def mixture_ppf(u, mu, var, lam, loglik_on, loglik_off):
    """Inverse CDF of the three-component truncated-Normal mixture at ``u``."""
    lw = np.empty(3)
    mixture_log_weights(mu, var, lam, loglik_on, loglik_off, lw)
    sd = math.sqrt(var)
    bounds = (-math.inf, (-lam - mu) / sd, (lam - mu) / sd, math.inf)
    cum = 0.0
    k_last = 0
    for k in range(3):
        w = math.exp(lw[k])
        if w > 0.0:
            k_last = k
        if u < cum + w and w > 0.0:
            v = (u - cum) / w
            return mu + sd * truncnorm_ppf(v, bounds[k], bounds[k + 1])
        cum += w
    # u fell past the accumulated mass through rounding
    return mu + sd * truncnorm_ppf(1.0, bounds[k_last], bounds[k_last + 1])
