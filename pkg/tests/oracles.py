"""Independent reference computations used as test oracles.

Nothing here calls into ``crmud``: bisection for Lambert W, adaptive
quadrature for E1 and for conditional departure-rate means.
"""

import math

import numpy as np
from scipy import integrate


def bisect_lambert_w(x: float) -> float:
    """Solve w*exp(w) = x on the principal branch by plain bisection."""
    if x == 0.0:
        return 0.0
    lo = -1.0
    hi = max(1.0, math.log(x) + 1.0) if x > 0 else 0.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quad_e1(x: float) -> float:
    """E1(x) = exp(-x) * int_0^inf exp(-u)/(x+u) du by adaptive quadrature.

    The [0, 1] piece uses u = x(e^t - 1), which removes the log singularity
    for small x.
    """
    near, _ = integrate.quad(
        lambda t: math.exp(-x * math.expm1(t)), 0.0, math.log1p(1.0 / x), epsabs=0.0, epsrel=1e-13, limit=500
    )
    far, _ = integrate.quad(lambda u: math.exp(-u) / (x + u), 1.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=500)
    return math.exp(-x) * (near + far)


def mu_formula(p_d, R_p, interference):
    return p_d * math.exp(-R_p) + (1 - p_d) * math.exp(-R_p * (1 + interference))


def truncated_exp_mean(fn, rate, upper):
    """E[fn(A) | A < upper] for A ~ Exp(rate), by quadrature."""
    num, _ = integrate.quad(lambda a: fn(a) * rate * math.exp(-rate * a), 0.0, upper, epsabs=0.0, epsrel=1e-12)
    return num / -math.expm1(-rate * upper)


def mean_log2_ratio_snr(K: float) -> float:
    """E[log2(1 + K*B/A)] for independent A, B ~ Exp(1), by 2-D quadrature."""
    val, _ = integrate.dblquad(
        lambda b, a: math.log2(1.0 + K * b / a) * math.exp(-a - b),
        0.0,
        60.0,
        0.0,
        60.0,
        epsabs=1e-11,
        epsrel=1e-10,
    )
    return val


def mc_mean(samples: np.ndarray):
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size))
