"""Special functions used by the closed-form capacity expressions.

Only what the bound formulas need: the principal branch of the Lambert W
function and the exponential integral E1, plus the expected value of
``log2(1 + P*X)`` for unit-mean exponential ``X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Tolerance",
    "DEFAULT_TOLERANCE",
    "DomainError",
    "NonConvergenceError",
    "lambert_w0",
    "exp_integral_e1",
    "exp_integral_e1_scaled",
    "mean_log2_one_plus_exp_scaled",
]

EULER_GAMMA = 0.57721566490153286061
BRANCH_POINT = -1.0 / math.e
_EPS = 2.220446049250313e-16


class DomainError(ValueError):
    """Argument outside the function's real domain."""


class NonConvergenceError(ArithmeticError):
    """Iteration budget exhausted before reaching the tolerance."""


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    max_iterations: int = 100

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


DEFAULT_TOLERANCE = Tolerance()


def _w0_initial_guess(x: float) -> float:
    if x < -0.25:
        # branch-point series in p = sqrt(2(e*x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if x <= math.e:
        return math.log1p(x)
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(x: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Principal branch of the Lambert W function.

    Solves ``w * exp(w) = x`` for ``w >= -1`` with Halley iteration.  For
    ``x > e`` the iteration runs on ``w + ln(w) = ln(x)`` so that large
    arguments never overflow ``exp``.

    Parameters
    ----------
    x : float
        Argument, ``x >= -1/e``.
    tol : Tolerance
        Step-size tolerance (relative to ``max(1, |w|)``) and iteration cap.

    Returns
    -------
    float
        ``W0(x)``.

    Raises
    ------
    DomainError
        If ``x < -1/e`` or ``x`` is NaN.
    NonConvergenceError
        If the iteration budget is exhausted.
    """
    x = float(x)
    if math.isnan(x) or x < BRANCH_POINT:
        raise DomainError(f"lambert_w0 is real only for x >= -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == BRANCH_POINT:
        return -1.0
    if math.isinf(x):
        return math.inf

    w = _w0_initial_guess(x)
    if x > math.e:
        log_x = math.log(x)
        for _ in range(tol.max_iterations):
            g = w + math.log(w) - log_x
            g1 = 1.0 + 1.0 / w
            g2 = -1.0 / (w * w)
            step = g / (g1 - 0.5 * g * g2 / g1)
            w -= step
            if abs(step) <= tol.abs_tol * max(1.0, abs(w)):
                return w
    else:
        for _ in range(tol.max_iterations):
            ew = math.exp(w)
            f = w * ew - x
            # near the branch point w*e^w is flat; stop once the residual is at rounding level
            if abs(f) <= 4.0 * _EPS * abs(x):
                return w
            wp1 = w + 1.0
            if wp1 == 0.0:
                wp1 = 1e-300
            step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
            w = max(w - step, -1.0)
            if abs(step) <= tol.abs_tol * max(1.0, abs(w)):
                return w
    raise NonConvergenceError(
        f"lambert_w0({x!r}) did not converge in {tol.max_iterations} iterations"
    )


def _e1_series(x: float, tol: Tolerance) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k * k!)
    total = 0.0
    term = 1.0
    for k in range(1, tol.max_iterations + 1):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) <= tol.abs_tol * abs(total):
            return -EULER_GAMMA - math.log(x) - total
    raise NonConvergenceError(f"E1 series at x={x!r} did not converge")


def _e1_continued_fraction(x: float, tol: Tolerance) -> float:
    # modified Lentz on e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, tol.max_iterations + 1):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= tol.abs_tol:
            return h
    raise NonConvergenceError(f"E1 continued fraction at x={x!r} did not converge")


def exp_integral_e1_scaled(x: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Return ``exp(x) * E1(x)`` without overflow for large ``x``."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"E1 requires x > 0, got {x!r}")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x, tol)
    return _e1_continued_fraction(x, tol)


def exp_integral_e1(x: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Exponential integral ``E1(x) = int_x^inf exp(-t)/t dt`` for ``x > 0``.

    Power series for ``x <= 1``, continued fraction above.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"E1 requires x > 0, got {x!r}")
    if x <= 1.0:
        return _e1_series(x, tol)
    return math.exp(-x) * _e1_continued_fraction(x, tol)


def mean_log2_one_plus_exp_scaled(P: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Expected ``log2(1 + P*X)`` for ``X ~ Exp(1)``, i.e. ``e^{1/P} E1(1/P) / ln 2``.

    This is the average rate penalty caused by a unit-mean exponential
    interferer received at power ``P``.
    """
    P = float(P)
    if not P > 0.0:
        raise DomainError(f"power must be positive, got {P!r}")
    return exp_integral_e1_scaled(1.0 / P, tol) / math.log(2.0)
