"""Asymptotic capacity bounds and scaling constants in closed form.

The lower bound belongs to two-stage scheduling and the upper bound to the
genie SNR.  Both are large-N approximations, and some of their logarithms go
non-positive at small N.  In that case the functions return ``None``
(not applicable) rather than a clamped number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .model import SystemParams
from .specfun import DomainError, lambert_w0, mean_log2_one_plus_exp_scaled

__all__ = [
    "SaturationProbability",
    "BoundCurve",
    "prob_unsaturated",
    "prob_unsaturated_exact",
    "b_n_low1",
    "m_avg_lower",
    "m_avg_upper",
    "interference_penalty",
    "lower_bound_capacity",
    "upper_bound_capacity",
    "asymptotic_k_lower",
    "asymptotic_k_upper",
    "bound_curve",
]


class SaturationProbability(NamedTuple):
    """Probability that no user's QoS power exceeds ``P_s_max``."""

    asymptotic: float
    exact: float


def _check_n(N, minimum):
    if int(N) != N or N < minimum:
        raise DomainError(f"N must be an integer >= {minimum}, got {N}")


def prob_unsaturated_exact(params: SystemParams, N: int) -> float:
    """``Pr[max_i K/alpha_i <= P_s_max] = exp(-N K / P_s_max)``."""
    _check_n(N, 1)
    return math.exp(-N * params.K / params.P_s_max)


def prob_unsaturated(params: SystemParams, N: int) -> SaturationProbability:
    """Asymptotic form ``exp(K / (P_s_max ln(1 - 1/N)))`` alongside the exact value.

    Since ``1/ln(1 - 1/N) = -N + 1/2 + O(1/N)`` the ratio asymptotic/exact
    tends to ``exp(K / (2 P_s_max))``, not to 1.  The asymptotic form needs
    ``N >= 2``.
    """
    _check_n(N, 2)
    asymptotic = math.exp(params.K / (params.P_s_max * math.log1p(-1.0 / N)))
    return SaturationProbability(asymptotic, prob_unsaturated_exact(params, N))


def b_n_low1(params: SystemParams, N: int) -> float:
    """Effective SNR of the unsaturated branch, ``P_s W(K N e^{K/P_s} / P_s) - K``."""
    _check_n(N, 1)
    K, ps = params.K, params.P_s_max
    return ps * lambert_w0(K * N / ps * math.exp(K / ps)) - K


def m_avg_lower(params: SystemParams) -> float:
    """Mean departure rate of a saturated user, ``E[mu(alpha, P_s_max) | alpha < K/P_s_max]``.

    Written as ``e^{-R_p}(e^a - e^{-R_p K}) / ((e^a - 1)(1 + R_p P_s))`` with
    ``a = K/P_s``, which avoids overflow in ``e^{K(R_p P_s + 1)/P_s}``.
    """
    rp, K, ps = params.R_p, params.K, params.P_s_max
    base = params.p_d * math.exp(-rp)
    if params.p_d == 1.0:
        return base
    a = K / ps
    ratio = (math.exp(a) - math.exp(-rp * K)) / (math.expm1(a) * (1.0 + rp * ps))
    return base + (1.0 - params.p_d) * math.exp(-rp) * ratio


def m_avg_upper(params: SystemParams, N: int) -> float:
    """Mean departure rate under the genie, driven by ``min_j alpha_j ~ Exp(N)``.

    Evaluated in the overflow-free form
    ``N e^{-R_p}(1 - e^{-aN - R_p K}) / ((N + R_p P_s)(1 - e^{-aN}))``.
    """
    _check_n(N, 1)
    rp, K, ps = params.R_p, params.K, params.P_s_max
    base = params.p_d * math.exp(-rp)
    if params.p_d == 1.0:
        return base
    a = K / ps
    ratio = N * -math.expm1(-a * N - rp * K) / ((N + rp * ps) * -math.expm1(-a * N))
    return base + (1.0 - params.p_d) * math.exp(-rp) * ratio


def interference_penalty(params: SystemParams) -> float:
    """Average rate lost to primary interference, ``e^{1/P_p} E1(1/P_p) / ln 2``."""
    return mean_log2_one_plus_exp_scaled(params.P_p)


def _sensing_mix(params: SystemParams, busy_weight: float, log_term: float, penalty: float) -> float:
    return busy_weight * (1.0 - params.p_d) * (log_term - penalty) + (1.0 - busy_weight) * (
        1.0 - params.p_f
    ) * log_term


def lower_bound_capacity(params: SystemParams, N: int) -> float | None:
    """Asymptotic lower bound on the average secondary capacity (two-stage scheduling).

    Returns ``None`` when ``N (1 - e^{-K/P_s}) <= 1``, where the expected
    size of the saturated set is too small for the asymptotic form.
    """
    _check_n(N, 2)
    K, ps, lam = params.K, params.P_s_max, params.lam
    set_size = N * -math.expm1(-K / ps)
    if set_size <= 1.0:
        return None
    p_unsat = prob_unsaturated(params, N).asymptotic
    penalty = interference_penalty(params)

    saturated = _sensing_mix(params, lam / m_avg_lower(params), math.log2(1.0 + ps * math.log(set_size)), penalty)
    if p_unsat == 0.0:
        return saturated
    unsaturated = _sensing_mix(params, lam / params.mu_min, math.log2(1.0 + b_n_low1(params, N)), penalty)
    return p_unsat * unsaturated + (1.0 - p_unsat) * saturated


def upper_bound_capacity(params: SystemParams, N: int) -> float | None:
    """Asymptotic upper bound on the average secondary capacity (genie SNR).

    Returns ``None`` when ``P_s_max ln N <= 1``.
    """
    _check_n(N, 2)
    ps, lam = params.P_s_max, params.lam
    snr = ps * math.log(N)
    if snr <= 1.0:
        return None
    p_unsat = prob_unsaturated(params, N).asymptotic
    penalty = interference_penalty(params)

    saturated = _sensing_mix(params, lam / m_avg_upper(params, N), math.log2(1.0 + snr), penalty)
    if p_unsat == 0.0:
        return saturated
    unsaturated = _sensing_mix(params, lam / params.mu_min, math.log2(snr), penalty)
    return p_unsat * unsaturated + (1.0 - p_unsat) * saturated


def _k(params: SystemParams, mean_departure: float) -> float:
    w = params.lam / mean_departure
    return w * (1.0 - params.p_d) + (1.0 - w) * (1.0 - params.p_f)


def asymptotic_k_lower(params: SystemParams) -> float:
    """Prefactor of ``log2(ln N)`` in the lower bound."""
    return _k(params, m_avg_lower(params))


def asymptotic_k_upper(params: SystemParams) -> float:
    """Prefactor of ``log2(ln N)`` in the upper bound (``M_avg,u -> e^{-R_p}``)."""
    return _k(params, math.exp(-params.R_p))


@dataclass(frozen=True)
class BoundCurve:
    """Bounds over a grid of N; entries are ``None`` where not applicable.

    ``k_lower <= k_upper`` holds when ``p_d >= p_f`` and reverses otherwise.
    """

    n_values: list
    lower: list
    upper: list
    k_lower: float
    k_upper: float


def bound_curve(params: SystemParams, n_values: Sequence[int]) -> BoundCurve:
    lower = [lower_bound_capacity(params, n) if n >= 2 else None for n in n_values]
    upper = [upper_bound_capacity(params, n) if n >= 2 else None for n in n_values]
    return BoundCurve(list(n_values), lower, upper, asymptotic_k_lower(params), asymptotic_k_upper(params))
