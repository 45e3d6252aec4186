"""System parameters, channel sampling and the QoS-driven power control law.

All powers are noise-normalised linear values (unit-variance noise), so a
received SNR is simply ``power * gain``.  Every function that takes a gain or
power accepts scalars or numpy arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "InvalidParameters",
    "SystemParams",
    "ChannelDraw",
    "db_to_linear",
    "linear_to_db",
    "derived_rp",
    "headroom_constant",
    "headroom_k",
    "outage_no_interference",
    "outage_with_interference",
    "departure_rate",
    "power_cap",
    "clamp_power",
    "transmit_power",
    "received_snr",
    "open_uniform",
    "exponential_gains",
    "sample_channels",
    "reference_params",
]


class InvalidParameters(ValueError):
    """System constants outside the regime the analysis covers."""


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(lin)


def headroom_constant(p_d: float, mu_min: float, R_p: float) -> float:
    """Interference budget ``K = ln((1-p_d)/(mu_min - p_d e^{-R_p}))/R_p - 1``.

    A transmitter whose interference gain is ``alpha`` may use power
    ``K/alpha`` before the primary departure rate falls to ``mu_min``.
    """
    denom = mu_min - p_d * math.exp(-R_p)
    if not denom > 0.0 or not (1.0 - p_d) > 0.0:
        raise InvalidParameters(
            "interference budget undefined: need mu_min > p_d*exp(-R_p) and p_d < 1 "
            f"(mu_min={mu_min}, p_d*exp(-R_p)={p_d * math.exp(-R_p):.6g})"
        )
    return math.log((1.0 - p_d) / denom) / R_p - 1.0


@dataclass(frozen=True)
class SystemParams:
    """Scalar system constants.

    ``lam`` is the primary packet arrival rate (``lambda`` is reserved).
    Construction rejects instances outside the analysed regime: the
    interference budget ``K`` must be positive and the primary queue must be
    stable without interference (``lam < exp(-R_p)``).

    ``p_d = 1`` is accepted as the perfect-sensing limit: the secondary is
    silent whenever the primary is active, so ``K`` is infinite and every
    transmitter runs at ``P_s_max``.
    """

    p_d: float
    p_f: float
    lam: float
    mu_min: float
    P_p: float
    P_s_max: float
    R: float
    N: int = 1

    def __post_init__(self):
        for name in ("p_d", "p_f", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameters(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.mu_min <= 1.0:
            raise InvalidParameters(f"mu_min must lie in (0, 1], got {self.mu_min}")
        for name in ("P_p", "P_s_max", "R"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise InvalidParameters(f"{name} must be positive and finite, got {v}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameters(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

        rp = self.R_p
        if self.p_d == 1.0:
            # perfect detection: secondary never interferes, any power meets the floor
            if self.mu_min > math.exp(-rp):
                raise InvalidParameters(
                    f"mu_min={self.mu_min} exceeds the interference-free departure rate "
                    f"exp(-R_p)={math.exp(-rp):.6g}"
                )
        elif not self.mu_min > self.p_d * math.exp(-rp):
            raise InvalidParameters(
                f"mu_min={self.mu_min} must exceed p_d*exp(-R_p)={self.p_d * math.exp(-rp):.6g}; "
                "otherwise the QoS floor never binds and the interference budget K is undefined"
            )
        elif self.mu_min >= math.exp(-rp):
            raise InvalidParameters(
                f"interference budget K <= 0 (mu_min={self.mu_min}, exp(-R_p)={math.exp(-rp):.6g}, "
                f"p_d={self.p_d}): the primary misses mu_min even without secondary interference, "
                "but the analysis assumes K > 0"
            )
        if not self.lam < math.exp(-rp):
            raise InvalidParameters(
                f"unstable primary queue: lambda={self.lam} must be below the interference-free "
                f"departure rate exp(-R_p)={math.exp(-rp):.6g}"
            )

    @property
    def R_p(self) -> float:
        return derived_rp(self)

    @property
    def K(self) -> float:
        return headroom_k(self)

    def with_n(self, N: int) -> "SystemParams":
        return replace(self, N=N)


def reference_params(N: int = 1) -> SystemParams:
    """Reference parameter set: p_d=0.8, p_f=0.3, lambda=0.5, P_p=P_s,max=10 dB, R=0.5, mu_min=0.95."""
    return SystemParams(p_d=0.8, p_f=0.3, lam=0.5, mu_min=0.95, P_p=10.0, P_s_max=10.0, R=0.5, N=N)


@dataclass(frozen=True)
class ChannelDraw:
    """Fading realisation for one slot, or a batch of slots along axis 0.

    ``alpha_s``/``beta_s`` have shape ``(N,)`` or ``(slots, N)``;
    ``alpha_p``/``beta_p`` are scalars or ``(slots,)``.
    """

    alpha_s: np.ndarray
    beta_s: np.ndarray
    alpha_p: float | np.ndarray
    beta_p: float | np.ndarray


def derived_rp(params: SystemParams) -> float:
    """Normalised SNR threshold ``R_p = (2^R - 1)/P_p``."""
    return (2.0**params.R - 1.0) / params.P_p


def headroom_k(params: SystemParams) -> float:
    if params.p_d == 1.0:
        return math.inf
    k = headroom_constant(params.p_d, params.mu_min, derived_rp(params))
    if not k > 0.0:
        raise InvalidParameters(f"interference budget K={k:.6g} must be positive")
    return k


def outage_no_interference(params: SystemParams) -> float:
    return -math.expm1(-derived_rp(params))


def outage_with_interference(params: SystemParams, alpha, P_s):
    """Primary outage when a secondary transmitter with gain ``alpha`` uses power ``P_s``."""
    return -np.expm1(-derived_rp(params) * (1.0 + np.multiply(alpha, P_s)))


def departure_rate(params: SystemParams, alpha, P_s):
    """Primary success probability per slot, ``p_d e^{-R_p} + (1-p_d) e^{-R_p(1+alpha P_s)}``."""
    rp = derived_rp(params)
    return params.p_d * math.exp(-rp) + (1.0 - params.p_d) * np.exp(-rp * (1.0 + np.multiply(alpha, P_s)))


def power_cap(params: SystemParams, alpha):
    """Power that drives the departure rate exactly to ``mu_min``: ``K/alpha``."""
    return np.divide(params.K, alpha)


def clamp_power(p_mu, P_s_max: float):
    """Clip the QoS power to ``[0, P_s_max]``; a negative value means no transmission."""
    p_mu = np.asarray(p_mu, dtype=float)
    if np.any(p_mu < 0.0):
        logger.warning("negative QoS power encountered (K <= 0); transmitter silenced")
    out = np.where(p_mu < 0.0, 0.0, np.minimum(p_mu, P_s_max))
    return float(out) if out.ndim == 0 else out


def transmit_power(params: SystemParams, alpha):
    return clamp_power(power_cap(params, alpha), params.P_s_max)


def received_snr(params: SystemParams, alpha, beta):
    """SNR at the secondary receiver: ``K beta/alpha`` if unsaturated, else ``P_s,max beta``."""
    return np.multiply(transmit_power(params, alpha), beta)


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform draws on the open interval (0, 1): odd multiples of 2^-53, so never 0 or 1."""
    k = rng.integers(0, 2**52, size=size, dtype=np.int64)
    return (k + 0.5) * 2.0**-52


def exponential_gains(rng: np.random.Generator, size=None):
    """Unit-mean exponential gains by inverse CDF, strictly positive."""
    return -np.log(open_uniform(rng, size))


def sample_channels(params: SystemParams, rng: np.random.Generator, slots: int | None = None) -> ChannelDraw:
    """Draw ``2N + 2`` independent Exp(1) gains per slot.

    With ``slots=None`` a single slot is returned; otherwise arrays carry a
    leading slot axis.  Draw order is fixed: ``alpha_s``, ``beta_s``,
    ``alpha_p``, ``beta_p``.
    """
    shape = (params.N,) if slots is None else (slots, params.N)
    alpha_s = exponential_gains(rng, shape)
    beta_s = exponential_gains(rng, shape)
    alpha_p = exponential_gains(rng, slots)
    beta_p = exponential_gains(rng, slots)
    if slots is None:
        alpha_p, beta_p = float(alpha_p), float(beta_p)
    return ChannelDraw(alpha_s, beta_s, alpha_p, beta_p)
