"""Secondary user selection rules.

Three rules share one interface ``rule(params, draw) -> ScheduleDecision``:

* ``schedule_max_snr``: pick the transmitter with the largest received SNR.
* ``schedule_two_stage``: prefer users whose QoS power saturates at
  ``P_s_max`` and take the best forward gain among them; otherwise fall back
  to max-SNR.  Never better than max-SNR, so it yields a lower bound.
* ``genie_upper_snr``: combine the best forward gain with the weakest
  interference gain across all users.  Not physically realisable; it is an
  upper bound.

Draws may be a single slot (``alpha_s`` of shape ``(N,)``) or a batch
(``(slots, N)``).  Ties in argmax go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .model import ChannelDraw, SystemParams

__all__ = [
    "Branch",
    "Scheduler",
    "ScheduleDecision",
    "schedule_max_snr",
    "schedule_two_stage",
    "genie_upper_snr",
    "saturated_set",
    "schedule",
]


class Branch(IntEnum):
    UNSATURATED = 0
    SATURATED = 1
    GENIE_UNSATURATED = 2
    GENIE_SATURATED = 3


class Scheduler(str, Enum):
    MAX_SNR = "max_snr"
    TWO_STAGE = "two_stage"
    GENIE = "genie"


@dataclass(frozen=True)
class ScheduleDecision:
    """Outcome of one selection rule.

    ``interference_gain`` is the gain towards the primary receiver that the
    chosen power is applied through (the minimum gain for the genie), so the
    primary departure rate of the slot is
    ``departure_rate(params, interference_gain, power)``.  For a batch every
    field is an array over slots and ``branch`` holds ``Branch`` codes.
    """

    index: int | np.ndarray
    power: float | np.ndarray
    snr: float | np.ndarray
    branch: Branch | np.ndarray
    interference_gain: float | np.ndarray


def _as_batch(draw: ChannelDraw):
    alpha = np.asarray(draw.alpha_s, dtype=float)
    beta = np.asarray(draw.beta_s, dtype=float)
    if alpha.shape != beta.shape or alpha.ndim not in (1, 2) or alpha.shape[-1] < 1:
        raise ValueError(f"malformed draw: alpha_s {alpha.shape}, beta_s {beta.shape}")
    single = alpha.ndim == 1
    return np.atleast_2d(alpha), np.atleast_2d(beta), single


def _pack(single, index, power, snr, branch, gain) -> ScheduleDecision:
    if single:
        return ScheduleDecision(int(index[0]), float(power[0]), float(snr[0]), Branch(int(branch[0])), float(gain[0]))
    return ScheduleDecision(index, power, snr, branch.astype(np.int8), gain)


def _take(a, idx):
    return np.take_along_axis(a, idx[:, None], axis=1)[:, 0]


def _max_snr(params: SystemParams, alpha, beta):
    K, ps = params.K, params.P_s_max
    p_mu = K / alpha
    power = np.minimum(p_mu, ps)
    idx = np.argmax(power * beta, axis=1)
    a = _take(alpha, idx)
    pw = np.minimum(K / a, ps)
    snr = pw * _take(beta, idx)
    branch = np.where(K / a >= ps, Branch.SATURATED, Branch.UNSATURATED)
    return idx, pw, snr, branch, a


def saturated_set(params: SystemParams, alpha_s):
    """Mask of users whose QoS power ``K/alpha`` strictly exceeds ``P_s_max``."""
    return np.asarray(alpha_s) < params.K / params.P_s_max


def schedule_max_snr(params: SystemParams, draw: ChannelDraw) -> ScheduleDecision:
    alpha, beta, single = _as_batch(draw)
    return _pack(single, *_max_snr(params, alpha, beta))


def schedule_two_stage(params: SystemParams, draw: ChannelDraw) -> ScheduleDecision:
    """Two-stage selection.

    Stage one forms the set of users whose QoS power exceeds ``P_s_max``.
    If that set is nonempty, the member with the largest forward gain is
    scheduled at ``P_s_max``; otherwise the max-SNR choice is used with power
    ``K/alpha``.
    """
    alpha, beta, single = _as_batch(draw)
    idx, pw, snr, branch, a = _max_snr(params, alpha, beta)

    in_s = saturated_set(params, alpha)
    has_s = in_s.any(axis=1)
    s_idx = np.argmax(np.where(in_s, beta, -np.inf), axis=1)

    idx = np.where(has_s, s_idx, idx)
    a = np.where(has_s, _take(alpha, s_idx), a)
    pw = np.where(has_s, params.P_s_max, pw)
    snr = np.where(has_s, params.P_s_max * _take(beta, s_idx), snr)
    branch = np.where(has_s, Branch.SATURATED, branch)
    return _pack(single, idx, pw, snr, branch, a)


def genie_upper_snr(params: SystemParams, draw: ChannelDraw) -> ScheduleDecision:
    """Genie SNR built from ``max(beta)`` and ``min(alpha)``.

    ``index`` is the argmax-beta user and only serves tracing: in the
    unsaturated branch the SNR mixes the gains of two different users.
    """
    alpha, beta, single = _as_batch(draw)
    K, ps = params.K, params.P_s_max
    idx = np.argmax(beta, axis=1)
    b_max = _take(beta, idx)
    a_min = alpha.min(axis=1)
    saturated = K / a_min > ps
    pw = np.where(saturated, ps, K / a_min)
    snr = pw * b_max
    branch = np.where(saturated, Branch.GENIE_SATURATED, Branch.GENIE_UNSATURATED)
    return _pack(single, idx, pw, snr, branch, a_min)


_RULES = {
    Scheduler.MAX_SNR: schedule_max_snr,
    Scheduler.TWO_STAGE: schedule_two_stage,
    Scheduler.GENIE: genie_upper_snr,
}


def schedule(scheduler: Scheduler | str, params: SystemParams, draw: ChannelDraw) -> ScheduleDecision:
    return _RULES[Scheduler(scheduler)](params, draw)
