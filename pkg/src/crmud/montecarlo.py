"""Slot-level Monte Carlo of the interweaved system.

One slot: the primary is busy or idle, the secondary network senses the
channel, and if it believes the channel is free the scheduled secondary
transmitter sends at its QoS-limited power.  Busy slots with missed
detection see the primary as interference at the secondary receiver and
the secondary as interference at the primary receiver.

Reproducibility
---------------
Trials are grouped into fixed blocks of ``BLOCK_SLOTS`` slots.  Block ``b``
at population size ``N`` draws from ``SeedSequence(seed, spawn_key=(N, b))``,
so a block's content never depends on which worker ran it.  All schedulers
evaluated in one call see the same draws (a shared random stream), and block
partial sums are combined with ``math.fsum``, which is exact and therefore
independent of completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import ChannelDraw, SystemParams, departure_rate, open_uniform, sample_channels
from .sched import Branch, ScheduleDecision, Scheduler, schedule

__all__ = [
    "BLOCK_SLOTS",
    "OccupancyMode",
    "SlotOutcome",
    "CapacityEstimate",
    "QueueResult",
    "TrialResult",
    "simulate_slot",
    "run_trials",
    "estimate_capacity",
    "estimate_departure_rate",
    "simulate_queue",
    "block_rng",
]

BLOCK_SLOTS = 8192
_QUEUE_BATCHES = 32


@dataclass(frozen=True)
class OccupancyMode:
    """How the primary busy/idle state of a slot is generated.

    ``analytic``: busy with probability ``min(1, lam/mu_bar)``.  When
    ``mu_bar`` is None the departure rate of the slot's own scheduled
    transmitter is used, which gives weight ``lam/mu_min`` to unsaturated
    slots and ``lam/mu(alpha, P_s_max)`` to saturated ones.

    ``queue``: an explicit Bernoulli-arrival queue whose head-of-line packet
    leaves on primary success; the slot is busy when the queue is nonempty.
    """

    kind: str = "analytic"
    mu_bar: float | None = None

    def __post_init__(self):
        if self.kind not in ("analytic", "queue"):
            raise ValueError(f"occupancy must be 'analytic' or 'queue', got {self.kind!r}")
        if self.mu_bar is not None:
            if self.kind != "analytic":
                raise ValueError("mu_bar only applies to analytic occupancy")
            if not 0.0 < self.mu_bar <= 1.0:
                raise ValueError(f"mu_bar must lie in (0, 1], got {self.mu_bar}")

    @classmethod
    def analytic(cls, mu_bar: float | None = None) -> "OccupancyMode":
        return cls("analytic", mu_bar)

    @classmethod
    def queue(cls) -> "OccupancyMode":
        return cls("queue")


@dataclass(frozen=True)
class SlotOutcome:
    primary_busy: bool
    sensing_says_busy: bool
    decision: ScheduleDecision | None
    secondary_rate: float
    primary_success: bool | None


@dataclass(frozen=True)
class CapacityEstimate:
    """Sample mean and standard error of a per-slot quantity.

    ``busy_mean`` and ``idle_mean`` split ``mean`` into the contributions of
    busy and idle slots (they sum to ``mean``).
    """

    mean: float
    std_error: float
    trials: int
    busy_mean: float = 0.0
    idle_mean: float = 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        h = 1.959963984540054 * self.std_error
        return self.mean - h, self.mean + h


class QueueResult(NamedTuple):
    busy_fraction: float
    empirical_mu: float
    saturated: bool


@dataclass
class TrialResult:
    """Estimates for every scheduler evaluated on one shared random stream."""

    capacity: dict = field(default_factory=dict)
    departure: dict = field(default_factory=dict)
    busy_fraction: dict = field(default_factory=dict)
    queue_mu: dict = field(default_factory=dict)


def block_rng(seed: int, N: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(N, block)))


@dataclass
class _SlotRandomness:
    draw: ChannelDraw
    u_busy: np.ndarray
    u_sense: np.ndarray
    u_arrival: np.ndarray


def _draw_slots(params: SystemParams, rng: np.random.Generator, slots: int) -> _SlotRandomness:
    draw = sample_channels(params, rng, slots)
    return _SlotRandomness(draw, open_uniform(rng, slots), open_uniform(rng, slots), open_uniform(rng, slots))


@dataclass
class _SlotArrays:
    decision: ScheduleDecision | None
    rate_busy: np.ndarray
    rate_idle: np.ndarray
    success_if_busy: np.ndarray
    mu_slot: np.ndarray
    detected: np.ndarray
    false_alarm: np.ndarray


def _evaluate(params: SystemParams, scheduler: Scheduler | None, rnd: _SlotRandomness) -> _SlotArrays:
    """Per-slot outcomes for both possible primary states."""
    draw = rnd.draw
    detected = rnd.u_sense < params.p_d
    false_alarm = rnd.u_sense < params.p_f
    if scheduler is None:
        zeros = np.zeros_like(rnd.u_sense)
        dec, snr, interference = None, zeros, zeros
    else:
        dec = schedule(scheduler, params, draw)
        snr = dec.snr
        interference = dec.interference_gain * dec.power
    mu_slot = departure_rate(params, 1.0, interference)

    rate_busy = np.where(detected, 0.0, np.log2(1.0 + snr / (1.0 + draw.beta_p * params.P_p)))
    rate_idle = np.where(false_alarm, 0.0, np.log2(1.0 + snr))
    # log2(1 + SINR) >= R  <=>  alpha_p P_p >= (2^R - 1)(1 + I)
    sinr_num = draw.alpha_p * params.P_p
    success = sinr_num >= (2.0**params.R - 1.0) * (1.0 + np.where(detected, 0.0, interference))
    return _SlotArrays(dec, rate_busy, rate_idle, success, mu_slot, detected, false_alarm)


def _analytic_busy(params: SystemParams, occupancy: OccupancyMode, arr: _SlotArrays, u_busy):
    mu_bar = arr.mu_slot if occupancy.mu_bar is None else occupancy.mu_bar
    return u_busy < np.minimum(1.0, params.lam / mu_bar)


def _queue_busy(arrivals: np.ndarray, successes: np.ndarray) -> np.ndarray:
    """Busy indicator of a discrete-time queue, vectorised.

    Per slot an arrival joins first, then the head-of-line packet leaves on
    success.  Queue length obeys ``Q' = max(Q + a - s, 0)``, whose solution
    from an empty start is ``S_t - min_{k<=t} S_k`` with ``S`` the partial
    sums of ``a - s``.
    """
    steps = arrivals.astype(np.int64) - successes.astype(np.int64)
    s = np.concatenate(([0], np.cumsum(steps)))
    q = s - np.minimum.accumulate(s)
    return (q[:-1] + arrivals) > 0


def _run_block(args):
    params, schedulers, occupancy, seed, block, slots = args
    rnd = _draw_slots(params, block_rng(seed, params.N, block), slots)
    out = {}
    for sch in schedulers:
        arr = _evaluate(params, sch, rnd)
        if occupancy.kind == "queue":
            out[sch] = {
                "rate_busy": arr.rate_busy,
                "rate_idle": arr.rate_idle,
                "success": arr.success_if_busy,
                "arrival": rnd.u_arrival < params.lam,
            }
            continue
        busy = _analytic_busy(params, occupancy, arr, rnd.u_busy)
        rate = np.where(busy, arr.rate_busy, arr.rate_idle)
        succ = arr.success_if_busy.astype(float)
        out[sch] = {
            "n": slots,
            "sum": float(np.sum(rate)),
            "sum2": float(np.sum(rate * rate)),
            "busy_sum": float(np.sum(rate[busy])),
            "busy_count": int(np.count_nonzero(busy)),
            "succ": float(np.sum(succ)),
        }
    return block, out


def _blocks(trials: int):
    full, rest = divmod(trials, BLOCK_SLOTS)
    sizes = [BLOCK_SLOTS] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _mean_se(total: float, total2: float, n: int) -> tuple[float, float]:
    mean = total / n
    if n < 2:
        return mean, 0.0
    var = max((total2 - total * total / n) / (n - 1), 0.0)
    return mean, math.sqrt(var / n)


def _bernoulli(successes: float, n: int) -> CapacityEstimate:
    m, se = _mean_se(successes, successes, n)
    return CapacityEstimate(m, se, n)


def run_trials(
    params: SystemParams,
    schedulers: Sequence[Scheduler | str | None],
    occupancy: OccupancyMode = OccupancyMode(),
    trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> TrialResult:
    """Evaluate several schedulers over the same ``trials`` slots.

    Returns capacity estimates (bits/s/Hz), primary departure-rate estimates
    (every slot evaluated as busy) and the fraction of busy slots, keyed by
    scheduler (``None`` is a permanently silent secondary network).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    scheds = [None if s is None else Scheduler(s) for s in schedulers]
    tasks = [(params, scheds, occupancy, seed, b, n) for b, n in _blocks(trials)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, tasks))
    else:
        results = [_run_block(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    parts = [r[1] for r in results]

    res = TrialResult()
    for sch in scheds:
        if occupancy.kind == "queue":
            _collect_queue(params, sch, [p[sch] for p in parts], res)
            continue
        blocks = [p[sch] for p in parts]
        total = math.fsum(b["sum"] for b in blocks)
        total2 = math.fsum(b["sum2"] for b in blocks)
        busy_total = math.fsum(b["busy_sum"] for b in blocks)
        mean, se = _mean_se(total, total2, trials)
        res.capacity[sch] = CapacityEstimate(mean, se, trials, busy_total / trials, (total - busy_total) / trials)
        res.departure[sch] = _bernoulli(math.fsum(b["succ"] for b in blocks), trials)
        res.busy_fraction[sch] = sum(b["busy_count"] for b in blocks) / trials
    return res


def _collect_queue(params: SystemParams, sch, blocks, res: TrialResult) -> None:
    cat = {k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]}
    n = cat["rate_busy"].size
    busy = _queue_busy(cat["arrival"], cat["success"])
    rate = np.where(busy, cat["rate_busy"], cat["rate_idle"])
    mean = float(np.sum(rate)) / n
    if n >= 2 * _QUEUE_BATCHES:
        # batch means: queue state correlates neighbouring slots
        means = np.array([c.mean() for c in np.array_split(rate, _QUEUE_BATCHES)])
        se = float(np.std(means, ddof=1) / math.sqrt(_QUEUE_BATCHES))
    else:
        _, se = _mean_se(float(np.sum(rate)), float(np.sum(rate * rate)), n)
    busy_mean = float(np.sum(rate[busy])) / n
    res.capacity[sch] = CapacityEstimate(mean, se, n, busy_mean, mean - busy_mean)
    res.departure[sch] = _bernoulli(float(np.count_nonzero(cat["success"])), n)
    n_busy = int(np.count_nonzero(busy))
    res.busy_fraction[sch] = n_busy / n
    # service success among actual attempts; falls back to all slots when the queue never fills
    res.queue_mu[sch] = (
        float(np.count_nonzero(cat["success"][busy])) / n_busy if n_busy else res.departure[sch].mean
    )


def estimate_capacity(
    params: SystemParams,
    scheduler: Scheduler | str,
    occupancy: OccupancyMode = OccupancyMode(),
    trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> CapacityEstimate:
    """Average secondary rate over ``trials`` slots, deterministic in ``seed``."""
    sch = Scheduler(scheduler)
    return run_trials(params, [sch], occupancy, trials, seed, workers).capacity[sch]


def estimate_departure_rate(
    params: SystemParams,
    scheduler: Scheduler | str | None,
    trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> CapacityEstimate:
    """Fraction of busy slots in which the primary packet gets through.

    Every simulated slot is treated as busy; ``scheduler=None`` keeps the
    secondary network silent.
    """
    sch = None if scheduler is None else Scheduler(scheduler)
    return run_trials(params, [sch], OccupancyMode(), trials, seed, workers).departure[sch]


def simulate_queue(
    params: SystemParams,
    scheduler: Scheduler | str | None,
    slots: int = 1_000_000,
    seed: int = 0,
) -> QueueResult:
    """Run the explicit primary queue for ``slots`` slots.

    Returns the long-run busy fraction, the empirical service success rate
    ``mu_hat`` and a flag set when ``lam >= mu_hat`` (unstable queue).
    """
    sch = None if scheduler is None else Scheduler(scheduler)
    res = run_trials(params, [sch], OccupancyMode.queue(), slots, seed)
    mu_hat = res.queue_mu[sch]
    return QueueResult(res.busy_fraction[sch], mu_hat, params.lam >= mu_hat)


def simulate_slot(
    params: SystemParams,
    scheduler: Scheduler | str | None,
    occupancy: OccupancyMode,
    rng: np.random.Generator,
    primary_busy: bool | None = None,
) -> SlotOutcome:
    """Simulate one slot.

    In queue mode the busy state comes from the queue, so ``primary_busy``
    must be given; in analytic mode it is drawn unless given.
    """
    if occupancy.kind == "queue" and primary_busy is None:
        raise ValueError("queue occupancy needs the queue's busy state for a single slot")
    sch = None if scheduler is None else Scheduler(scheduler)
    rnd = _draw_slots(params, rng, 1)
    arr = _evaluate(params, sch, rnd)
    if primary_busy is None:
        primary_busy = bool(_analytic_busy(params, occupancy, arr, rnd.u_busy)[0])

    says_busy = bool(arr.detected[0]) if primary_busy else bool(arr.false_alarm[0])
    decision = None
    if arr.decision is not None and not says_busy:
        d = arr.decision
        decision = ScheduleDecision(
            int(d.index[0]), float(d.power[0]), float(d.snr[0]), Branch(int(d.branch[0])), float(d.interference_gain[0])
        )
    rate = float(arr.rate_busy[0] if primary_busy else arr.rate_idle[0])
    success = bool(arr.success_if_busy[0]) if primary_busy else None
    return SlotOutcome(primary_busy, says_busy, decision, rate, success)
