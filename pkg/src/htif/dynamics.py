"""Integrate-and-fire receivers on a merged event stream.

A receiver listens to a source pool, adds each event's mark (+1/-1) to a
membrane counter started at 0, spikes when the counter first reaches its
threshold b, and resets to 0. Output ISIs are differences of consecutive
firing times (the first is measured from time 0), and each spike records
the count of pool events consumed up to and including its trigger.

The module also provides the abstract first-passage walk (the same
counter driven by i.i.d. +1/-1 steps with success probability p), used to
pin the walk-level constants mean-steps b/(2p-1) for p > 1/2 and
crossing probability (p/(1-p))**b for p < 1/2. The balanced case
p = 1/2 is excluded from the model.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .engine import EventStream
from .errors import DomainError, InsufficientDataError, ModelExclusionError
from .rv import as_generator
from .tailstats import QUANTILE_GRID, LagDependence, lag_exceedance_ratios

__all__ = [
    "ReceiverConfig",
    "SpikeTrain",
    "SuperpositionIndex",
    "run_receiver",
    "run_two_receivers",
    "paired_isis",
    "WalkStats",
    "abstract_walk_first_passage",
    "output_independence_diagnostic",
    "write_spike_train_csv",
]


@dataclass(frozen=True)
class ReceiverConfig:
    """threshold : spikes when the membrane counter reaches this value
    pool : source indices the receiver listens to (empty = every source)
    label : name carried into outputs"""

    threshold: int
    pool: tuple[int, ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        if not (isinstance(self.threshold, (int, np.integer)) and self.threshold >= 1):
            raise DomainError(f"threshold must be an integer >= 1, got {self.threshold}")
        pool = tuple(sorted(int(i) for i in self.pool))
        if len(set(pool)) != len(pool):
            raise DomainError("pool contains repeated indices")
        object.__setattr__(self, "pool", pool)


@dataclass(frozen=True)
class SpikeTrain:
    """Receiver output. ``boundaries[i]`` is the 1-based count of pool
    events consumed up to and including spike i's trigger; ``isis`` are
    firing-time differences in user units (first interval from 0)."""

    label: str
    raw_firing_times: np.ndarray = field(repr=False)
    boundaries: np.ndarray = field(repr=False)
    n_pool_events: int = 0
    silent_tail: bool = False
    time_scale: float = 1.0

    def __len__(self) -> int:
        return self.raw_firing_times.size

    @property
    def firing_times(self) -> np.ndarray:
        return self.time_scale * self.raw_firing_times

    @property
    def raw_isis(self) -> np.ndarray:
        return np.diff(self.raw_firing_times, prepend=0.0)

    @property
    def isis(self) -> np.ndarray:
        return self.time_scale * self.raw_isis


def _pool_or_all(cfg: ReceiverConfig, stream: EventStream) -> tuple[int, ...]:
    return cfg.pool if cfg.pool else tuple(range(stream.n_neurons))


def run_receiver(stream: EventStream, cfg: ReceiverConfig) -> SpikeTrain:
    """Drive one threshold receiver over its pool sub-stream."""
    sub = stream.restrict(_pool_or_all(cfg, stream))
    k = len(sub)
    if k == 0:
        return SpikeTrain(
            label=cfg.label,
            raw_firing_times=np.empty(0),
            boundaries=np.empty(0, dtype=np.int64),
            n_pool_events=0,
            silent_tail=False,
            time_scale=stream.time_scale,
        )
    cums = np.cumsum(sub.marks, dtype=np.int64)
    # spike scan: from reset index r, fire at the first j > r with
    # cums[j] == cums[r] + b; equality lookups use the stably sorted walk
    order = np.argsort(cums, kind="stable")
    sorted_vals = cums[order]
    b = int(cfg.threshold)
    fire_idx: list[int] = []
    base = 0
    last = -1
    while True:
        target = base + b
        lo = int(np.searchsorted(sorted_vals, target, side="left"))
        hi = int(np.searchsorted(sorted_vals, target, side="right"))
        cand = order[lo:hi]
        pos = int(np.searchsorted(cand, last + 1, side="left"))
        if pos >= cand.size:
            break
        j = int(cand[pos])
        fire_idx.append(j)
        base = int(cums[j])
        last = j
    idx = np.asarray(fire_idx, dtype=np.int64)
    return SpikeTrain(
        label=cfg.label,
        raw_firing_times=sub.raw_times[idx],
        boundaries=idx + 1,
        n_pool_events=k,
        silent_tail=(idx[-1] < k - 1) if idx.size else True,
        time_scale=stream.time_scale,
    )


@dataclass(frozen=True)
class SuperpositionIndex:
    """Pairs (j, k) of output ISI indices, one per receiver, whose time
    windows share at least one pooled event common to both receivers."""

    pairs: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def left(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def right(self) -> np.ndarray:
        return self.pairs[:, 1]

    def as_tuples(self) -> list[tuple[int, int]]:
        return [(int(j), int(k)) for j, k in self.pairs]


def run_two_receivers(
    stream: EventStream, cfg_a: ReceiverConfig, cfg_b: ReceiverConfig
):
    """Run both receivers and index their temporally superimposed ISIs.

    An ISI pair (j, k) enters the index when some event whose source lies
    in both pools falls in window j of receiver A and window k of
    receiver B (windows are left-open, right-closed at the firing time;
    events after a receiver's last spike attach to no complete window).
    Disjoint pools therefore produce an empty index.
    """
    train_a = run_receiver(stream, cfg_a)
    train_b = run_receiver(stream, cfg_b)
    shared = sorted(
        set(_pool_or_all(cfg_a, stream)) & set(_pool_or_all(cfg_b, stream))
    )
    if not shared or len(train_a) == 0 or len(train_b) == 0:
        return train_a, train_b, SuperpositionIndex(pairs=np.empty((0, 2), dtype=np.int64))
    mask = np.isin(stream.sources, np.asarray(shared))
    t = stream.raw_times[mask]
    j = np.searchsorted(train_a.raw_firing_times, t, side="left")
    k = np.searchsorted(train_b.raw_firing_times, t, side="left")
    ok = (j < len(train_a)) & (k < len(train_b))
    pairs = np.unique(np.column_stack([j[ok], k[ok]]), axis=0).astype(np.int64)
    return train_a, train_b, SuperpositionIndex(pairs=pairs)


def paired_isis(
    train_a: SpikeTrain, train_b: SpikeTrain, index: SuperpositionIndex
) -> tuple[np.ndarray, np.ndarray]:
    """ISI value pairs selected by a superposition index, in user units."""
    return train_a.isis[index.left], train_b.isis[index.right]


@dataclass(frozen=True)
class WalkStats:
    """Monte Carlo summary of the abstract first-passage walk.

    m_samples : steps-to-threshold for the walkers that crossed
    finite_fraction : crossed / reps
    p_hat : empirical +1 fraction over all consumed steps
    unsettled : walkers neither crossed nor written off; a walker is
        written off only when crossing is impossible within the remaining
        step budget or deeper than the negligible-probability cutoff
    """

    p: float
    threshold: int
    reps: int
    p_hat: float
    m_samples: np.ndarray = field(repr=False)
    finite_fraction: float = 0.0
    unsettled: int = 0
    max_steps: int = 0
    steps_consumed: int = 0

    @property
    def mean_m(self) -> float:
        if self.m_samples.size == 0:
            raise InsufficientDataError("no crossings observed")
        return float(self.m_samples.mean())

    def to_dict(self) -> dict:
        crossed = int(self.m_samples.size)
        return {
            "p": self.p,
            "threshold": self.threshold,
            "reps": self.reps,
            "p_hat": self.p_hat,
            "crossed": crossed,
            "finite_fraction": self.finite_fraction,
            "mean_m": self.mean_m if crossed else None,
            "unsettled": self.unsettled,
            "max_steps": self.max_steps,
            "steps_consumed": self.steps_consumed,
        }


def abstract_walk_first_passage(
    p: float,
    threshold: int,
    *,
    reps: int,
    rng,
    max_steps: int = 1_000_000,
) -> WalkStats:
    """Simulate ``reps`` independent +1/-1 walks until they first reach
    ``threshold`` (or are settled as non-crossing).

    p is the +1 probability in [0, 1]; p = 1/2 is excluded (null-recurrent
    boundary). For p < 1/2 a walker sunk deeper than a cutoff where the
    residual crossing probability is below 2**-70 is settled as
    non-crossing; the budget bound (threshold unreachable in the remaining
    steps) is exact.
    """
    if not (isinstance(threshold, (int, np.integer)) and threshold >= 1):
        raise DomainError(f"threshold must be an integer >= 1, got {threshold}")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if p == 0.5:
        raise ModelExclusionError(
            "p = 1/2 is excluded: the walk is null recurrent and the "
            "crossing-time constants are undefined"
        )
    if reps < 1:
        raise DomainError(f"reps must be >= 1, got {reps}")
    if max_steps < 1:
        raise DomainError(f"max_steps must be >= 1, got {max_steps}")
    gen = as_generator(rng)
    b = int(threshold)
    if p == 0.0:
        # every step is -1: a walker below the start can never cross
        cutoff = b
    elif p < 0.5:
        # crossing from depth d has probability (p/q)**(b + d) < 2**-70
        # beyond this cutoff
        cutoff = int(np.ceil(70.0 * np.log(2.0) / np.log((1.0 - p) / p))) + b
    else:
        cutoff = None
    pos = np.zeros(reps, dtype=np.int64)
    active = np.arange(reps, dtype=np.int64)
    consumed = 0
    crossed_idx: list[np.ndarray] = []
    crossed_m: list[np.ndarray] = []
    plus_total = 0
    steps_total = 0
    budget_elements = 1 << 24
    while active.size and consumed < max_steps:
        ch = int(min(max(16, budget_elements // active.size), 512, max_steps - consumed))
        draws = gen.random((active.size, ch))
        steps = np.where(draws < p, 1, -1).astype(np.int64)
        plus_total += int(np.count_nonzero(steps == 1))
        steps_total += steps.size
        path = pos[active, None] + np.cumsum(steps, axis=1)
        hit = path >= b
        any_hit = hit.any(axis=1)
        if np.any(any_hit):
            rows = np.nonzero(any_hit)[0]
            first = hit[rows].argmax(axis=1)
            crossed_idx.append(active[rows])
            crossed_m.append(consumed + first + 1)
        survivors = ~any_hit
        pos[active[survivors]] = path[survivors, -1]
        active = active[survivors]
        consumed += ch
        if active.size:
            live = np.ones(active.size, dtype=bool)
            remaining = max_steps - consumed
            live &= (pos[active] + remaining) >= b
            if cutoff is not None:
                live &= pos[active] > -cutoff
            active = active[live]
    unsettled = int(active.size)
    if crossed_idx:
        m_all = np.concatenate(crossed_m)
        order = np.argsort(np.concatenate(crossed_idx), kind="stable")
        m_samples = m_all[order].astype(np.int64)
    else:
        m_samples = np.empty(0, dtype=np.int64)
    return WalkStats(
        p=float(p),
        threshold=b,
        reps=int(reps),
        p_hat=plus_total / steps_total if steps_total else float("nan"),
        m_samples=m_samples,
        finite_fraction=m_samples.size / reps,
        unsettled=unsettled,
        max_steps=int(max_steps),
        steps_consumed=int(steps_total),
    )


def write_spike_train_csv(train: SpikeTrain, path_or_file) -> None:
    """Dump a train as (i, isi, pool_events) rows; isi in user time units."""
    if hasattr(path_or_file, "write"):
        _write_train_rows(train, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_train_rows(train, fh)


def _write_train_rows(train: SpikeTrain, fh) -> None:
    isis = train.isis
    w = csv.writer(fh)
    w.writerow(["i", "isi", "pool_events"])
    for k in range(len(train)):
        w.writerow([k + 1, repr(float(isis[k])), int(train.boundaries[k])])


def output_independence_diagnostic(
    isis,
    lags=(1, 2, 3),
    quantiles=QUANTILE_GRID,
    min_samples: int = 10_000,
) -> LagDependence:
    """Serial tail dependence of output ISIs (SpikeTrain or array)."""
    if isinstance(isis, SpikeTrain):
        arr = isis.raw_isis
    else:
        arr = np.asarray(isis, dtype=np.float64)
    if arr.size < min_samples:
        raise InsufficientDataError(
            f"output diagnostic needs >= {min_samples} ISIs, got {arr.size}"
        )
    return lag_exceedance_ratios(arr, lags=lags, quantiles=quantiles)
