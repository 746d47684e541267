"""Superposition event engine for heavy-tailed input trains.

The engine merges the input ISIs of n neurons into one marked point
process. Bookkeeping is in absolute event times: every event time is the
previous event time of its source plus one ISI (a single addition), and
every waiting time is a single subtraction of consecutive merged times.
Because each derived value is one floating-point operation away from the
raw draws, a stepwise run, the vectorized builder, and any straightforward
reference implementation agree bit for bit.

Scheduling modes mirror the input modes:

* ``round_synchronized_common_shock``: all neurons start a round together;
  a neuron that fired waits until the round barrier (the round's last
  event) before drawing its next interval.
* ``asynchronous_common_shock`` and ``independent_baseline``: each neuron
  runs on its own clock (its k-th ISI is the k-th entry of its row); the
  merged stream is truncated at the earliest per-neuron total so no
  neuron's silence is misread as a pooled gap.

All internal times are scale-free; time_scale multiplies raw values once
at each output boundary.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError, InvariantViolationError
from .inputs import InputGeneratorSpec, IsiMatrixChunk, generate_isi_chunk
from .rv import RngHandle
from .tailstats import QUANTILE_GRID, LagDependence, lag_exceedance_ratios

__all__ = [
    "NetworkTopology",
    "Event",
    "EventStream",
    "initial_residuals",
    "EngineState",
    "init_engine",
    "next_event",
    "build_event_stream",
    "stream_from_columns",
    "tau_independence_diagnostic",
    "write_events_csv",
]


@dataclass(frozen=True)
class NetworkTopology:
    """Static wiring of the superposition network.

    excitatory : boolean mask, True -> the neuron's events carry mark +1,
        False -> mark -1
    pool_a, pool_b : receiver pools (sorted index tuples); default both
        pools cover every neuron
    jump_amplitude : membrane jump per event; only the unit jump is defined
    """

    n: int
    excitatory: tuple[bool, ...]
    pool_a: tuple[int, ...] = ()
    pool_b: tuple[int, ...] = ()
    jump_amplitude: int = 1

    def __post_init__(self) -> None:
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise DomainError(f"n must be a positive integer, got {self.n}")
        exc = tuple(bool(v) for v in self.excitatory)
        if len(exc) != self.n:
            raise DomainError(f"excitatory mask must have length n={self.n}")
        object.__setattr__(self, "excitatory", exc)
        if self.jump_amplitude != 1:
            raise DomainError("only unit jump amplitude is defined")
        for name in ("pool_a", "pool_b"):
            pool = tuple(sorted(int(i) for i in getattr(self, name)))
            if not pool:
                pool = tuple(range(self.n))
            if len(set(pool)) != len(pool):
                raise DomainError(f"{name} contains repeated indices")
            if pool[0] < 0 or pool[-1] >= self.n:
                raise DomainError(f"{name} indices must lie in [0, {self.n})")
            object.__setattr__(self, name, pool)

    @property
    def marks(self) -> np.ndarray:
        return np.where(np.asarray(self.excitatory), 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Event:
    time: float
    source: int
    mark: int


@dataclass(frozen=True)
class EventStream:
    """Merged marked point process in raw (scale-free) time units.

    ``raw_taus[k]`` is exactly ``raw_times[k] - raw_times[k-1]`` (first
    entry measured from 0). ``times``/``taus`` apply ``time_scale`` once.
    """

    raw_times: np.ndarray = field(repr=False)
    sources: np.ndarray = field(repr=False)
    marks: np.ndarray = field(repr=False)
    raw_taus: np.ndarray = field(repr=False)
    time_scale: float = 1.0
    n_neurons: int = 1

    def __len__(self) -> int:
        return self.raw_times.size

    @property
    def times(self) -> np.ndarray:
        return self.time_scale * self.raw_times

    @property
    def taus(self) -> np.ndarray:
        return self.time_scale * self.raw_taus

    def restrict(self, pool) -> "EventStream":
        """Sub-stream of the given sources; waiting times are recomputed
        between the retained events (pool-local gaps)."""
        pool = np.asarray(sorted(set(int(i) for i in pool)))
        if pool.size and (pool[0] < 0 or pool[-1] >= self.n_neurons):
            raise DomainError("pool indices out of range")
        mask = np.isin(self.sources, pool)
        kept = self.raw_times[mask]
        return EventStream(
            raw_times=kept,
            sources=self.sources[mask],
            marks=self.marks[mask],
            raw_taus=np.diff(kept, prepend=0.0),
            time_scale=self.time_scale,
            n_neurons=self.n_neurons,
        )


def _check_offsets(spec: InputGeneratorSpec, offsets) -> np.ndarray:
    if isinstance(offsets, str):
        if offsets != "zero":
            raise DomainError(f"offsets must be an array or 'zero', got {offsets!r}")
        return np.zeros(spec.n)
    arr = np.asarray(offsets, dtype=np.float64)
    if arr.shape != (spec.n,):
        raise DomainError(f"offsets must have shape ({spec.n},)")
    if not np.all(np.isfinite(arr) & (arr >= 0.0)):
        raise DomainError("offsets must be finite and nonnegative")
    return arr


def initial_residuals(
    spec: InputGeneratorSpec,
    offsets,
    rng,
    size: int | None = None,
    *,
    block: int = 4096,
    max_blocks: int = 10_000,
) -> np.ndarray:
    """Residual vectors Theta = S - t for observers at per-neuron ages t.

    Candidate columns S are drawn from the input law and accepted when
    every component strictly exceeds its offset; the residuals of the
    accepted columns are returned in draw order, shape (n,) for
    ``size=None`` else (n, size). Offsets are in user time units.
    """
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    raw_offsets = _check_offsets(spec, offsets) / spec.tail.scale
    needed = 1 if size is None else int(size)
    if needed < 1:
        raise DomainError(f"size must be >= 1, got {size}")
    alpha = spec.tail.alpha
    collected: list[np.ndarray] = []
    have = 0
    for _ in range(max_blocks):
        shocks = (1.0 - gen.random(block)) ** (-1.0 / alpha)
        if spec.common_shock:
            u = spec.multiplier_lo + (
                spec.multiplier_hi - spec.multiplier_lo
            ) * gen.random((spec.n, block))
            entries = u * shocks[None, :]
        else:
            entries = (1.0 - gen.random((spec.n, block))) ** (-1.0 / alpha)
        ok = np.all(entries > raw_offsets[:, None], axis=0)
        if np.any(ok):
            collected.append(entries[:, ok] - raw_offsets[:, None])
            have += int(np.count_nonzero(ok))
        if have >= needed:
            theta = np.concatenate(collected, axis=1)[:, :needed]
            return theta[:, 0] if size is None else theta
    raise InsufficientDataError(
        f"offset rejection accepted {have}/{needed} columns after "
        f"{max_blocks} blocks; offsets too deep for this budget"
    )


@dataclass
class EngineState:
    """Mutable stepwise-engine state (advance with ``next_event``)."""

    topology: NetworkTopology
    spec: InputGeneratorSpec
    current_raw_time: float = 0.0
    event_count: int = 0
    exhausted: bool = False
    # round-synchronized bookkeeping
    _cols: np.ndarray | None = field(default=None, repr=False)
    _round: int = 0
    _round_times: np.ndarray | None = field(default=None, repr=False)
    _fired: np.ndarray | None = field(default=None, repr=False)
    _round_start: float = 0.0
    # free-running bookkeeping
    _sched: np.ndarray | None = field(default=None, repr=False)
    _ptr: np.ndarray | None = field(default=None, repr=False)
    _horizon: float = 0.0

    @property
    def residuals(self) -> np.ndarray:
        """Time to each neuron's next scheduled event, in user units.
        NaN marks a neuron with no schedule yet (dormant until the round
        barrier, or past the stream horizon)."""
        out = np.full(self.topology.n, np.nan)
        if self.spec.mode == "round_synchronized_common_shock":
            live = ~self._fired
            out[live] = self._round_times[live] - self.current_raw_time
        else:
            live = self._ptr < self._sched.shape[1]
            nxt = np.where(live, self._sched[np.arange(self.topology.n), np.minimum(self._ptr, self._sched.shape[1] - 1)], np.nan)
            nxt = np.where(nxt <= self._horizon, nxt, np.nan)
            out = nxt - self.current_raw_time
        return self.spec.tail.scale * out


def init_engine(
    topology: NetworkTopology,
    spec: InputGeneratorSpec,
    *,
    rounds: int,
    offsets="zero",
    rng: RngHandle,
) -> EngineState:
    """Prepare a stepwise run over a fixed round budget.

    The input columns and the rejection-sampled initial residuals are
    drawn up front from two derived streams of ``rng``, so a stepwise run
    and ``build_event_stream`` with the same arguments emit bit-identical
    events.
    """
    if topology.n != spec.n:
        raise DomainError("topology and spec disagree on n")
    if not isinstance(rng, RngHandle):
        raise DomainError("init_engine needs an RngHandle to derive substreams")
    chunk = generate_isi_chunk(spec, rounds, rng.derive(0))
    theta1 = initial_residuals(spec, offsets, rng.derive(1))
    cols = np.concatenate([theta1[:, None], chunk.raw_entries], axis=1)
    state = EngineState(topology=topology, spec=spec, _cols=cols)
    if spec.mode == "round_synchronized_common_shock":
        state._round = 0
        state._round_start = 0.0
        state._round_times = state._round_start + cols[:, 0]
        state._fired = np.zeros(spec.n, dtype=bool)
    else:
        state._sched = np.cumsum(cols, axis=1)
        state._ptr = np.zeros(spec.n, dtype=np.int64)
        state._horizon = float(state._sched[:, -1].min())
    return state


def next_event(state: EngineState):
    """Advance one event; returns (tau, Event, state) in user time units,
    or None once the schedule is exhausted. State is updated in place."""
    if state.exhausted:
        return None
    scale = state.spec.tail.scale
    if state.spec.mode == "round_synchronized_common_shock":
        masked = np.where(state._fired, np.inf, state._round_times)
        m = int(np.argmin(masked))
        t = float(state._round_times[m])
        tau_raw = t - state.current_raw_time
        state._fired[m] = True
        state.current_raw_time = t
        state.event_count += 1
        if bool(state._fired.all()):
            state._round += 1
            if state._round >= state._cols.shape[1]:
                state.exhausted = True
            else:
                # barrier: the round's last event time starts the next round
                state._round_start = t
                state._round_times = state._round_start + state._cols[:, state._round]
                state._fired[:] = False
    else:
        n, width = state._sched.shape
        live = state._ptr < width
        nxt = np.where(live, state._sched[np.arange(n), np.minimum(state._ptr, width - 1)], np.inf)
        m = int(np.argmin(nxt))
        t = float(nxt[m])
        if not np.isfinite(t) or t > state._horizon:
            state.exhausted = True
            return None
        tau_raw = t - state.current_raw_time
        state._ptr[m] += 1
        state.current_raw_time = t
        state.event_count += 1
        rest = np.where(state._ptr < width, state._sched[np.arange(n), np.minimum(state._ptr, width - 1)], np.inf)
        if not np.any(rest <= state._horizon):
            state.exhausted = True
    if tau_raw < 0.0 or not np.isfinite(tau_raw):
        # gaps are nonnegative by construction (ties give exactly 0);
        # anything else means the internal schedule was corrupted
        raise InvariantViolationError(
            f"invalid inter-event gap {tau_raw!r} at event {state.event_count}"
        )
    mark = 1 if state.topology.excitatory[m] else -1
    event = Event(time=scale * t, source=m, mark=mark)
    return scale * tau_raw, event, state


def stream_from_columns(
    topology: NetworkTopology,
    theta1_raw: np.ndarray,
    columns_raw: np.ndarray,
    mode: str,
    time_scale: float = 1.0,
) -> EventStream:
    """Assemble the merged stream from explicit raw columns.

    ``theta1_raw`` is the first-event column (residuals from time 0);
    ``columns_raw`` (n, R) holds the later ISIs. This is the vectorized
    core behind ``build_event_stream``; it is exposed so tests can feed
    hand-built or transformed columns through the identical arithmetic.
    """
    theta1_raw = np.asarray(theta1_raw, dtype=np.float64)
    columns_raw = np.asarray(columns_raw, dtype=np.float64)
    n = topology.n
    if theta1_raw.shape != (n,) or (columns_raw.size and columns_raw.shape[0] != n):
        raise DomainError("column arrays inconsistent with topology")
    if not (np.all(theta1_raw > 0.0) and np.all(columns_raw > 0.0)):
        raise DomainError("ISIs and residuals must be strictly positive")
    cols = np.concatenate([theta1_raw[:, None], columns_raw], axis=1)
    marks_by_source = topology.marks
    if mode == "round_synchronized_common_shock":
        maxima = cols.max(axis=0)
        starts = np.concatenate([[0.0], np.cumsum(maxima[:-1])])
        times = starts[None, :] + cols
        order = np.argsort(times, axis=0, kind="stable")
        times_flat = np.take_along_axis(times, order, axis=0).T.ravel()
        sources_flat = order.T.ravel().astype(np.int64)
    else:
        sched = np.cumsum(cols, axis=1)
        horizon = sched[:, -1].min()
        times_all = sched.ravel()
        sources_all = np.repeat(np.arange(n, dtype=np.int64), cols.shape[1])
        keep = times_all <= horizon
        times_kept = times_all[keep]
        sources_kept = sources_all[keep]
        order = np.lexsort((sources_kept, times_kept))
        times_flat = times_kept[order]
        sources_flat = sources_kept[order]
    return EventStream(
        raw_times=times_flat,
        sources=sources_flat,
        marks=marks_by_source[sources_flat],
        raw_taus=np.diff(times_flat, prepend=0.0),
        time_scale=float(time_scale),
        n_neurons=n,
    )


def build_event_stream(
    topology: NetworkTopology,
    spec: InputGeneratorSpec,
    *,
    rounds: int,
    offsets="zero",
    rng: RngHandle,
) -> EventStream:
    """Vectorized twin of a full stepwise run (bit-identical output)."""
    if topology.n != spec.n:
        raise DomainError("topology and spec disagree on n")
    if not isinstance(rng, RngHandle):
        raise DomainError("build_event_stream needs an RngHandle")
    chunk = generate_isi_chunk(spec, rounds, rng.derive(0))
    theta1 = initial_residuals(spec, offsets, rng.derive(1))
    return stream_from_columns(
        topology, theta1, chunk.raw_entries, spec.mode, time_scale=spec.tail.scale
    )


def tau_independence_diagnostic(
    stream,
    lags=None,
    quantiles=QUANTILE_GRID,
    min_samples: int = 100_000,
) -> LagDependence:
    """Serial tail dependence of the merged waiting times.

    Within a shock round consecutive waiting times share one giant shock,
    so sub-round lags (below the neuron count) are expected to show
    dependence; the asymptotic-independence statement concerns lags of at
    least one full round. Accepts an EventStream or a raw tau array.
    """
    if isinstance(stream, EventStream):
        taus = stream.raw_taus
        n = stream.n_neurons
    else:
        taus = np.asarray(stream, dtype=np.float64)
        n = 1
    if lags is None:
        lags = tuple(range(max(1, n), 2 * n + 2))
    if taus.size < min_samples:
        raise InsufficientDataError(
            f"tau diagnostic needs >= {min_samples} waiting times, got {taus.size}"
        )
    return lag_exceedance_ratios(taus, lags=lags, quantiles=quantiles)


def write_events_csv(stream: EventStream, path_or_file) -> None:
    """Dump a stream as (time, source, mark) rows in user time units.

    Accepts a path or an already-open text file object, so long runs can
    stream into a pipe or an incrementally flushed descriptor.
    """
    if hasattr(path_or_file, "write"):
        _write_event_rows(stream, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_event_rows(stream, fh)


def _write_event_rows(stream: EventStream, fh) -> None:
    times = stream.times
    w = csv.writer(fh)
    w.writerow(["time", "source", "mark"])
    for k in range(len(stream)):
        w.writerow([repr(float(times[k])), int(stream.sources[k]), int(stream.marks[k])])
