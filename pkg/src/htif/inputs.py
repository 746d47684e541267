"""Generation and auditing of dependent heavy-tailed ISI inputs.

A chunk is an (n neurons) x (rounds) matrix of interspike intervals. In the
common-shock modes every column j shares one Pareto shock W_j, and entry
(i, j) is U_ij * W_j with U_ij a bounded uniform multiplier, which realizes
all four structural hypotheses the downstream theorems need:

H1  the column vectors are jointly regularly varying with index alpha,
H2  the marginals are tail-equivalent regularly varying variables,
H3  each neuron's own ISI sequence is pairwise asymptotically independent
    across rounds,
H4  the n components of a column are fully tail-dependent.

``independent_baseline`` drops the shared shock (i.i.d. Pareto entries) and
is the negative control: it must fail H4 and nothing else.

All entries are stored in scale-free units (TailModel.scale == 1 internally)
and materialized by a single multiplication at the output boundary, so
rescaling the tail model rescales every derived quantity bit-exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, InvariantViolationError
from .rv import RngHandle, TailModel, as_generator

__all__ = [
    "MODES",
    "InputGeneratorSpec",
    "IsiMatrixChunk",
    "generate_isi_chunk",
    "HypothesisReport",
    "validate_hypotheses",
    "write_chunk_csv",
]

MODES = (
    "round_synchronized_common_shock",
    "asynchronous_common_shock",
    "independent_baseline",
)

MIN_AUDIT_ROUNDS = 10_000


@dataclass(frozen=True)
class InputGeneratorSpec:
    """Parameters of the input construction.

    n : number of neurons (>= 1)
    tail : Pareto tail model shared by shocks and marginals
    multiplier_lo, multiplier_hi : bounded multiplier interval, 0 < lo <= hi;
        the degenerate interval [1, 1] gives pure synchronized shocks
    mode : one of ``MODES``
    """

    n: int
    tail: TailModel
    multiplier_lo: float = 1.0
    multiplier_hi: float = 1.0
    mode: str = "round_synchronized_common_shock"

    def __post_init__(self) -> None:
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not isinstance(self.tail, TailModel):
            raise DomainError("tail must be a TailModel")
        lo, hi = self.multiplier_lo, self.multiplier_hi
        if not (0.0 < lo <= hi and np.isfinite(hi)):
            raise DomainError(f"multiplier interval must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    @property
    def common_shock(self) -> bool:
        return self.mode != "independent_baseline"


@dataclass(frozen=True)
class IsiMatrixChunk:
    """A block of generated input ISIs.

    ``raw_entries`` has shape (n, rounds) in scale-free units; ``raw_shocks``
    holds the column shocks (for the independent baseline: the designated
    reference Pareto samples used by the H4 audit, unrelated to the entries).
    User-facing values are the raw arrays times ``spec.tail.scale``.
    """

    spec: InputGeneratorSpec
    raw_entries: np.ndarray = field(repr=False)
    raw_shocks: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n, rounds = self.raw_entries.shape
        if n != self.spec.n or self.raw_shocks.shape != (rounds,):
            raise InvariantViolationError("chunk arrays inconsistent with spec")

    @property
    def n(self) -> int:
        return self.raw_entries.shape[0]

    @property
    def rounds(self) -> int:
        return self.raw_entries.shape[1]

    @property
    def entries(self) -> np.ndarray:
        """ISIs in user time units (scale applied once)."""
        return self.spec.tail.scale * self.raw_entries

    @property
    def shocks(self) -> np.ndarray:
        return self.spec.tail.scale * self.raw_shocks

    def check_invariants(self) -> None:
        """Positivity and, under common shocks, the column envelope."""
        if not np.all(self.raw_entries > 0.0):
            raise InvariantViolationError("nonpositive ISI entry")
        if not np.all(self.raw_shocks > 0.0):
            raise InvariantViolationError("nonpositive shock")
        if self.spec.common_shock:
            lo = self.spec.multiplier_lo * self.raw_shocks
            hi = self.spec.multiplier_hi * self.raw_shocks
            # single-rounding slack on the envelope products
            eps = 4.0 * np.finfo(np.float64).eps
            if np.any(self.raw_entries < lo[None, :] * (1.0 - eps)) or np.any(
                self.raw_entries > hi[None, :] * (1.0 + eps)
            ):
                raise InvariantViolationError("entry outside its shock envelope")


def _raw_pareto(alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    # scale-free inverse transform; scale is applied at output boundaries
    return (1.0 - gen.random(size)) ** (-1.0 / alpha)


def generate_isi_chunk(spec: InputGeneratorSpec, rounds: int, rng) -> IsiMatrixChunk:
    """Draw a chunk of ``rounds`` columns.

    Draw order is fixed (shocks first, then the multiplier matrix) so a
    chunk is a pure function of (spec, rounds, rng handle).
    """
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    gen = as_generator(rng)
    alpha = spec.tail.alpha
    shocks = _raw_pareto(alpha, gen, rounds)
    if spec.common_shock:
        u = spec.multiplier_lo + (spec.multiplier_hi - spec.multiplier_lo) * gen.random(
            (spec.n, rounds)
        )
        entries = u * shocks[None, :]
    else:
        entries = _raw_pareto(alpha, gen, (spec.n, rounds))
    return IsiMatrixChunk(spec=spec, raw_entries=entries, raw_shocks=shocks)


def _hill_alpha(x: np.ndarray, k: int | None = None) -> float:
    # local Hill point estimate; the full estimator lives in tailstats
    xs = np.sort(x)[::-1]
    if k is None:
        k = int(np.ceil(x.size ** 0.6))
    k = min(k, x.size - 1)
    return float(1.0 / np.mean(np.log(xs[:k] / xs[k])))


@dataclass(frozen=True)
class HypothesisReport:
    """Audit outcome for one chunk, one block per hypothesis."""

    rounds: int
    alpha: float
    h1_radial_alpha: float
    h1_pass: bool
    h2_marginal_alphas: tuple[float, ...]
    h2_equivalence_ratios: tuple[float, ...]
    h2_pass: bool
    h3_lags: tuple[int, ...]
    h3_ratios: tuple[float, ...]
    h3_pass: bool
    h4_ratio: float
    h4_pass: bool

    @property
    def passed(self) -> bool:
        return self.h1_pass and self.h2_pass and self.h3_pass and self.h4_pass

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "alpha": self.alpha,
            "h1": {"radial_alpha": self.h1_radial_alpha, "pass": self.h1_pass},
            "h2": {
                "marginal_alphas": list(self.h2_marginal_alphas),
                "equivalence_ratios": list(self.h2_equivalence_ratios),
                "pass": self.h2_pass,
            },
            "h3": {
                "lags": list(self.h3_lags),
                "ratios": list(self.h3_ratios),
                "pass": self.h3_pass,
            },
            "h4": {"ratio": self.h4_ratio, "pass": self.h4_pass},
        }


def validate_hypotheses(
    chunk: IsiMatrixChunk,
    *,
    min_rounds: int = MIN_AUDIT_ROUNDS,
    hill_tolerance: float = 0.1,
    quantile: float = 0.999,
    h3_lags: Sequence[int] = (1, 2, 3),
    h3_threshold: float = 0.05,
    h4_threshold: float = 0.05,
    equivalence_bounds: tuple[float, float] = (0.5, 2.0),
) -> HypothesisReport:
    """Empirical H1-H4 audit of a chunk.

    H1: Hill index of the column L1 norms within ``hill_tolerance`` of alpha.
    H2: per-neuron Hill indices within tolerance, and marginal exceedance
        rates at the pooled ``quantile`` within ``equivalence_bounds`` of
        each other.
    H3: per-neuron serial joint-exceedance ratio, pooled over rounds, at
        most ``h3_threshold`` for every lag in ``h3_lags``.
    H4: all-component joint exceedance over the shock exceedance at least
        ``h4_threshold``.

    Raises ``InsufficientDataError`` below ``min_rounds`` rounds and
    ``InvariantViolationError`` on structurally bad chunks.
    """
    if chunk.rounds < min_rounds:
        raise InsufficientDataError(
            f"hypothesis audit needs >= {min_rounds} rounds, got {chunk.rounds}"
        )
    chunk.check_invariants()
    x = chunk.raw_entries
    shocks = chunk.raw_shocks
    alpha = chunk.spec.tail.alpha
    n = chunk.n

    radial = x.sum(axis=0)
    h1_alpha = _hill_alpha(radial)
    h1_pass = abs(h1_alpha - alpha) <= hill_tolerance

    marg_alphas = tuple(_hill_alpha(x[i]) for i in range(n))
    z_pool = float(np.quantile(x, quantile))
    rates = x > z_pool
    rate = rates.mean(axis=1)
    base = rate[0] if rate[0] > 0 else np.nan
    ratios = tuple(float(r / base) for r in rate)
    lo_b, hi_b = equivalence_bounds
    h2_pass = all(abs(a - alpha) <= hill_tolerance for a in marg_alphas) and all(
        np.isfinite(r) and lo_b <= r <= hi_b for r in ratios
    )

    h3_ratios = []
    for lag in h3_lags:
        z = z_pool
        num = 0
        den = 0
        for i in range(n):
            row = x[i]
            a = row[:-lag] > z
            b = row[lag:] > z
            num += int(np.count_nonzero(a & b))
            den += int(np.count_nonzero(a))
        h3_ratios.append(num / den if den else 0.0)
    h3_pass = all(r <= h3_threshold for r in h3_ratios)

    z_ref = float(np.quantile(shocks, quantile))
    den_ref = float(np.mean(shocks > z_ref))
    num_joint = float(np.mean(np.all(x > z_ref, axis=0)))
    h4_ratio = num_joint / den_ref if den_ref > 0 else 0.0
    h4_pass = h4_ratio >= h4_threshold

    return HypothesisReport(
        rounds=chunk.rounds,
        alpha=alpha,
        h1_radial_alpha=h1_alpha,
        h1_pass=bool(h1_pass),
        h2_marginal_alphas=marg_alphas,
        h2_equivalence_ratios=ratios,
        h2_pass=bool(h2_pass),
        h3_lags=tuple(int(v) for v in h3_lags),
        h3_ratios=tuple(float(r) for r in h3_ratios),
        h3_pass=bool(h3_pass),
        h4_ratio=float(h4_ratio),
        h4_pass=bool(h4_pass),
    )


def write_chunk_csv(chunk: IsiMatrixChunk, path) -> None:
    """Dump a chunk as (round, neuron, isi, shock) rows in user units."""
    entries = chunk.entries
    shocks = chunk.shocks
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "neuron", "isi", "shock"])
        for j in range(chunk.rounds):
            sj = repr(float(shocks[j]))
            for i in range(chunk.n):
                w.writerow([j, i, repr(float(entries[i, j])), sj])
