"""Heavy-tailed sampling primitives.

Everything downstream draws from exactly two sources of randomness: Pareto
variables with tail index alpha in (0, 1) and bounded positive multipliers
uniform on [lo, hi]. A ``TailModel`` pins the Pareto law, an ``RngHandle``
pins a reproducible random stream, and the samplers below are pure
functions of (model, handle).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "TailModel",
    "RngHandle",
    "as_generator",
    "pareto_quantile",
    "pareto_survival",
    "sample_pareto",
    "sample_bounded_multiplier",
]

# Stride used to namespace derived stream ids; callers keep base ids below it.
_DERIVE_STRIDE = 1_000_003


@dataclass(frozen=True)
class TailModel:
    """Pareto tail with survival (scale/x)^alpha for x >= scale.

    Parameters
    ----------
    alpha : float
        Tail index, restricted to (0, 1). Heavier or boundary regimes are
        outside the model and rejected.
    scale : float
        Left endpoint of the support, strictly positive. The scale factors
        out of every downstream statistic; simulation cores run at scale 1
        and multiply it back at output boundaries.
    slow_variation : str
        Only "none" is admitted: tails are exactly Pareto, with no slowly
        varying correction.
    """

    alpha: float
    scale: float = 1.0
    slow_variation: str = "none"

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"tail index must lie in (0, 1), got {self.alpha}")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale}")
        if self.slow_variation != "none":
            raise DomainError(
                f"unsupported slow_variation {self.slow_variation!r}; only 'none' exists"
            )


@dataclass(frozen=True)
class RngHandle:
    """Addressable deterministic random stream.

    The pair (seed, stream_id) fully determines the bit stream: two handles
    with equal fields yield identical draws on any platform, and distinct
    stream ids yield statistically independent streams (counter-based
    Philox keyed through ``numpy.random.SeedSequence``).
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0:
            raise DomainError("seed and stream_id must be non-negative integers")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id)])
        return np.random.Generator(np.random.Philox(ss))

    def derive(self, k: int) -> "RngHandle":
        """Sub-stream k of this stream (namespaced, deterministic)."""
        if k < 0 or k >= _DERIVE_STRIDE:
            raise DomainError(f"derived index must lie in [0, {_DERIVE_STRIDE})")
        return RngHandle(self.seed, self.stream_id * _DERIVE_STRIDE + k)


def as_generator(rng: "RngHandle | np.random.Generator") -> np.random.Generator:
    """Accept a handle (fresh stream) or a live generator (shared state)."""
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError(f"expected RngHandle or numpy Generator, got {type(rng)!r}")


def pareto_quantile(model: TailModel, u):
    """Quantile scale * (1 - u)^(-1/alpha) of the Pareto law.

    Parameters
    ----------
    model : TailModel
    u : float or array_like
        Probability levels in [0, 1). Values outside raise ``DomainError``;
        u = 1 is excluded because the quantile diverges.

    Returns
    -------
    float or ndarray
    """
    arr = np.asarray(u, dtype=np.float64)
    if arr.size and (np.any(arr < 0.0) | np.any(arr >= 1.0) | np.any(np.isnan(arr))):
        raise DomainError("quantile levels must lie in [0, 1)")
    q = model.scale * (1.0 - arr) ** (-1.0 / model.alpha)
    return q if arr.ndim else float(q)


def pareto_survival(model: TailModel, x):
    """P(X > x) under the model; 1 for x below the scale."""
    arr = np.asarray(x, dtype=np.float64)
    s = np.where(arr <= model.scale, 1.0, (model.scale / arr) ** model.alpha)
    return s if arr.ndim else float(s)


def sample_pareto(model: TailModel, rng, size=None):
    """Draw i.i.d. Pareto(alpha, scale) variables by inverse transform.

    Passing an ``RngHandle`` makes the call a pure function of the handle:
    repeating it reproduces the same draws bit for bit.
    """
    gen = as_generator(rng)
    u = gen.random(size)
    return pareto_quantile(model, u)


def sample_bounded_multiplier(lo: float, hi: float, rng, size=None):
    """Draw uniform multipliers on [lo, hi], 0 < lo <= hi < infinity.

    The degenerate interval lo == hi is allowed and yields the constant.
    """
    if not (0.0 < lo <= hi and np.isfinite(hi)):
        raise DomainError(f"multiplier interval must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    gen = as_generator(rng)
    u = gen.random(size)
    out = lo + (hi - lo) * u
    return out if np.ndim(out) else float(out)
