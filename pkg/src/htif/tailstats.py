"""Empirical tail statistics: Hill estimation, tail-dependence ratios,
and angular/radial diagnostics for multivariate regular variation.

Conventions used throughout:

* exceedance means strictly greater than the threshold,
* thresholds are empirical quantiles of a stated reference sample,
* joint/marginal dependence ratios compare an empirical joint exceedance
  rate against a marginal one at the same threshold, so asymptotic
  independence shows up as a ratio near zero and full dependence as a
  ratio bounded away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

__all__ = [
    "QUANTILE_GRID",
    "TailEstimate",
    "hill_estimate",
    "hill_sweep",
    "default_hill_k",
    "TailRatioCurve",
    "equivalence_ratio",
    "LagDependence",
    "lag_exceedance_ratios",
    "DependenceRatio",
    "upper_tail_independence",
    "SpectralEstimate",
    "spectral_estimate",
    "RadialCheck",
    "radial_rv_check",
]

QUANTILE_GRID = (0.9, 0.99, 0.999, 0.9999)


def _as_positive_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isfinite(arr) & (arr > 0.0)):
        raise DomainError(f"{name} must be positive and finite")
    return arr


def _as_nonnegative_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isfinite(arr) & (arr >= 0.0)):
        raise DomainError(f"{name} must be nonnegative and finite")
    return arr


def _check_quantiles(quantiles) -> tuple[float, ...]:
    qs = tuple(float(q) for q in quantiles)
    if not qs:
        raise DomainError("need at least one quantile level")
    for q in qs:
        if not 0.0 < q < 1.0:
            raise DomainError(f"quantile levels must lie in (0, 1), got {q}")
    return qs


def default_hill_k(n: int) -> int:
    """Default order-statistic count: ceil(n**0.6), capped to n - 1."""
    return min(int(np.ceil(n ** 0.6)), n - 1)


@dataclass(frozen=True)
class TailEstimate:
    """Hill point estimate with its normal-approximation interval."""

    alpha_hat: float
    k: int
    ci_low: float
    ci_high: float
    n_samples: int

    def covers(self, alpha: float) -> bool:
        return self.ci_low <= alpha <= self.ci_high

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "k": self.k,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_samples": self.n_samples,
        }


def hill_estimate(x, k: int | None = None) -> TailEstimate:
    """Hill tail-index estimate from the top k order statistics.

    alpha_hat = 1 / mean(log(X_(1..k) / X_(k+1))) on the descending order
    statistics; the interval is alpha_hat * (1 -+ 1.96 / sqrt(k)).
    """
    arr = _as_positive_1d(x, "samples")
    n = arr.size
    if n < 2:
        raise InsufficientDataError(f"Hill estimation needs >= 2 samples, got {n}")
    if k is None:
        k = default_hill_k(n)
    k = int(k)
    if not 1 <= k <= n - 1:
        raise DomainError(f"k must lie in [1, {n - 1}], got {k}")
    top = np.partition(arr, n - k - 1)[n - k - 1 :]
    top.sort()
    logs = np.log(top[1:]) - np.log(top[0])
    alpha_hat = float(1.0 / logs.mean())
    half = 1.96 * alpha_hat / np.sqrt(k)
    return TailEstimate(
        alpha_hat=alpha_hat,
        k=k,
        ci_low=float(alpha_hat - half),
        ci_high=float(alpha_hat + half),
        n_samples=n,
    )


def hill_sweep(x, ks: Sequence[int] | None = None) -> list[TailEstimate]:
    """Hill estimates across a grid of k values (stability plot data)."""
    arr = _as_positive_1d(x, "samples")
    n = arr.size
    if ks is None:
        if n < 32:
            raise InsufficientDataError(f"sweep needs >= 32 samples, got {n}")
        hi = max(n // 4, 9)
        ks = np.unique(np.geomspace(8, hi, 25).astype(int))
        ks = ks[(ks >= 2) & (ks <= n - 1)]
    return [hill_estimate(arr, k=int(k)) for k in ks]


@dataclass(frozen=True)
class TailRatioCurve:
    """Marginal exceedance-rate ratios P(X > z) / P(Y > z) at pooled
    quantile thresholds; near-constant ratios indicate tail equivalence."""

    quantiles: tuple[float, ...]
    thresholds: tuple[float, ...]
    ratios: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "quantiles": list(self.quantiles),
            "thresholds": list(self.thresholds),
            "ratios": list(self.ratios),
        }


def equivalence_ratio(
    x, y, quantiles=QUANTILE_GRID, *, min_size: int = 10_000
) -> TailRatioCurve:
    """Tail-equivalence diagnostic between two positive samples.

    Ratios near a positive constant across levels indicate equivalent
    tails; a ratio drifting to 0 or infinity with the level flags a
    tail-index mismatch. The denominator sample must still have
    exceedances at every requested level, otherwise the ratio is
    undefined and an error is raised.
    """
    xa = _as_positive_1d(x, "x")
    ya = _as_positive_1d(y, "y")
    qs = _check_quantiles(quantiles)
    if xa.size < min_size or ya.size < min_size:
        raise InsufficientDataError(
            f"equivalence ratio needs >= {min_size} samples per side, "
            f"got {xa.size} and {ya.size}"
        )
    pooled = np.concatenate([xa, ya])
    thresholds = [float(np.quantile(pooled, q)) for q in qs]
    ratios = []
    for q, z in zip(qs, thresholds):
        den = np.mean(ya > z)
        if den == 0.0:
            raise InsufficientDataError(
                f"empty upper tail in the denominator sample at level {q}"
            )
        num = np.mean(xa > z)
        ratios.append(float(num / den))
    return TailRatioCurve(quantiles=qs, thresholds=tuple(thresholds), ratios=tuple(ratios))


@dataclass(frozen=True)
class LagDependence:
    """Serial upper-tail dependence of one sequence at several lags.

    ``ratios[i, j]`` is P-hat(X_h > z_j, X_{h+lag_i} > z_j) / P-hat(X_h > z_j)
    with both rates computed over the pair-eligible offsets h <= N - lag,
    so a lag-periodic (comonotone) sequence scores exactly 1.
    """

    lags: tuple[int, ...]
    quantiles: tuple[float, ...]
    thresholds: tuple[float, ...]
    ratios: np.ndarray = field(repr=False)
    n_samples: int = 0

    def max_ratio(self) -> float:
        return float(np.nanmax(self.ratios))

    def to_dict(self) -> dict:
        return {
            "lags": list(self.lags),
            "quantiles": list(self.quantiles),
            "thresholds": list(self.thresholds),
            "ratios": [[float(v) for v in row] for row in self.ratios],
            "n_samples": self.n_samples,
        }


def lag_exceedance_ratios(x, lags, quantiles=QUANTILE_GRID) -> LagDependence:
    """Joint/marginal exceedance ratios between a sequence and its lags.

    Thresholds are quantiles of the full sample. An empty denominator at
    some level yields ratio 0 (no marginal exceedances among eligible
    offsets means nothing to pair). Zeros are allowed in the sequence:
    gaps of exactly zero occur between simultaneous events.
    """
    arr = _as_nonnegative_1d(x, "samples")
    lag_list = tuple(int(v) for v in lags)
    if not lag_list:
        raise DomainError("need at least one lag")
    for lag in lag_list:
        if lag < 1:
            raise DomainError(f"lags must be >= 1, got {lag}")
    qs = _check_quantiles(quantiles)
    if arr.size <= max(lag_list):
        raise InsufficientDataError(
            f"need more than {max(lag_list)} samples for lag {max(lag_list)}"
        )
    thresholds = [float(np.quantile(arr, q)) for q in qs]
    out = np.zeros((len(lag_list), len(qs)))
    for i, lag in enumerate(lag_list):
        head = arr[:-lag]
        tail = arr[lag:]
        for j, z in enumerate(thresholds):
            a = head > z
            den = int(np.count_nonzero(a))
            if den == 0:
                out[i, j] = 0.0
            else:
                num = int(np.count_nonzero(a & (tail > z)))
                out[i, j] = num / den
    return LagDependence(
        lags=lag_list,
        quantiles=qs,
        thresholds=tuple(thresholds),
        ratios=out,
        n_samples=int(arr.size),
    )


@dataclass(frozen=True)
class DependenceRatio:
    """Joint exceedance of (x, y) relative to a reference marginal."""

    quantiles: tuple[float, ...]
    thresholds: tuple[float, ...]
    ratios: tuple[float, ...]
    reference: str = "reference"

    def to_dict(self) -> dict:
        return {
            "quantiles": list(self.quantiles),
            "thresholds": list(self.thresholds),
            "ratios": list(self.ratios),
            "reference": self.reference,
        }


def upper_tail_independence(
    x, y, reference, quantiles=QUANTILE_GRID, *, reference_label: str = "reference"
) -> DependenceRatio:
    """P-hat(X > z, Y > z) / P-hat(ref > z) with z a reference quantile.

    Identical inputs (x is y is reference) give exactly 1 at every level;
    asymptotically independent pairs drive the ratio to zero as the level
    rises; fully dependent pairs stay bounded away from zero.
    """
    xa = _as_positive_1d(x, "x")
    ya = _as_positive_1d(y, "y")
    ra = _as_positive_1d(reference, "reference")
    if xa.shape != ya.shape:
        raise DomainError("x and y must have equal length")
    if xa.size == 0 or ra.size == 0:
        raise InsufficientDataError("tail dependence needs nonempty samples")
    qs = _check_quantiles(quantiles)
    thresholds = [float(np.quantile(ra, q)) for q in qs]
    ratios = []
    for z in thresholds:
        den = np.count_nonzero(ra > z) / ra.size
        if den == 0.0:
            ratios.append(0.0)
            continue
        num = np.count_nonzero((xa > z) & (ya > z)) / xa.size
        ratios.append(float(num / den))
    return DependenceRatio(
        quantiles=qs,
        thresholds=tuple(thresholds),
        ratios=tuple(ratios),
        reference=reference_label,
    )


@dataclass(frozen=True)
class SpectralEstimate:
    """Angular measure estimate from L1-radial exceedances.

    ``angles`` holds the unit-simplex projections of the exceeding
    vectors; ``histogram`` is the normalized mass over a fixed partition
    of the first d-1 simplex coordinates and sums to 1.
    """

    threshold: float
    n_exceedances: int
    angles: np.ndarray = field(repr=False)
    histogram: np.ndarray = field(repr=False)
    bin_edges: tuple = field(repr=False, default=())
    dimension: int = 2
    radial_quantile: float = 0.95
    norm: str = "L1"

    def to_rows(self) -> list[tuple[int, float, float]]:
        """(bin index, left edge of first coordinate, mass) rows."""
        flat = self.histogram.ravel()
        edges = self.bin_edges[0]
        if self.histogram.ndim == 1:
            return [(i, float(edges[i]), float(flat[i])) for i in range(flat.size)]
        per = flat.size // (len(edges) - 1)
        return [(i, float(edges[i // per]), float(flat[i])) for i in range(flat.size)]

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "dimension": self.dimension,
            "radial_quantile": self.radial_quantile,
            "threshold": self.threshold,
            "n_exceedances": self.n_exceedances,
            "n_bins": int(self.histogram.size),
        }


def spectral_estimate(
    vectors, radial_quantile: float = 0.95, bins: int = 20, min_exceedances: int = 500
) -> SpectralEstimate:
    """Empirical angular measure of positive vectors above an L1-radius
    threshold. Needs at least ``min_exceedances`` exceeding vectors."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DomainError("vectors must be (N, d) with d >= 2")
    if not np.all(np.isfinite(arr) & (arr > 0.0)):
        raise DomainError("vector components must be positive and finite")
    if not 0.0 < radial_quantile < 1.0:
        raise DomainError(f"radial_quantile must lie in (0, 1), got {radial_quantile}")
    if bins < 2:
        raise DomainError(f"bins must be >= 2, got {bins}")
    radius = arr.sum(axis=1)
    threshold = float(np.quantile(radius, radial_quantile))
    mask = radius > threshold
    count = int(np.count_nonzero(mask))
    if count < min_exceedances:
        raise InsufficientDataError(
            f"spectral estimate needs >= {min_exceedances} exceedances, got {count}"
        )
    angles = arr[mask] / radius[mask, None]
    d = arr.shape[1]
    hist, edges = np.histogramdd(
        angles[:, : d - 1], bins=[bins] * (d - 1), range=[(0.0, 1.0)] * (d - 1)
    )
    hist = hist / count
    return SpectralEstimate(
        threshold=threshold,
        n_exceedances=count,
        angles=angles,
        histogram=hist,
        bin_edges=tuple(np.asarray(e) for e in edges),
        dimension=d,
        radial_quantile=radial_quantile,
        norm="L1",
    )


@dataclass(frozen=True)
class RadialCheck:
    """Scaling check of radial exceedances against the fitted power law.

    ``ratios[i]`` is P-hat(R > t_i * z0) / P-hat(R > z0); under regular
    variation it should track t_i ** -alpha_hat. t = 1 gives exactly 1.
    """

    t_values: tuple[float, ...]
    base_quantile: float
    base_threshold: float
    alpha_hat: float
    ratios: tuple[float, ...]
    expected: tuple[float, ...]

    @property
    def deviations(self) -> tuple[float, ...]:
        return tuple(abs(r - e) for r, e in zip(self.ratios, self.expected))

    def to_dict(self) -> dict:
        return {
            "t_values": list(self.t_values),
            "base_quantile": self.base_quantile,
            "base_threshold": self.base_threshold,
            "alpha_hat": self.alpha_hat,
            "ratios": list(self.ratios),
            "expected": list(self.expected),
            "deviations": list(self.deviations),
        }


def radial_rv_check(
    samples, t_values=(1.0, 2.0, 4.0), base_quantile: float = 0.995
) -> RadialCheck:
    """Power-law scaling of L1 radii (or of a 1-D positive sample)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 2:
        radius = arr.sum(axis=1)
    elif arr.ndim == 1:
        radius = arr
    else:
        raise DomainError("samples must be 1-D radii or (N, d) vectors")
    radius = _as_positive_1d(radius, "radii")
    ts = tuple(float(t) for t in t_values)
    for t in ts:
        if not (np.isfinite(t) and t > 0.0):
            raise DomainError(f"t values must be positive and finite, got {t}")
    if not 0.0 < base_quantile < 1.0:
        raise DomainError(f"base_quantile must lie in (0, 1), got {base_quantile}")
    est = hill_estimate(radius)
    z0 = float(np.quantile(radius, base_quantile))
    den = np.count_nonzero(radius > z0)
    if den == 0:
        raise InsufficientDataError("no exceedances above the base threshold")
    ratios = []
    for t in ts:
        if t == 1.0:
            # same threshold, same strict comparison: identically 1
            ratios.append(1.0)
        else:
            ratios.append(float(np.count_nonzero(radius > t * z0) / den))
    expected = tuple(float(t ** -est.alpha_hat) for t in ts)
    return RadialCheck(
        t_values=ts,
        base_quantile=base_quantile,
        base_threshold=z0,
        alpha_hat=est.alpha_hat,
        ratios=tuple(ratios),
        expected=expected,
    )
