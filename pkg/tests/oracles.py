"""Independent oracles the test suite checks the package against.

Everything here is computed from first principles with stdlib/scipy only,
never by calling package code, so agreement is evidence rather than
tautology.
"""
import math

from scipy import integrate


def pareto_quantile_ref(alpha: float, scale: float, u: float) -> float:
    return scale * math.pow(1.0 - u, -1.0 / alpha)


def pareto_survival_ref(alpha: float, scale: float, x: float) -> float:
    return 1.0 if x <= scale else math.pow(scale / x, alpha)


def uniform_moment(lo: float, hi: float, power: float) -> float:
    """E[U^power] for U uniform on [lo, hi], by quadrature."""
    if hi == lo:
        return math.pow(lo, power)
    val, _ = integrate.quad(lambda u: math.pow(u, power) / (hi - lo), lo, hi)
    return val


def min_uniform_moment(lo: float, hi: float, m: int, power: float) -> float:
    """E[min(U_1..U_m)^power] for i.i.d. uniforms on [lo, hi]."""
    if hi == lo:
        return math.pow(lo, power)
    span = hi - lo

    def density(u):
        surv = (hi - u) / span
        return m * math.pow(surv, m - 1) / span

    val, _ = integrate.quad(lambda u: math.pow(u, power) * density(u), lo, hi)
    return val


def ruin_mean_steps(p: float, b: int) -> float:
    """Mean first-passage time to +b for a positive-drift +-1 walk."""
    assert p > 0.5
    return b / (2.0 * p - 1.0)


def ruin_crossing_prob(p: float, b: int) -> float:
    """P(walk ever reaches +b) for a negative-drift +-1 walk."""
    assert p < 0.5
    return math.pow(p / (1.0 - p), b)


def hill_ref(values, k: int) -> float:
    """Hill estimator computed independently with plain Python floats."""
    xs = sorted((float(v) for v in values), reverse=True)
    logs = [math.log(xs[i] / xs[k]) for i in range(k)]
    return 1.0 / (sum(logs) / k)
