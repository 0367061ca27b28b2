"""Monte Carlo summaries, empirical distribution comparisons, trend checks.

The summary statistics here are deliberately boring; what matters is that
they are reduction-order independent (compensated sums) and that the KS
distance handles atoms correctly, since the local-time laws under test mix a
point mass at zero with a continuous tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "McSummary",
    "EmpiricalCdf",
    "mc_summary",
    "ks_distance",
    "ks_critical",
    "monotone_trend",
]

# Asymptotic critical points of the two-sided KS statistic, scaled by 1/sqrt(M).
_KS_POINTS = {0.10: 1.22, 0.05: 1.36, 0.01: 1.63}


@dataclass(frozen=True)
class McSummary:
    """Sample mean with standard error and a symmetric confidence radius."""

    count: int
    mean: float
    stderr: float
    ci_multiplier: float = 3.0

    @property
    def halfwidth(self) -> float:
        return self.ci_multiplier * self.stderr

    def covers(self, target: float) -> bool:
        return abs(self.mean - target) <= self.halfwidth


def mc_summary(samples, ci_multiplier: float = 3.0) -> McSummary:
    """Summarise a sample; the mean and variance use compensated summation,
    so the result is bit-identical under any permutation of the input."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    mean = math.fsum(x) / x.size
    ss = math.fsum((float(v) - mean) ** 2 for v in x)
    stderr = math.sqrt(ss / (x.size - 1) / x.size)
    return McSummary(count=int(x.size), mean=mean, stderr=stderr,
                     ci_multiplier=float(ci_multiplier))


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Empirical CDF over a sorted sample."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("EmpiricalCdf needs a non-empty 1-d sample")

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalCdf":
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size and not np.isfinite(x[[0, -1]]).all():
            raise ValueError("samples contain non-finite values")
        return cls(x)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def evaluate(self, x):
        """P{X <= x}, right-continuous."""
        return np.searchsorted(self.values, x, side="right") / self.count

    def evaluate_left(self, x):
        """P{X < x} (left limit at x)."""
        return np.searchsorted(self.values, x, side="left") / self.count


def _ks_vs_callable(emp: EmpiricalCdf, cdf, cdf_left) -> float:
    # group tied sample values: only the extreme ranks of a tie block are
    # candidate sup points, and the atom of the reference enters via the
    # left limit
    vals, start = np.unique(emp.values, return_index=True)
    hi = np.append(start[1:], emp.count) / emp.count
    lo = start / emp.count
    g = np.asarray(cdf(vals), dtype=float)
    if cdf_left is not None:
        gl = np.asarray(cdf_left(vals), dtype=float)
    else:
        # nudge below each value; adequate for continuous references only
        gl = np.asarray(cdf(vals - 1e-9 * (1.0 + np.abs(vals))), dtype=float)
    return float(max(np.max(np.abs(hi - g)), np.max(np.abs(lo - gl))))


def ks_distance(sample: EmpiricalCdf, reference, reference_left=None) -> float:
    """Exact sup distance between an empirical CDF and a reference law.

    reference is either another EmpiricalCdf or a callable giving the
    right-continuous CDF P{X <= x}. For a reference with atoms pass
    reference_left as P{X < x}; without it the left limit is approximated by
    a small downward nudge, which is only correct for continuous laws.
    """
    if isinstance(reference, EmpiricalCdf):
        pts = np.union1d(sample.values, reference.values)
        d_right = np.max(np.abs(sample.evaluate(pts) - reference.evaluate(pts)))
        d_left = np.max(np.abs(sample.evaluate_left(pts) - reference.evaluate_left(pts)))
        return float(max(d_right, d_left))
    return _ks_vs_callable(sample, reference, reference_left)


def ks_critical(count: int, level: float = 0.01) -> float:
    """Asymptotic two-sided KS critical value for a sample of size count."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    try:
        point = _KS_POINTS[round(float(level), 2)]
    except KeyError:
        raise ValueError(f"unsupported level {level}; choose from {sorted(_KS_POINTS)}")
    return point / math.sqrt(count)


def monotone_trend(values, halfwidths) -> bool:
    """Check that noisy estimates decrease along the given order.

    Passes when no later estimate exceeds an earlier one by more than the sum
    of their confidence radii, and the last estimate sits below the first by
    more than the sum of theirs. Constant data therefore fails: there is no
    resolved decrease.
    """
    v = np.asarray(values, dtype=float).ravel()
    h = np.asarray(halfwidths, dtype=float).ravel()
    if v.size != h.size:
        raise ValueError("values and halfwidths must have matching length")
    if v.size < 3:
        raise ValueError(f"need at least 3 estimates, got {v.size}")
    if np.any(h < 0.0):
        raise ValueError("halfwidths must be nonnegative")
    for i in range(v.size):
        for j in range(i + 1, v.size):
            if v[j] > v[i] + h[i] + h[j]:
                return False
    return bool(v[-1] < v[0] - (h[0] + h[-1]))
