"""Analytic and brute-force ground truths for the correlated three-factor
mixing construction and for matching-based scores in general. These are the
curves the empirical sweeps get checked against, derived independently of
the metric implementations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .encoders import EncodedDataset, EncoderSpec
from .metrics import dependence_matrix
from .numstats import Rng, as_factor_matrix

__all__ = [
    "SymmetricMixingParams", "mcc_closed_form", "r22", "r22_derivative_sign",
    "null_mcc_floor", "brute_force_mcc", "symmetric_mixing_dataset",
    "generic_mixing_correlations", "generic_mixing_mcc",
    "generic_mixing_dataset",
]


@dataclass(frozen=True)
class SymmetricMixingParams:
    """Three Gaussian factors with Corr(Z2, Z3) = rho and Z1 independent,
    encoded as (s*Z1, Z2 + eps*Z3, eps*Z2 + Z3)."""

    rho: float
    eps: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must be in (-1, 1)")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must be in (0, 1]")
        # eps < 1 gives 1 + eps^2 + 2*eps*rho >= (1-eps)^2 > 0; eps = 1
        # needs rho > -1, already enforced
        assert 1.0 + self.eps ** 2 + 2.0 * self.eps * self.rho > 0.0


def r22(p: SymmetricMixingParams) -> float:
    """Population correlation Corr(Z2, Z2 + eps*Z3)."""
    return (1.0 + p.eps * p.rho) / math.sqrt(1.0 + p.eps ** 2 + 2.0 * p.eps * p.rho)


def r22_derivative_sign(p: SymmetricMixingParams) -> int:
    """Sign of d r22 / d rho; zero exactly at rho = -eps, where r22 bottoms
    out at sqrt(1 - eps^2)."""
    s = p.rho + p.eps
    return (s > 0) - (s < 0)


def mcc_closed_form(p: SymmetricMixingParams) -> float:
    """Matched-pair mean under the symmetric mixing: the diagonal pairing
    dominates (1 + eps*rho >= |eps + rho| for eps <= 1), so
    MCC = (1 + 2*r22) / 3. At eps = 1 this reduces to
    (1 + 2*sqrt((1+rho)/2)) / 3, the fully redundant duplicate-code case."""
    return (1.0 + 2.0 * r22(p)) / 3.0


def generic_mixing_correlations(rho: float, a: float, b: float,
                                c: float, d: float):
    """Population correlations of codes (a*Z2 + b*Z3, c*Z2 + d*Z3) with
    factors (Z2, Z3): returns (r22, r32, r23, r33) where the first index is
    the code and the second the factor."""
    den2 = math.sqrt(a * a + b * b + 2.0 * a * b * rho)
    den3 = math.sqrt(c * c + d * d + 2.0 * c * d * rho)
    if den2 == 0.0 or den3 == 0.0:
        raise ValueError("degenerate code with zero variance")
    return ((a + b * rho) / den2, (b + a * rho) / den2,
            (c + d * rho) / den3, (d + c * rho) / den3)


def generic_mixing_mcc(rho: float, a: float, b: float, c: float,
                       d: float) -> float:
    """Closed-form MCC for the generic two-code mixing plus the untouched
    Z1 copy: best of the diagonal and swapped pairings."""
    r_22, r_32, r_23, r_33 = generic_mixing_correlations(rho, a, b, c, d)
    s_diag = abs(r_22) + abs(r_33)
    s_swap = abs(r_32) + abs(r_23)
    return (1.0 + max(s_diag, s_swap)) / 3.0


def null_mcc_floor(m: int, n: int) -> float:
    """Lower-bound scaling sqrt(2 ln m / n) of the expected null MCC-P: the
    expected maximum of m near-independent sample correlations per factor."""
    if m < 2:
        raise ValueError("need m >= 2")
    if n < 3:
        raise ValueError("need n >= 3")
    return math.sqrt(2.0 * math.log(m) / n)


def _correlated_triple(rho: float, n: int, rng: Rng) -> np.ndarray:
    g = rng.derive("mixing-factors").generator()
    raw = g.standard_normal((n, 3))
    z = np.empty_like(raw)
    z[:, 0] = raw[:, 0]
    z[:, 1] = raw[:, 1]
    z[:, 2] = rho * raw[:, 1] + math.sqrt(1.0 - rho * rho) * raw[:, 2]
    return z


def symmetric_mixing_dataset(rho: float, eps: float, n: int, rng: Rng,
                             s: float = 1.0) -> EncodedDataset:
    """Sampled instance of the symmetric mixing construction."""
    SymmetricMixingParams(rho, eps)  # validate
    if s == 0.0:
        raise ValueError("s must be nonzero")
    z = _correlated_triple(rho, n, rng)
    zhat = np.column_stack([
        s * z[:, 0],
        z[:, 1] + eps * z[:, 2],
        eps * z[:, 1] + z[:, 2],
    ])
    spec = EncoderSpec("symmetric-mixing", 3,
                       {"rho": rho, "eps": eps, "s": s})
    alignment = [(0,), (1, 2), (1, 2)]
    return EncodedDataset(z, zhat, spec, alignment, "aff")


def generic_mixing_dataset(rho: float, a: float, b: float, c: float,
                           d: float, n: int, rng: Rng,
                           s: float = 1.0) -> EncodedDataset:
    """Sampled instance of the generic two-code mixing; the symmetric case
    is a = d = 1, b = c = eps."""
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must be in (-1, 1)")
    generic_mixing_correlations(rho, a, b, c, d)  # validate nondegeneracy
    z = _correlated_triple(rho, n, rng)
    zhat = np.column_stack([
        s * z[:, 0],
        a * z[:, 1] + b * z[:, 2],
        c * z[:, 1] + d * z[:, 2],
    ])
    spec = EncoderSpec("generic-mixing", 3,
                       {"rho": rho, "a": a, "b": b, "c": c, "d": d, "s": s})
    return EncodedDataset(z, zhat, spec, [(0,), (1, 2), (1, 2)], "aff")


def brute_force_mcc(ds, kind: str = "pearson", rng: Rng | None = None) -> float:
    """Exhaustive matching oracle: maximum over every injection of the
    smaller side into the larger of the mean matched |dependence|. Built on
    the same dependence matrix as mcc(), so the two must tie exactly."""
    dep, _ = dependence_matrix(ds, kind, rng)
    m, d = dep.shape
    if max(m, d) > 8:
        raise ValueError("brute force limited to max(m, d) <= 8")
    k = min(m, d)
    best = -math.inf
    if m >= d:
        for rows in itertools.permutations(range(m), d):
            vals = [float(dep[i, j]) for j, i in enumerate(rows)]
            best = max(best, math.fsum(sorted(vals)) / k)
    else:
        for cols in itertools.permutations(range(d), m):
            vals = [float(dep[i, j]) for i, j in enumerate(cols)]
            best = max(best, math.fsum(sorted(vals)) / k)
    return best
