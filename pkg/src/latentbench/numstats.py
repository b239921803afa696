"""Shared numerics: seeded RNG streams, correlation kernels, optimal
assignment, entropy, and histogram mutual information.

Conventions used throughout the package:

* a factor matrix ``z`` is (n, d), one sample per row;
* a code matrix ``zhat`` is (n, m);
* correlation matrices are (m, d): rows index codes, columns index factors.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

__all__ = [
    "Rng",
    "CorrelationMatrix",
    "Assignment",
    "as_factor_matrix",
    "as_code_matrix",
    "pearson_matrix",
    "spearman_matrix",
    "rdc",
    "hungarian_max",
    "discrete_entropy",
    "histogram_mi",
    "random_orthogonal",
    "split",
]

# Snap tolerance for |corr| against exact +-1. Scaled copies of a column must
# score exactly 1.0 downstream; sqrt rounding leaves a few ulp of noise.
_UNIT_CORR_TOL = 1e-12


@dataclass(frozen=True)
class Rng:
    """Deterministic RNG handle: a 64-bit seed plus a named stream.

    ``derive`` builds independent child streams by hashing labels into the
    stream id, so grid cells can draw in parallel without order coupling.
    Identical (seed, stream) always yields bit-identical draws.
    """

    seed: int
    stream: int = 0

    def derive(self, *labels) -> "Rng":
        h = hashlib.sha256()
        h.update(str(self.seed).encode())
        h.update(str(self.stream).encode())
        for lab in labels:
            h.update(b"\x1f")
            h.update(str(lab).encode())
        return Rng(self.seed, int.from_bytes(h.digest()[:8], "little"))

    def generator(self) -> np.random.Generator:
        # fresh generator every call: callers may draw freely without
        # advancing sibling streams
        root = (self.seed & 0xFFFFFFFFFFFFFFFF, self.stream & 0xFFFFFFFFFFFFFFFF)
        return np.random.Generator(np.random.PCG64(root))


@dataclass
class CorrelationMatrix:
    """Pairwise |dependence| values between m codes and d factors."""

    entries: np.ndarray  # (m, d), values in [-1, 1] ([0, 1] for rdc)
    kind: str  # pearson | spearman | rdc
    constant_codes: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    constant_factors: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class Assignment:
    """One-to-one matching of codes to factors, size min(m, d)."""

    pairs: list  # [(code index, factor index), ...]
    objective: float  # sum of matched values


def as_factor_matrix(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError(f"factor matrix must be 2-d, got shape {z.shape}")
    n, d = z.shape
    if n < 2 or d < 1:
        raise ValueError(f"factor matrix needs n >= 2 and d >= 1, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("factor matrix contains non-finite entries")
    return z


def as_code_matrix(zhat, n_expected=None) -> np.ndarray:
    zhat = np.asarray(zhat, dtype=float)
    if zhat.ndim != 2:
        raise ValueError(f"code matrix must be 2-d, got shape {zhat.shape}")
    n, m = zhat.shape
    if m < 1:
        raise ValueError("code matrix needs m >= 1")
    if n_expected is not None and n != n_expected:
        raise ValueError(f"row count mismatch: codes have {n}, factors have {n_expected}")
    if not np.all(np.isfinite(zhat)):
        raise ValueError("code matrix contains non-finite entries")
    return zhat


def _columnwise_pearson(a: np.ndarray, b: np.ndarray):
    """All-pairs Pearson correlation between columns of a and columns of b.

    Constant columns get correlation 0 and a flag instead of an error: null
    encoders legitimately produce degenerate probes and the suite must keep
    running.
    """
    n = a.shape[0]
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    na = np.sqrt(np.einsum("ij,ij->j", ac, ac))
    nb = np.sqrt(np.einsum("ij,ij->j", bc, bc))
    const_a = na == 0.0
    const_b = nb == 0.0
    na_safe = np.where(const_a, 1.0, na)
    nb_safe = np.where(const_b, 1.0, nb)
    r = (ac.T @ bc) / np.outer(na_safe, nb_safe)
    r[const_a, :] = 0.0
    r[:, const_b] = 0.0
    np.clip(r, -1.0, 1.0, out=r)
    near_one = 1.0 - np.abs(r) < _UNIT_CORR_TOL
    r[near_one] = np.sign(r[near_one])
    return r, const_a, const_b


def pearson_matrix(zhat, z) -> CorrelationMatrix:
    """Sample Pearson correlation of every code column with every factor column.

    Parameters
    ----------
    zhat : (n, m) array, codes
    z : (n, d) array, factors

    Returns
    -------
    CorrelationMatrix with entries (m, d).
    """
    z = as_factor_matrix(z)
    zhat = as_code_matrix(zhat, n_expected=z.shape[0])
    if z.shape[0] < 3:
        raise ValueError("pearson_matrix needs n >= 3")
    r, const_codes, const_factors = _columnwise_pearson(zhat, z)
    return CorrelationMatrix(r, "pearson", const_codes, const_factors)


def spearman_matrix(zhat, z) -> CorrelationMatrix:
    """Spearman correlation matrix: Pearson applied to average ranks.

    Ties get the average rank, which makes invariance under strictly
    monotone column transforms exact even on tied data.
    """
    z = as_factor_matrix(z)
    zhat = as_code_matrix(zhat, n_expected=z.shape[0])
    if z.shape[0] < 3:
        raise ValueError("spearman_matrix needs n >= 3")
    rz = rankdata(z, method="average", axis=0)
    rzh = rankdata(zhat, method="average", axis=0)
    r, const_codes, const_factors = _columnwise_pearson(rzh, rz)
    return CorrelationMatrix(r, "spearman", const_codes, const_factors)


def rdc(x, y, k: int = 20, s: float = 1.0 / 6.0, rng: Rng | None = None) -> float:
    """Randomized dependence coefficient between two scalar variables.

    Both variables are mapped to copula scale (empirical CDF), lifted through
    k random sinusoidal features with frequencies drawn from the dedicated
    RNG stream, and scored by the largest canonical correlation between the
    two feature blocks. The feature covariance is ridge-regularized (1e-9)
    so rank-deficient blocks (duplicated features, tiny n) stay solvable.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise ValueError("rdc inputs must have equal length")
    if n < 20:
        raise ValueError("rdc needs n >= 20")
    if k < 1 or s <= 0:
        raise ValueError("rdc needs k >= 1 and s > 0")
    if rng is None:
        rng = Rng(0).derive("rdc")
    g = rng.generator()

    def features(v):
        u = rankdata(v, method="average") / n
        aug = np.column_stack([u, np.ones(n)])
        # frequency scale 4*pi*s: at the default s=1/6 the features resolve
        # a couple of oscillations across the unit rank range, enough to
        # detect folded dependence while keeping the null level low
        w = g.standard_normal((2, k)) * (4.0 * np.pi * s)
        return np.sin(aug @ w)

    fx = features(x)
    fy = features(y)
    fx -= fx.mean(axis=0)
    fy -= fy.mean(axis=0)
    cxx = fx.T @ fx / n + 1e-9 * np.eye(k)
    cyy = fy.T @ fy / n + 1e-9 * np.eye(k)
    cxy = fx.T @ fy / n
    lx = np.linalg.cholesky(cxx)
    ly = np.linalg.cholesky(cyy)
    m = np.linalg.solve(lx, cxy)
    m = np.linalg.solve(ly, m.T).T
    rho = np.linalg.svd(m, compute_uv=False)[0]
    # copula-identical inputs score 1 minus the ridge bias (~1e-9 on
    # unit-scale features); snap well above that, far below any real score
    if rho > 1.0 - 1e-6:
        return 1.0
    return float(min(1.0, max(0.0, rho)))


def hungarian_max(sim) -> Assignment:
    """Assignment of codes to factors maximizing the sum of selected entries.

    Rectangular inputs are padded to square with (matrix minimum - 1), which
    preserves the optimal matching on the real submatrix; only real pairs are
    reported. The objective is summed with math.fsum over value-sorted pairs
    so it is reproducible independent of pair order.
    """
    sim = np.asarray(sim, dtype=float)
    if sim.ndim != 2 or sim.size == 0:
        raise ValueError("hungarian_max needs a non-empty 2-d matrix")
    if not np.all(np.isfinite(sim)):
        raise ValueError("hungarian_max entries must be finite")
    m, d = sim.shape
    k = max(m, d)
    if m != d:
        pad = np.full((k, k), sim.min() - 1.0)
        pad[:m, :d] = sim
    else:
        pad = sim
    rows, cols = linear_sum_assignment(pad, maximize=True)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if i < m and j < d]
    values = sorted(float(sim[i, j]) for i, j in pairs)
    return Assignment(pairs, math.fsum(values))


def discrete_entropy(p) -> float:
    """Shannon entropy in nats of a probability vector; 0*log(0) := 0."""
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise ValueError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
    pos = p[p > 0.0]
    return float(max(0.0, -np.sum(pos * np.log(pos))))


def _quantile_edges(v: np.ndarray, bins: int) -> np.ndarray:
    edges = np.quantile(v, np.linspace(0.0, 1.0, bins + 1))
    return np.unique(edges)


def _bin_index(v: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, v, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def histogram_mi(x, y, bins: int = 20) -> float:
    """Plug-in mutual information (nats) from a joint histogram with
    per-variable quantile (equal-mass) bin edges.

    Constant inputs give 0. The plug-in estimate of the empirical joint is
    nonnegative by construction.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("histogram_mi inputs must have equal length")
    if bins < 2:
        raise ValueError("histogram_mi needs bins >= 2")
    ex = _quantile_edges(x, bins)
    ey = _quantile_edges(y, bins)
    if len(ex) < 3 or len(ey) < 3:
        # fewer than two distinct bins on a side: constant (or near) input
        return 0.0
    ix = _bin_index(x, ex)
    iy = _bin_index(y, ey)
    kx, ky = len(ex) - 1, len(ey) - 1
    joint = np.zeros((kx, ky))
    np.add.at(joint, (ix, iy), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0.0
    mi = np.sum(joint[nz] * np.log(joint[nz] / (px @ py)[nz]))
    return float(max(0.0, mi))


def binned_entropy(x, bins: int = 20) -> float:
    """Entropy (nats) of a variable under its own quantile binning."""
    x = np.asarray(x, dtype=float).ravel()
    edges = _quantile_edges(x, bins)
    if len(edges) < 3:
        return 0.0
    idx = _bin_index(x, edges)
    counts = np.bincount(idx, minlength=len(edges) - 1).astype(float)
    return discrete_entropy(counts / counts.sum())


def random_orthogonal(dim: int, rng: Rng) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR of a Gaussian draw.

    The sign convention (positive diagonal of the triangular factor) is what
    makes the distribution exactly Haar rather than QR-implementation biased.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.generator().standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def split(z, zhat, train_fraction: float, rng: Rng):
    """Disjoint train/test row partition by seeded shuffle.

    The same permutation is applied to both matrices. Returns
    ((z_train, zhat_train), (z_test, zhat_test)).
    """
    z = as_factor_matrix(z)
    zhat = as_code_matrix(zhat, n_expected=z.shape[0])
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = z.shape[0]
    n_train = int(math.floor(n * train_fraction))
    if n_train < 2 or n - n_train < 2:
        raise ValueError(f"split needs >= 2 rows on each side, got {n_train}/{n - n_train}")
    perm = rng.generator().permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    return (z[tr], zhat[tr]), (z[te], zhat[te])
