"""Supervised probes used inside the R-squared and DCI metrics: ordinary and
ridge least squares, Lasso via coordinate descent, and a small gradient
boosted trees regressor.

All probes expose a per-feature nonnegative importance vector. For linear
kinds this is |coefficient| on standardized inputs. For GBT it is the total
squared-error reduction per feature, but measured honestly: trees are grown
on an internal sub-split of the training rows and each split's gain is
re-evaluated on the held-back rows. Training gains on pure-noise targets are
large (boosting happily overfits); the validation-measured gains are centered
at zero there, which is what lets downstream metrics treat unpredictable
factors as massless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numstats import Rng

__all__ = ["ProbeSpec", "FittedProbe", "fit_probe", "r2_score", "lasso_coordinate_descent"]

_LINEAR_KINDS = ("linear", "ridge", "lasso")


@dataclass(frozen=True)
class ProbeSpec:
    """Probe configuration. Use the constructors rather than raw init."""

    kind: str
    lam: float | None = None  # ridge/lasso penalty; None = lasso auto scale
    trees: int = 100
    depth: int = 3
    learning_rate: float = 0.1
    subsample: float = 1.0
    standardize_inputs: bool = True

    def __post_init__(self):
        if self.kind not in (*_LINEAR_KINDS, "gbt"):
            raise ValueError(f"unknown probe kind {self.kind!r}")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.trees < 1 or self.depth < 1:
            raise ValueError("trees and depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")

    @staticmethod
    def linear() -> "ProbeSpec":
        return ProbeSpec("linear")

    @staticmethod
    def ridge(lam: float = 1e-3) -> "ProbeSpec":
        return ProbeSpec("ridge", lam=lam)

    @staticmethod
    def lasso(lam: float | None = None) -> "ProbeSpec":
        return ProbeSpec("lasso", lam=lam)

    @staticmethod
    def gbt(trees: int = 100, depth: int = 3, learning_rate: float = 0.1,
            subsample: float = 1.0) -> "ProbeSpec":
        return ProbeSpec("gbt", trees=trees, depth=depth,
                         learning_rate=learning_rate, subsample=subsample)

    def settings(self) -> dict:
        if self.kind == "gbt":
            return {"kind": "gbt", "trees": self.trees, "depth": self.depth,
                    "learning_rate": self.learning_rate, "subsample": self.subsample}
        if self.kind == "linear":
            return {"kind": "linear"}
        return {"kind": self.kind, "lam": self.lam}


@dataclass
class FittedProbe:
    """A fitted single-target probe."""

    spec: ProbeSpec
    predict: object  # callable (n, m) -> (n,)
    importance: np.ndarray  # nonnegative, length m
    train_r2: float
    test_r2: float | None = None
    flags: list = field(default_factory=list)
    train_r2_path: np.ndarray | None = None  # gbt only, on the grow rows


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd_safe = np.where(sd == 0.0, 1.0, sd)
    return (X - mu) / sd_safe, mu, sd_safe


def _train_r2(y, pred) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    return 1.0 - float(np.sum((y - pred) ** 2)) / sst


def lasso_coordinate_descent(X, y, lam: float, max_sweeps: int = 10_000,
                             tol: float = 1e-7):
    """Lasso coefficients by cyclic coordinate descent with soft-thresholding.

    Minimizes (1/2n)||y - X b||^2 + lam * ||b||_1 on internally standardized
    columns (the returned coefficients are in standardized units, intercept
    handled by centering). Returns (coefficients, converged).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, m = X.shape
    Xs, _, _ = _standardize(X)
    yc = y - y.mean()
    beta = np.zeros(m)
    resid = yc.copy()
    col_sq = np.einsum("ij,ij->j", Xs, Xs)  # = n except for constant columns
    col_sq_safe = np.where(col_sq == 0.0, 1.0, col_sq)
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(m):
            if col_sq[j] == 0.0:
                continue
            bj = beta[j]
            rho = Xs[:, j] @ resid + col_sq[j] * bj
            bj_new = math.copysign(max(abs(rho) / n - lam, 0.0), rho) * n / col_sq_safe[j]
            if bj_new != bj:
                resid += Xs[:, j] * (bj - bj_new)
                beta[j] = bj_new
                max_delta = max(max_delta, abs(bj_new - bj))
        if max_delta < tol:
            return beta, True
    return beta, False


def _fit_linear_family(spec: ProbeSpec, X, y):
    n, m = X.shape
    Xs, mu, sd = _standardize(X)
    y_mean = y.mean()
    yc = y - y_mean
    flags = []
    if spec.kind == "lasso":
        lam = spec.lam
        if lam is None:
            lam = 0.01 * float(np.max(np.abs(Xs.T @ yc))) / n
        beta, converged = lasso_coordinate_descent(X, y, lam)
        if not converged:
            flags.append("lasso-nonconverged")
    else:
        lam = spec.lam if spec.kind == "ridge" else 0.0
        gram = Xs.T @ Xs / n + lam * np.eye(m)
        rhs = Xs.T @ yc / n
        if spec.kind == "linear":
            rank = np.linalg.matrix_rank(gram, tol=1e-10)
            if rank < m:
                gram = gram + 1e-8 * np.eye(m)
                flags.append("singular-ridge-fallback")
        beta = np.linalg.solve(gram, rhs)

    def predict(Xq, beta=beta, mu=mu, sd=sd, y_mean=y_mean):
        Xq = np.asarray(Xq, dtype=float)
        return (Xq - mu) / sd @ beta + y_mean

    return predict, np.abs(beta), flags


class _GbtTree:
    """One regression tree on raw features with variance-reduction splits."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "grow_mean")

    def __init__(self):
        self.feature = -1  # -1 marks a leaf
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = 0.0
        self.grow_mean = 0.0

    def predict_into(self, X, rows, out, lr):
        if self.feature < 0:
            out[rows] += lr * self.value
            return
        go_left = X[rows, self.feature] <= self.threshold
        self.left.predict_into(X, rows[go_left], out, lr)
        self.right.predict_into(X, rows[~go_left], out, lr)


# relative tolerance under which two features' best gains count as tied;
# the lower feature index then wins, deterministically. Monotone transforms
# of the same column induce identical candidate partitions, so their gains
# are equal up to accumulation order and must not flip-flop by ulp noise.
_GAIN_TIE_RTOL = 1e-12


def _best_splits(Xg, resid, order, node_mask):
    """Best (gain, threshold) per feature over one node, vectorized.

    order is the per-column argsort of the grow matrix, computed once per
    fit; the node's sorted index lists come from one boolean gather.
    """
    n_node = int(node_mask.sum())
    mask_sorted = node_mask[order]  # (n_grow, m)
    m = order.shape[1]
    idx = order.T[mask_sorted.T].reshape(m, n_node)
    ys = resid[idx]
    xs = np.take_along_axis(Xg.T, idx, axis=1)
    prefix = np.cumsum(ys, axis=1)
    total = prefix[:, -1][:, None]
    k = np.arange(1, n_node, dtype=float)
    left = prefix[:, :-1]
    right = total - left
    gains = left ** 2 / k + right ** 2 / (n_node - k) - total ** 2 / n_node
    gains[xs[:, 1:] <= xs[:, :-1]] = -np.inf  # no threshold between ties
    pos = np.argmax(gains, axis=1)
    best = gains[np.arange(m), pos]
    thresholds = 0.5 * (np.take_along_axis(xs, pos[:, None], 1)
                        + np.take_along_axis(xs, pos[:, None] + 1, 1)).ravel()
    return best, thresholds


def _grow_tree(Xg, resid, order, node_mask, depth_left):
    node = _GbtTree()
    rows = node_mask.nonzero()[0]
    node.grow_mean = float(resid[rows].mean())
    node.value = node.grow_mean
    if depth_left == 0 or rows.size < 2:
        return node
    best, thresholds = _best_splits(Xg, resid, order, node_mask)
    gmax = float(best.max())
    if not np.isfinite(gmax) or gmax <= 0.0:
        return node
    tie_band = gmax - _GAIN_TIE_RTOL * max(1.0, abs(gmax))
    feature = int(np.argmax(best >= tie_band))
    node.feature = feature
    node.threshold = float(thresholds[feature])
    go_left = node_mask & (Xg[:, feature] <= node.threshold)
    node.left = _grow_tree(Xg, resid, order, go_left, depth_left - 1)
    node.right = _grow_tree(Xg, resid, order, node_mask & ~go_left, depth_left - 1)
    return node


def _val_gains(node, Xv, rows, resid_v, gains):
    """Accumulate validation-measured gain per feature down one tree.

    Gain at an internal node is the squared-error reduction of replacing the
    parent's grow-mean by the children's grow-means, measured on the
    validation rows that reach the node. Can be negative for overfit splits.
    """
    if node.feature < 0 or rows.size == 0:
        return
    r = resid_v[rows]
    go_left = Xv[rows, node.feature] <= node.threshold
    rl, rr = r[go_left], r[~go_left]
    sse_parent = float(np.sum((r - node.grow_mean) ** 2))
    sse_children = float(np.sum((rl - node.left.grow_mean) ** 2)) \
        + float(np.sum((rr - node.right.grow_mean) ** 2))
    gains[node.feature] += sse_parent - sse_children
    _val_gains(node.left, Xv, rows[go_left], resid_v, gains)
    _val_gains(node.right, Xv, rows[~go_left], resid_v, gains)


def _fit_gbt(spec: ProbeSpec, X, y, rng: Rng):
    n, m = X.shape
    g = rng.derive("gbt-internal-split").generator()
    perm = g.permutation(n)
    n_grow = max(2, int(round(n * 0.75)))
    n_grow = min(n_grow, n - 1) if n >= 4 else n
    grow, val = perm[:n_grow], perm[n_grow:]
    Xg, yg = X[grow], y[grow]
    Xv, yv = X[val], y[val]

    order = np.argsort(Xg, axis=0, kind="stable")
    pred_g = np.full(n_grow, yg.mean())
    pred_v = np.full(len(val), yg.mean())
    gains = np.zeros(m)
    trees = []
    r2_path = np.empty(spec.trees)
    sst_g = float(np.sum((yg - yg.mean()) ** 2))
    sub_rng = rng.derive("gbt-subsample")
    all_rows_v = np.arange(len(val))

    for t in range(spec.trees):
        resid = yg - pred_g
        if spec.subsample < 1.0:
            keep = sub_rng.derive(t).generator().random(n_grow) < spec.subsample
            node_mask = keep if keep.any() else np.ones(n_grow, bool)
        else:
            node_mask = np.ones(n_grow, bool)
        tree = _grow_tree(Xg, resid, order, node_mask, spec.depth)
        if len(val):
            _val_gains(tree, Xv, all_rows_v, yv - pred_v, gains)
        delta_g = np.zeros(n_grow)
        tree.predict_into(Xg, np.arange(n_grow), delta_g, spec.learning_rate)
        pred_g += delta_g
        if len(val):
            delta_v = np.zeros(len(val))
            tree.predict_into(Xv, all_rows_v, delta_v, spec.learning_rate)
            pred_v += delta_v
        trees.append(tree)
        r2_path[t] = 1.0 - float(np.sum((yg - pred_g) ** 2)) / sst_g if sst_g > 0 else 0.0

    base = float(yg.mean())
    lr = spec.learning_rate

    def predict(Xq, trees=trees, base=base, lr=lr):
        Xq = np.asarray(Xq, dtype=float)
        out = np.full(Xq.shape[0], base)
        rows = np.arange(Xq.shape[0])
        for tree in trees:
            tree.predict_into(Xq, rows, out, lr)
        return out

    importance = np.maximum(gains, 0.0)
    total = importance.sum()
    if total > 0.0:
        importance = importance / total
    return predict, importance, r2_path


def fit_probe(spec: ProbeSpec, inputs, target, rng: Rng) -> FittedProbe:
    """Fit one probe predicting a single target from the code matrix.

    Linear kinds require n >= max(10, m + 2). Importance is |coefficient|
    on standardized inputs for linear kinds and validation-measured split
    gain per feature for GBT, normalized to sum 1 when positive.
    """
    X = np.asarray(inputs, dtype=float)
    y = np.asarray(target, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("inputs must be (n, m) with one target per row")
    if not np.all(np.isfinite(y)):
        raise ValueError("target contains non-finite values")
    n, m = X.shape
    if spec.kind in _LINEAR_KINDS and n < max(10, m + 2):
        raise ValueError(f"linear probes need n >= max(10, m+2) = {max(10, m + 2)}, got {n}")

    flags: list = []
    r2_path = None
    if spec.kind == "gbt":
        predict, importance, r2_path = _fit_gbt(spec, X, y, rng)
    else:
        predict, importance, flags = _fit_linear_family(spec, X, y)
    return FittedProbe(spec, predict, importance, _train_r2(y, predict(X)),
                       flags=flags, train_r2_path=r2_path)


def r2_score(probe: FittedProbe, test_inputs, test_target) -> float:
    """Held-out R-squared: 1 - SSE/SST on the test rows.

    Negative values are reported as-is; any clamping happens at the metric
    layer. A zero-variance test target is undefined: returns nan and flags
    the probe.
    """
    X = np.asarray(test_inputs, dtype=float)
    y = np.asarray(test_target, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("r2_score needs at least 2 test rows")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        probe.flags.append("zero-variance-test-target")
        probe.test_r2 = math.nan
        return math.nan
    value = 1.0 - float(np.sum((y - probe.predict(X)) ** 2)) / sst
    probe.test_r2 = value
    return value
