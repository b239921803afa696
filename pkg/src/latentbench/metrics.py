"""The four metric families under study: matching-based MCC (Pearson,
Spearman, RDC), probe-based R², DCI (disentanglement, completeness,
informativeness), and MIG.

Every score carries the estimator settings that produced it; a bare number
without its probe spec, split fraction, and matching is not comparable
across runs and the harness refuses to emit one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .numstats import (
    Rng,
    binned_entropy,
    discrete_entropy,
    histogram_mi,
    hungarian_max,
    pearson_matrix,
    rdc,
    spearman_matrix,
    split,
)
from .probes import FittedProbe, ProbeSpec, fit_probe, r2_score

__all__ = [
    "MetricScore", "ImportanceMatrix", "DciResult",
    "dependence_matrix", "mcc", "r2_metric", "dci", "mig",
    "evaluate_metric", "METRIC_IDS",
]

MCC_KINDS = ("pearson", "spearman", "rdc")

METRIC_IDS = ("mcc-pearson", "mcc-spearman", "mcc-rdc",
              "r2", "dci-d", "dci-c", "dci-i", "mig")


@dataclass
class MetricScore:
    name: str
    value: float
    defined: bool = True
    per_factor: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def summary(self) -> dict:
        """Flat, JSON-safe view; diagnostics arrays are deliberately
        dropped (they live on the object for callers that need them)."""
        return {
            "metric": self.name,
            "value": None if not self.defined else float(self.value),
            "defined": self.defined,
            "settings": dict(self.settings),
            "flags": list(self.flags),
        }


@dataclass
class ImportanceMatrix:
    """Nonnegative code-by-factor importance matrix with its induced row and
    column distributions and mass weights.

    Column j holds the (per-fit normalized) importances of all codes for
    factor j. Rows or columns with zero mass get zero weight and a flag
    rather than a renormalized distribution.
    """

    entries: np.ndarray  # (m, d), >= 0
    row_dist: np.ndarray  # (m, d), rows with mass sum to 1
    col_dist: np.ndarray  # (m, d), columns with mass sum to 1
    row_weights: np.ndarray  # (m,), sums to 1 when any mass
    col_weights: np.ndarray  # (d,), sums to 1 when any mass
    zero_rows: list
    zero_cols: list

    @classmethod
    def from_entries(cls, entries: np.ndarray) -> "ImportanceMatrix":
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("importance matrix must be 2-d (m, d)")
        if np.any(entries < 0.0):
            raise ValueError("importances must be nonnegative")
        row_mass = entries.sum(axis=1)
        col_mass = entries.sum(axis=0)
        total = entries.sum()
        row_dist = np.divide(entries, row_mass[:, None],
                             out=np.zeros_like(entries),
                             where=row_mass[:, None] > 0.0)
        col_dist = np.divide(entries, col_mass[None, :],
                             out=np.zeros_like(entries),
                             where=col_mass[None, :] > 0.0)
        row_weights = row_mass / total if total > 0.0 else np.zeros_like(row_mass)
        col_weights = col_mass / total if total > 0.0 else np.zeros_like(col_mass)
        return cls(
            entries=entries,
            row_dist=row_dist,
            col_dist=col_dist,
            row_weights=row_weights,
            col_weights=col_weights,
            zero_rows=[int(i) for i in np.flatnonzero(row_mass == 0.0)],
            zero_cols=[int(j) for j in np.flatnonzero(col_mass == 0.0)],
        )

    @property
    def shape(self):
        return self.entries.shape


def dependence_matrix(ds, kind: str, rng: Rng | None = None):
    """|dependence| matrix (m, d) of the requested kind. The brute-force
    matching oracle consumes this same construction, so any disagreement
    with mcc() isolates to the matcher."""
    if kind not in MCC_KINDS:
        raise ValueError(f"kind must be one of {MCC_KINDS}")
    z, zhat = ds.z, ds.zhat
    if z.shape[0] < 3:
        raise ValueError("dependence matrix needs n >= 3")
    flags = []
    if kind == "pearson":
        cm = pearson_matrix(zhat, z)
        dep = np.abs(cm.entries)
        if cm.constant_codes.any():
            flags.append("constant-codes")
    elif kind == "spearman":
        cm = spearman_matrix(zhat, z)
        dep = np.abs(cm.entries)
        if cm.constant_codes.any():
            flags.append("constant-codes")
    else:
        if rng is None:
            rng = Rng(0)
        m, d = zhat.shape[1], z.shape[1]
        dep = np.zeros((m, d))
        const = [i for i in range(m) if np.ptp(zhat[:, i]) == 0.0]
        if const:
            flags.append("constant-codes")
        for i in range(m):
            if i in const:
                continue
            for j in range(d):
                if np.ptp(z[:, j]) == 0.0:
                    continue
                dep[i, j] = rdc(zhat[:, i], z[:, j], rng=rng.derive("mcc-rdc", i, j))
    return dep, flags


def mcc(ds, kind: str = "pearson", rng: Rng | None = None) -> MetricScore:
    """Mean correlation coefficient: optimal one-to-one matching of codes to
    factors on the |dependence| matrix, averaged over the min(m, d) matched
    pairs. Pure function of the dataset; callers that want a held-out MCC
    split before calling."""
    dep, flags = dependence_matrix(ds, kind, rng)
    assignment = hungarian_max(dep)
    matched = [float(dep[i, j]) for i, j in assignment.pairs]
    # fsum over sorted values: the same mean the exhaustive matcher computes,
    # bit for bit
    value = math.fsum(sorted(matched)) / len(matched)
    return MetricScore(
        name=f"mcc-{kind}",
        value=value,
        diagnostics={"dependence": dep, "pairs": assignment.pairs,
                     "matched": matched},
        settings={"kind": kind, "n": int(ds.z.shape[0])},
        flags=flags,
    )


class _ProbeFamily(NamedTuple):
    probes: list  # FittedProbe per factor, None where skipped
    test_r2: np.ndarray  # (d,), nan where undefined/skipped
    flags: list
    n_train: int
    n_test: int


def _fit_family(ds, probe: ProbeSpec, split_fraction: float, rng: Rng) -> _ProbeFamily:
    """One probe per factor, all trained on the same split. r2_metric and
    dci call this with identical rng labels, so their fits agree exactly."""
    (z_tr, zh_tr), (z_te, zh_te) = split(ds.z, ds.zhat, split_fraction,
                                         rng.derive("family-split"))
    d = ds.z.shape[1]
    probes, r2s, flags = [], np.full(d, np.nan), []
    for j in range(d):
        if np.ptp(z_tr[:, j]) == 0.0:
            probes.append(None)
            flags.append(f"factor-{j}-zero-variance")
            continue
        fp = fit_probe(probe, zh_tr, z_tr[:, j], rng.derive("probe", j))
        r2s[j] = r2_score(fp, zh_te, z_te[:, j])
        probes.append(fp)
        flags.extend(f"factor-{j}-{f}" for f in fp.flags)
    return _ProbeFamily(probes, r2s, flags, z_tr.shape[0], z_te.shape[0])


def r2_metric(ds, probe: ProbeSpec, split_fraction: float = 0.8,
              rng: Rng | None = None) -> MetricScore:
    """Mean held-out explained variance of per-factor probes, clamped to
    [0, 1]. Unclamped per-factor values stay in the diagnostics."""
    if rng is None:
        raise ValueError("r2_metric needs an rng (split and probe fitting)")
    fam = _fit_family(ds, probe, split_fraction, rng)
    ok = ~np.isnan(fam.test_r2)
    flags = list(fam.flags)
    if not np.any(ok):
        return MetricScore("r2", float("nan"), defined=False,
                           per_factor=fam.test_r2,
                           settings={"probe": probe.settings(),
                                     "split_fraction": split_fraction},
                           flags=flags + ["no-defined-factors"])
    clamped = np.clip(fam.test_r2[ok], 0.0, 1.0)
    return MetricScore(
        name="r2",
        value=float(np.mean(clamped)),
        per_factor=fam.test_r2,
        diagnostics={"n_train": fam.n_train, "n_test": fam.n_test},
        settings={"probe": probe.settings(), "split_fraction": split_fraction},
        flags=flags,
    )


class DciResult(NamedTuple):
    disentanglement: MetricScore
    completeness: MetricScore
    informativeness: MetricScore
    importance: ImportanceMatrix


def _weighted_one_minus_entropy(dist: np.ndarray, weights: np.ndarray,
                                support: int) -> tuple[float, np.ndarray]:
    # 1 - H(p)/log(support) per row of dist, aggregated by the mass weights;
    # zero-weight rows contribute nothing by construction
    per = np.zeros(dist.shape[0])
    for i in range(dist.shape[0]):
        if weights[i] == 0.0:
            continue
        per[i] = 1.0 - discrete_entropy(dist[i]) / math.log(support)
    return float(np.dot(weights, per)), per


def dci(ds, probe: ProbeSpec, split_fraction: float = 0.8,
        rng: Rng | None = None) -> DciResult:
    """DCI from per-factor probe importances.

    D: mass-weighted mean over code rows of 1 - H(row)/log d.
    C: mass-weighted mean over factor columns of 1 - H(col)/log m.
    I: mean over factors of held-out R² clamped to [0, 1].
    """
    if rng is None:
        raise ValueError("dci needs an rng (split and probe fitting)")
    d = ds.z.shape[1]
    m = ds.zhat.shape[1]
    if d < 2:
        raise ValueError("dci needs d >= 2")
    fam = _fit_family(ds, probe, split_fraction, rng)
    entries = np.zeros((m, d))
    for j, fp in enumerate(fam.probes):
        if fp is not None:
            entries[:, j] = fp.importance
    imp = ImportanceMatrix.from_entries(entries)
    settings = {"probe": probe.settings(), "split_fraction": split_fraction}
    flags = list(fam.flags)

    if entries.sum() == 0.0:
        zero = MetricScore("dci-d", float("nan"), defined=False,
                           settings=settings, flags=flags + ["zero-importance"])
        zero_c = MetricScore("dci-c", float("nan"), defined=False,
                             settings=settings, flags=flags + ["zero-importance"])
    else:
        d_val, d_per = _weighted_one_minus_entropy(imp.row_dist,
                                                   imp.row_weights, d)
        zero = MetricScore("dci-d", d_val, per_factor=None,
                           diagnostics={"per_code": d_per},
                           settings=settings, flags=flags)
        if m < 2:
            zero_c = MetricScore("dci-c", float("nan"), defined=False,
                                 settings=settings,
                                 flags=flags + ["single-code"])
        else:
            c_val, c_per = _weighted_one_minus_entropy(imp.col_dist.T,
                                                       imp.col_weights, m)
            zero_c = MetricScore("dci-c", c_val, per_factor=c_per,
                                 settings=settings, flags=flags)

    ok = ~np.isnan(fam.test_r2)
    if np.any(ok):
        i_val = float(np.mean(np.clip(fam.test_r2[ok], 0.0, 1.0)))
        info = MetricScore("dci-i", i_val, per_factor=fam.test_r2,
                           settings=settings, flags=flags)
    else:
        info = MetricScore("dci-i", float("nan"), defined=False,
                           per_factor=fam.test_r2, settings=settings,
                           flags=flags + ["no-defined-factors"])
    return DciResult(zero, zero_c, info, imp)


def mig(ds, bins: int = 20) -> MetricScore:
    """Mutual information gap: per factor, the gap between the two largest
    code MIs, normalized by the factor's binned entropy; mean over factors,
    clamped to [0, 1]."""
    z, zhat = ds.z, ds.zhat
    n, d = z.shape
    m = zhat.shape[1]
    if m < 2:
        raise ValueError("mig needs m >= 2")
    if n < 10 * bins:
        raise ValueError(f"mig needs n >= 10*bins = {10 * bins}")
    table = np.zeros((m, d))
    for i in range(m):
        for j in range(d):
            table[i, j] = histogram_mi(zhat[:, i], z[:, j], bins=bins)
    gaps = np.full(d, np.nan)
    flags = []
    for j in range(d):
        h = binned_entropy(z[:, j], bins=bins)
        if h <= 0.0:
            flags.append(f"factor-{j}-zero-entropy")
            continue
        top = np.sort(table[:, j])[-2:]
        gaps[j] = (top[1] - top[0]) / h
    ok = ~np.isnan(gaps)
    if not np.any(ok):
        return MetricScore("mig", float("nan"), defined=False,
                           per_factor=gaps, settings={"bins": bins},
                           flags=flags + ["no-defined-factors"])
    value = float(np.clip(np.mean(gaps[ok]), 0.0, 1.0))
    return MetricScore("mig", value, per_factor=gaps,
                       diagnostics={"mi": table},
                       settings={"bins": bins}, flags=flags)


def _held_out_view(ds, split_fraction: float, rng: Rng):
    # same split labels as _fit_family, so matching metrics and probe
    # metrics score the identical held-out rows
    _, (z_te, zh_te) = split(ds.z, ds.zhat, split_fraction,
                             rng.derive("family-split"))
    return type(ds)(z_te, zh_te, ds.spec, ds.alignment, ds.equivalence)


def evaluate_metric(ds, metric_id: str, probe: ProbeSpec | None = None,
                    split_fraction: float = 0.8, rng: Rng | None = None,
                    mig_bins: int = 20) -> MetricScore:
    """One evaluation protocol for the whole suite: every metric is scored
    on held-out data. Probe metrics split internally; matching and MI
    metrics are computed on the held-out fraction of the same split.

    Cells too small for the requested estimator come back undefined with an
    `infeasible:` flag instead of raising, so grid sweeps can record them.
    """
    if metric_id not in METRIC_IDS:
        raise ValueError(f"unknown metric {metric_id!r}")
    if rng is None:
        raise ValueError("evaluate_metric needs an rng")
    try:
        if metric_id.startswith("mcc-"):
            test = _held_out_view(ds, split_fraction, rng)
            return mcc(test, metric_id.removeprefix("mcc-"),
                       rng=rng.derive("mcc"))
        if metric_id == "mig":
            test = _held_out_view(ds, split_fraction, rng)
            return mig(test, bins=mig_bins)
        if probe is None:
            raise ValueError(f"{metric_id} needs a probe spec")
        if metric_id == "r2":
            return r2_metric(ds, probe, split_fraction, rng)
        result = dci(ds, probe, split_fraction, rng)
        return {"dci-d": result.disentanglement,
                "dci-c": result.completeness,
                "dci-i": result.informativeness}[metric_id]
    except ValueError as exc:
        if probe is None and metric_id in ("r2", "dci-d", "dci-c", "dci-i"):
            raise
        return MetricScore(metric_id, float("nan"), defined=False,
                           settings={"split_fraction": split_fraction},
                           flags=[f"infeasible: {exc}"])
