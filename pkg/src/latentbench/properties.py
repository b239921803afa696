"""Automated checkers for the four desiderata:

P1  invariance to latent correlation,
P2  faithfulness to effective dimensionality,
P3  invariance to overcomplete dimension,
P4  zero score on factor-independent codes.

Each checker runs a structured sweep over seeds and returns a
PropertyReport whose verdict is recomputable from the sweep table and the
thresholds alone; `verdict_from_sweep` is that recomputation and the
checkers themselves go through it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import encoders as enc
from .dgp import DgpSpec, sample
from .metrics import evaluate_metric
from .numstats import Rng
from .oracles import null_mcc_floor
from .probes import ProbeSpec

__all__ = [
    "Thresholds", "PropertyReport", "verdict_from_sweep",
    "check_p1", "check_p2", "check_p3", "check_p4",
    "aggregate_verdicts", "verdict_matrix", "VERDICTS",
    "MATRIX_METRICS", "matrix_to_csv",
]

VERDICTS = ("satisfied", "partial", "violated")

PROPERTY_IDS = ("P1", "P2", "P3", "P4")

MATRIX_METRICS = ("mcc-pearson", "mcc-spearman", "r2", "dci-d")


@dataclass(frozen=True)
class Thresholds:
    """Verdict thresholds. The source material sets none numerically; these
    separate its reported violations (deviations >= 0.15) from its reported
    stabilities (<= 0.02) with margin. Configuration, not constants."""

    tau1: float = 0.05
    tau2: float = 0.05
    tau3: float = 0.05
    tau4: float = 0.10

    def for_property(self, property_id: str) -> float:
        return {"P1": self.tau1, "P2": self.tau2,
                "P3": self.tau3, "P4": self.tau4}[property_id]


@dataclass
class PropertyReport:
    property_id: str
    metric_id: str
    verdict: str
    sweep: list  # rows: {role, params, mean, ci, per_seed, flags, ...}
    deviation: float
    thresholds: Thresholds
    settings: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = asdict(self)
        return json.dumps(payload, indent=2, sort_keys=True)


def _band_verdict(deviation: float, tau: float) -> str:
    if deviation <= tau:
        return "satisfied"
    if deviation <= 2.0 * tau:
        return "partial"
    return "violated"


def verdict_from_sweep(property_id: str, sweep: list,
                       thresholds: Thresholds) -> tuple[str, float]:
    """Recompute (verdict, deviation) from a sweep table. Pure; the
    checkers call this and a test re-calls it on their serialized output."""
    tau = thresholds.for_property(property_id)
    rows = [r for r in sweep if r["mean"] is not None]
    if property_id == "P1":
        ref = [r for r in rows if r["role"] == "ref"]
        if not ref:
            raise ValueError("P1 sweep needs a rho=0 reference row")
        base = ref[0]["mean"]
        dev = max((abs(r["mean"] - base) for r in rows if r["role"] == "sweep"),
                  default=0.0)
        return _band_verdict(dev, tau), dev
    if property_id == "P2":
        lossless = [r for r in rows if r["role"] == "lossless"]
        lossy = [r for r in rows if r["role"] == "lossy"]
        if not lossless or not lossy:
            raise ValueError("P2 sweep needs lossless and lossy rows")
        dev = 1.0 - lossless[0]["mean"]
        lossy_ok = lossy[0]["mean"] < 1.0 - tau
        if not lossy_ok:
            return "violated", dev
        if dev <= tau:
            return "satisfied", dev
        if dev <= 2.0 * tau:
            return "partial", dev
        return "violated", dev
    if property_id == "P3":
        base = [r for r in rows if r["role"] == "baseline"]
        if not base:
            raise ValueError("P3 sweep needs a matched-dimension baseline row")
        ref, eps = base[0]["mean"], base[0]["ci"]
        dev = max((abs(r["mean"] - ref) for r in rows if r["role"] == "sweep"),
                  default=0.0)
        # finite-n slack: the baseline's own seed spread
        return _band_verdict(max(0.0, dev - eps), tau), dev
    if property_id == "P4":
        cells = [r for r in rows if r["role"] == "cell"]
        if not cells:
            raise ValueError("P4 sweep has no defined cells")
        dev = max(r["mean"] for r in cells)
        return _band_verdict(dev, tau), dev
    raise ValueError(f"unknown property {property_id!r}")


def _mean_ci(values: list) -> tuple[float | None, float]:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        return None, 0.0
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, 0.0
    sd = float(np.std(vals, ddof=1))
    return mean, 1.96 * sd / math.sqrt(len(vals))


def _score(ds, metric_id, probe, split_fraction, rng):
    s = evaluate_metric(ds, metric_id, probe=probe,
                        split_fraction=split_fraction, rng=rng)
    return (s.value if s.defined else None), list(s.flags)


def _sweep_row(role, params, per_seed, flags):
    mean, ci = _mean_ci(per_seed)
    return {"role": role, "params": params, "mean": mean, "ci": ci,
            "per_seed": per_seed, "flags": sorted(set(flags))}


_DEFAULT_RHO_GRID = (0.0, 0.25, 0.5, 0.75, 0.9, 0.95)


def check_p1(metric_id: str, encoder: str = "E3",
             rho_grid=_DEFAULT_RHO_GRID, seeds: int = 5, *,
             d: int = 10, n: int = 1000, kappa: float = 5.0,
             probe: ProbeSpec | None = None, split_fraction: float = 0.8,
             thresholds: Thresholds = Thresholds(),
             rng: Rng = Rng(101)) -> PropertyReport:
    """Correlation invariance: sweep the shared-correlation strength of the
    factors under a fixed encoder; deviation is the largest drift of the
    mean score from its rho=0 reference."""
    if encoder not in ("E1", "E3"):
        raise ValueError("P1 tests encoder E1 or E3")
    rho_grid = sorted(set(float(r) for r in rho_grid) | {0.0})
    lo = -1.0 / (d - 1) + 1e-9
    sweep, notes = [], []
    for rho in rho_grid:
        if not lo < rho < 1.0 - 1e-9:
            notes.append(f"rho={rho} outside feasibility, skipped")
            sweep.append(_sweep_row("skipped", {"rho": rho}, [], []))
            continue
        per_seed, flags = [], []
        for s in range(seeds):
            data = sample(DgpSpec("D2", d=d, rho=rho), n,
                          rng.derive("data", s, repr(rho)))
            # encoder parameters fixed per seed, shared across the rho grid
            enc_rng = rng.derive("encoder", s)
            if encoder == "E1":
                ds = enc.encode_e1(data.z, rng=enc_rng)
            else:
                ds = enc.encode_e3(data.z, kappa=kappa, rng=enc_rng)
            val, fl = _score(ds, metric_id, probe, split_fraction,
                             rng.derive("eval", s, repr(rho)))
            per_seed.append(val)
            flags.extend(fl)
        role = "ref" if rho == 0.0 else "sweep"
        sweep.append(_sweep_row(role, {"rho": rho}, per_seed, flags))
    verdict, deviation = verdict_from_sweep("P1", sweep, thresholds)
    settings = {"encoder": encoder, "d": d, "n": n, "kappa": kappa,
                "seeds": seeds, "split_fraction": split_fraction,
                "probe": probe.settings() if probe else None}
    return PropertyReport("P1", metric_id, verdict, sweep, deviation,
                          thresholds, settings=settings, notes=notes)


def check_p2(metric_id: str, dgp: str = "D1", drop_sequence=None,
             seeds: int = 5, *, d: int = 10, n: int = 1000,
             link: str = "cube", synergy: str = "product",
             probe: ProbeSpec | None = None, split_fraction: float = 0.8,
             thresholds: Thresholds = Thresholds(),
             rng: Rng = Rng(102)) -> PropertyReport:
    """Effective-dimensionality faithfulness: walk the factor-dropping path.
    Satisfied iff the score at m = d_eff (free factors only) stays above
    1 - tau and falls below 1 - tau once a free factor is dropped."""
    if dgp not in ("D1", "D3", "D4"):
        raise ValueError("P2 tests D1, D3 or D4")
    spec = {"D1": DgpSpec("D1", d=d),
            "D3": DgpSpec("D3", d=d, link=link),
            "D4": DgpSpec("D4", d=d, synergy=synergy)}[dgp]
    probe_data = sample(spec, 3, rng.derive("shape-probe"))
    order = list(probe_data.retention_order())  # free asc, then children
    if drop_sequence is None:
        # children first, then free factors from the top index down
        drop_sequence = list(order[::-1])
    if sorted(drop_sequence) != list(range(d)):
        raise ValueError("drop_sequence must enumerate all factors")
    d_eff = probe_data.d_eff
    children = {c for c, _, _ in probe_data.constraints}
    if set(drop_sequence[: d - d_eff]) != children:
        raise ValueError("drop sequence must remove constrained children first")

    sweep = []
    for n_dropped in range(0, d):
        retained = [j for j in range(d) if j not in set(drop_sequence[:n_dropped])]
        m = len(retained)
        per_seed, flags = [], []
        for s in range(seeds):
            data = sample(spec, n, rng.derive("data", s))
            if m == d:
                ds = enc.encode_e1(data.z, rng=rng.derive("enc", s, m))
            else:
                ds = enc.encode_e4(data.z, retained,
                                   rng=rng.derive("enc", s, m))
            val, fl = _score(ds, metric_id, probe, split_fraction,
                             rng.derive("eval", s, m))
            per_seed.append(val)
            flags.extend(fl)
        role = {d_eff: "lossless", d_eff - 1: "lossy"}.get(m, "path")
        sweep.append(_sweep_row(role, {"m": m, "retained": retained},
                                per_seed, flags))
    verdict, deviation = verdict_from_sweep("P2", sweep, thresholds)
    settings = {"dgp": dgp, "d": d, "d_eff": d_eff, "n": n, "seeds": seeds,
                "drop_sequence": list(drop_sequence),
                "split_fraction": split_fraction,
                "probe": probe.settings() if probe else None}
    return PropertyReport("P2", metric_id, verdict, sweep, deviation,
                          thresholds, settings=settings)


_P3_RATIOS = {"E5": (1.5, 2.0, 3.0, 5.0, 10.0),
              "E6": (1.5, 2.0, 3.0, 5.0, 10.0),
              "E7": (1.5, 2.0, 3.0, 5.0, 10.0),
              "E8": (2.0, 3.0, 5.0, 10.0)}


def _p3_encode(kind, z, m, d, kappa, s, rng):
    if kind == "E5":
        return enc.encode_e5(z, m=m, rng=rng)
    if kind == "E6":
        return enc.encode_e6(z, m=m, rng=rng)
    if kind == "E7":
        return enc.encode_e7(z, m=m, kappa=kappa, rng=rng)
    if kind == "E8":
        k = m // d
        if k * d != m:
            raise ValueError("E8 ratio must be an integer")
        return enc.encode_e8(z, k=k)
    raise ValueError("P3 tests E5, E6, E7 or E8")


def check_p3(metric_id: str, kind: str = "E5", ratio_grid=None,
             seeds: int = 5, *, d: int = 5, n: int = 1000,
             kappa: float = 5.0, probe: ProbeSpec | None = None,
             split_fraction: float = 0.8,
             thresholds: Thresholds = Thresholds(),
             rng: Rng = Rng(103)) -> PropertyReport:
    """Overcompleteness invariance: sweep m/d above 1 and compare against
    the matched-dimension baseline of the same equivalence class (E1 for
    the copy-like kinds, E3 at the same kappa for mixing)."""
    if kind not in _P3_RATIOS:
        raise ValueError("P3 tests E5, E6, E7 or E8")
    if ratio_grid is None:
        ratio_grid = _P3_RATIOS[kind]
    notes = []

    def encode_baseline(z, s_rng):
        if kind == "E7":
            return enc.encode_e3(z, kappa=kappa, rng=s_rng)
        return enc.encode_e1(z, rng=s_rng)

    per_seed, flags = [], []
    for s in range(seeds):
        data = sample(DgpSpec("D1", d=d), n, rng.derive("data", s, "base"))
        ds = encode_baseline(data.z, rng.derive("enc", s, "base"))
        val, fl = _score(ds, metric_id, probe, split_fraction,
                         rng.derive("eval", s, "base"))
        per_seed.append(val)
        flags.extend(fl)
    sweep = [_sweep_row("baseline", {"ratio": 1.0}, per_seed, flags)]

    for ratio in ratio_grid:
        m = int(round(ratio * d))
        if m <= d:
            notes.append(f"ratio={ratio} not overcomplete, skipped")
            sweep.append(_sweep_row("skipped", {"ratio": ratio}, [], []))
            continue
        per_seed, flags = [], []
        for s in range(seeds):
            data = sample(DgpSpec("D1", d=d), n, rng.derive("data", s, m))
            ds = _p3_encode(kind, data.z, m, d, kappa, s,
                            rng.derive("enc", s, m))
            val, fl = _score(ds, metric_id, probe, split_fraction,
                             rng.derive("eval", s, m))
            per_seed.append(val)
            flags.extend(fl)
        sweep.append(_sweep_row("sweep", {"ratio": ratio, "m": m},
                                per_seed, flags))
    verdict, deviation = verdict_from_sweep("P3", sweep, thresholds)
    settings = {"kind": kind, "d": d, "n": n, "kappa": kappa, "seeds": seeds,
                "ratio_grid": [float(r) for r in ratio_grid],
                "split_fraction": split_fraction,
                "probe": probe.settings() if probe else None}
    return PropertyReport("P3", metric_id, verdict, sweep, deviation,
                          thresholds, settings=settings, notes=notes)


_P4_MD_GRID = (1.0, 2.0, 5.0)
_P4_MN_GRID = (0.05, 0.1, 0.2, 0.5)


def check_p4(metric_id: str, null_kind: str = "gaussian",
             md_grid=_P4_MD_GRID, mn_grid=_P4_MN_GRID, seeds: int = 5, *,
             d: int = 10, probe: ProbeSpec | None = None,
             split_fraction: float = 0.8,
             thresholds: Thresholds = Thresholds(),
             rng: Rng = Rng(104)) -> PropertyReport:
    """Null rejection: codes independent of the factors should score at
    most tau on every (m/d, m/n) cell. MCC rows carry the analytic floor
    sqrt(2 ln m / n) as an overlay."""
    sweep, notes = [], []
    is_mcc = metric_id.startswith("mcc-")
    for md in md_grid:
        for mn in mn_grid:
            m = int(round(md * d))
            n = int(round(m / mn))
            params = {"m_over_d": md, "m_over_n": mn, "m": m, "n": n}
            per_seed, flags = [], []
            for s in range(seeds):
                data = sample(DgpSpec("D1", d=d), n,
                              rng.derive("data", s, m, n))
                ds = enc.encode_null(data.z, m=m, kind=null_kind,
                                     rng=rng.derive("enc", s, m, n))
                val, fl = _score(ds, metric_id, probe, split_fraction,
                                 rng.derive("eval", s, m, n))
                per_seed.append(val)
                flags.extend(fl)
            row = _sweep_row("cell", params, per_seed, flags)
            if row["mean"] is None:
                row["role"] = "skipped"
                notes.append(f"cell m={m} n={n} infeasible for {metric_id}")
            if is_mcc and m >= 2:
                row["floor"] = null_mcc_floor(m, n)
            sweep.append(row)
    verdict, deviation = verdict_from_sweep("P4", sweep, thresholds)
    # descriptive gradients: scores should move along m/n, not m/d
    by_md = {}
    for row in sweep:
        if row["role"] == "cell":
            by_md.setdefault(row["params"]["m_over_d"], []).append(
                (row["params"]["m_over_n"], row["mean"]))
    gradients = {
        str(md): [round(b[1] - a[1], 6)
                  for a, b in zip(vals, vals[1:])]
        for md, vals in ((md, sorted(v)) for md, v in by_md.items())
    }
    settings = {"null_kind": null_kind, "d": d, "seeds": seeds,
                "md_grid": list(md_grid), "mn_grid": list(mn_grid),
                "split_fraction": split_fraction,
                "probe": probe.settings() if probe else None}
    return PropertyReport("P4", metric_id, verdict, sweep, deviation,
                          thresholds, settings=settings,
                          extras={"mn_gradients_by_md": gradients},
                          notes=notes)


def aggregate_verdicts(property_id: str, verdicts: list) -> str:
    """Fold per-configuration verdicts into one per-property verdict.

    P1/P3/P4 demand invariance for every tested configuration, so the worst
    verdict wins. P2 holds per DGP class: all-satisfied and all-violated
    pass through, anything mixed is partial.
    """
    if not verdicts:
        raise ValueError("no verdicts to aggregate")
    for v in verdicts:
        if v not in VERDICTS:
            raise ValueError(f"unknown verdict {v!r}")
    if property_id == "P2":
        if all(v == "satisfied" for v in verdicts):
            return "satisfied"
        if all(v == "violated" for v in verdicts):
            return "violated"
        return "partial"
    return max(verdicts, key=VERDICTS.index)


# Probe assignment for the summary matrix. R-squared rows use the linear
# probe throughout; DCI rows use GBT except on the null grid, where the
# tree probe's validated gains vanish identically and Lasso is the
# informative choice.
def _matrix_probe(metric_id: str, property_id: str) -> ProbeSpec | None:
    if metric_id == "r2":
        return ProbeSpec.linear()
    if metric_id.startswith("dci-"):
        return ProbeSpec.lasso() if property_id == "P4" else ProbeSpec.gbt()
    return None


def verdict_matrix(metrics=MATRIX_METRICS, seeds: int = 5, *,
                   thresholds: Thresholds = Thresholds(),
                   rng: Rng = Rng(42)) -> dict:
    """The suite's summary: every metric checked against every property at
    the default scales. Returns {metric: {property: verdict}} plus the
    underlying reports under "_reports"."""
    matrix: dict = {}
    reports = []
    for metric_id in metrics:
        row = {}
        for prop, runs in _matrix_runs(metric_id, seeds, thresholds, rng):
            verdicts = []
            for rep in runs:
                reports.append(rep)
                verdicts.append(rep.verdict)
            row[prop] = aggregate_verdicts(prop, verdicts)
        matrix[metric_id] = row
    matrix["_reports"] = reports
    return matrix


def _matrix_runs(metric_id, seeds, thresholds, rng):
    common = {"seeds": seeds, "thresholds": thresholds}
    p1 = [check_p1(metric_id, encoder=e, rng=rng.derive("p1", metric_id, e),
                   probe=_matrix_probe(metric_id, "P1"), **common)
          for e in ("E1", "E3")]
    yield "P1", p1
    p2 = [check_p2(metric_id, dgp=g, rng=rng.derive("p2", metric_id, g),
                   probe=_matrix_probe(metric_id, "P2"), **common)
          for g in ("D1", "D3", "D4")]
    yield "P2", p2
    p3 = [check_p3(metric_id, kind=k, rng=rng.derive("p3", metric_id, k),
                   probe=_matrix_probe(metric_id, "P3"), **common)
          for k in ("E5", "E6", "E7", "E8")]
    yield "P3", p3
    p4 = [check_p4(metric_id, rng=rng.derive("p4", metric_id),
                   probe=_matrix_probe(metric_id, "P4"), **common)]
    yield "P4", p4


def matrix_to_csv(matrix: dict, path) -> None:
    """Metric-by-property layout, one verdict per cell."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", *PROPERTY_IDS])
        for metric_id, row in matrix.items():
            if metric_id.startswith("_"):
                continue
            writer.writerow([metric_id, *(row[p] for p in PROPERTY_IDS)])
