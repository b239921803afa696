import json

import pytest

from latentbench.numstats import Rng
from latentbench.probes import ProbeSpec
from latentbench.properties import (MATRIX_METRICS, PROPERTY_IDS,
                                    PropertyReport, Thresholds,
                                    _matrix_probe, aggregate_verdicts,
                                    check_p1, check_p2, check_p3, check_p4,
                                    matrix_to_csv, verdict_from_sweep)

T = Thresholds()


def _row(role, mean, ci=0.0, **params):
    return {"role": role, "params": params, "mean": mean, "ci": ci,
            "per_seed": [mean], "flags": []}


def test_thresholds_lookup():
    t = Thresholds(tau1=0.01, tau4=0.2)
    assert t.for_property("P1") == 0.01
    assert t.for_property("P4") == 0.2
    with pytest.raises(KeyError):
        t.for_property("P5")


def test_p1_verdict_bands():
    # a zero reference keeps the computed deviation an exact float literal
    def verdict(dev):
        sweep = [_row("ref", 0.0, rho=0.0), _row("sweep", dev, rho=0.9)]
        return verdict_from_sweep("P1", sweep, T)[0]

    assert verdict(0.05) == "satisfied"  # boundary inclusive
    assert verdict(0.0501) == "partial"
    assert verdict(0.1) == "partial"
    assert verdict(0.101) == "violated"
    with pytest.raises(ValueError):
        verdict_from_sweep("P1", [_row("sweep", 0.5)], T)


def test_p2_verdict_cases():
    def verdict(lossless, lossy):
        sweep = [_row("lossless", lossless, m=4), _row("lossy", lossy, m=3)]
        return verdict_from_sweep("P2", sweep, T)[0]

    assert verdict(0.98, 0.7) == "satisfied"
    assert verdict(0.92, 0.7) == "partial"
    assert verdict(0.80, 0.7) == "violated"
    # a lossy drop the metric cannot see is a violation outright
    assert verdict(1.0, 0.99) == "violated"


def test_p3_verdict_subtracts_baseline_uncertainty():
    sweep = [_row("baseline", 0.90, ci=0.03, ratio=1.0),
             _row("sweep", 0.83, ratio=2.0)]
    verdict, dev = verdict_from_sweep("P3", sweep, T)
    # raw deviation 0.07, minus the baseline CI 0.03 -> 0.04 <= tau
    assert dev == pytest.approx(0.07)
    assert verdict == "satisfied"
    sweep[1]["mean"] = 0.7
    assert verdict_from_sweep("P3", sweep, T)[0] == "violated"


def test_p4_verdict_uses_worst_cell():
    sweep = [_row("cell", 0.03, m_over_n=0.05),
             _row("cell", 0.12, m_over_n=0.5),
             _row("skipped", None, m_over_n=0.9)]
    verdict, dev = verdict_from_sweep("P4", sweep, Thresholds(tau4=0.10))
    assert dev == pytest.approx(0.12)
    assert verdict == "partial"


def test_aggregate_verdicts_rules():
    assert aggregate_verdicts("P1", ["satisfied", "violated"]) == "violated"
    assert aggregate_verdicts("P3", ["satisfied", "partial"]) == "partial"
    assert aggregate_verdicts("P2", ["satisfied"] * 3) == "satisfied"
    assert aggregate_verdicts("P2", ["violated"] * 2) == "violated"
    assert aggregate_verdicts("P2", ["satisfied", "violated"]) == "partial"
    with pytest.raises(ValueError):
        aggregate_verdicts("P1", [])
    with pytest.raises(ValueError):
        aggregate_verdicts("P1", ["maybe"])


def test_matrix_probe_assignment():
    assert _matrix_probe("mcc-pearson", "P1") is None
    assert _matrix_probe("r2", "P3").kind == "linear"
    assert _matrix_probe("dci-d", "P2").kind == "gbt"
    assert _matrix_probe("dci-d", "P4").kind == "lasso"


def _fast_kwargs():
    return {"seeds": 2, "n": 300, "split_fraction": 0.8}


def test_check_p1_report_shape_and_determinism():
    rep = check_p1("mcc-pearson", encoder="E3", rho_grid=(0.0, 0.9),
                   d=5, rng=Rng(77), **_fast_kwargs())
    assert rep.property_id == "P1" and rep.metric_id == "mcc-pearson"
    assert rep.verdict in ("satisfied", "partial", "violated")
    roles = [r["role"] for r in rep.sweep]
    assert roles.count("ref") == 1
    rep2 = check_p1("mcc-pearson", encoder="E3", rho_grid=(0.0, 0.9),
                    d=5, rng=Rng(77), **_fast_kwargs())
    assert rep2.sweep == rep.sweep
    # correlated factors inflate mixed-code matching scores
    assert rep.verdict == "violated"


def test_check_p1_skips_infeasible_rho():
    rep = check_p1("mcc-pearson", encoder="E1", rho_grid=(0.0, -0.9),
                   d=5, rng=Rng(7), **_fast_kwargs())
    assert any("skipped" in note for note in rep.notes)


def test_check_p2_roles_and_drop_path():
    rep = check_p2("mcc-pearson", dgp="D3", d=5, rng=Rng(78),
                   **_fast_kwargs())
    roles = {r["role"] for r in rep.sweep}
    assert {"lossless", "lossy"} <= roles
    ms = [r["params"]["m"] for r in rep.sweep]
    assert ms == sorted(ms, reverse=True) and ms[0] == 5 and ms[-1] == 1
    # matching ignores dropped factors entirely: exact scores on the path
    lossless = [r for r in rep.sweep if r["role"] == "lossless"][0]
    assert lossless["mean"] == 1.0
    assert rep.verdict == "violated"


def test_check_p3_baseline_matches_encoder_class():
    rep = check_p3("mcc-pearson", kind="E7", ratio_grid=(2.0,), d=4,
                   kappa=3.0, rng=Rng(79), **_fast_kwargs())
    base = [r for r in rep.sweep if r["role"] == "baseline"][0]
    assert base["params"]["ratio"] == 1.0
    assert rep.settings["kappa"] == 3.0
    rep_e5 = check_p3("mcc-pearson", kind="E5", ratio_grid=(1.0, 2.0), d=4,
                      rng=Rng(79), **_fast_kwargs())
    assert any("not overcomplete" in n for n in rep_e5.notes)
    with pytest.raises(ValueError):
        check_p3("mcc-pearson", kind="E1")


def test_check_p4_floor_overlay_and_gradients():
    # d=10 keeps the held-out fraction big enough for every cell
    rep = check_p4("mcc-pearson", md_grid=(1.0,), mn_grid=(0.2, 0.5),
                   seeds=2, d=10, rng=Rng(80))
    cells = [r for r in rep.sweep if r["role"] == "cell"]
    assert len(cells) == 2
    assert all("floor" in r for r in cells)
    grads = rep.extras["mn_gradients_by_md"]["1.0"]
    assert len(grads) == 1  # one step along the m/n axis
    # tighter samples score higher spurious matches
    assert grads[0] > 0.0


def test_check_p4_raises_when_every_cell_is_infeasible():
    # m=5 codes at n=10 leaves a 2-row test split, below the correlation
    # minimum, so no cell is computable
    with pytest.raises(ValueError):
        check_p4("mcc-pearson", md_grid=(1.0,), mn_grid=(0.5,), seeds=2,
                 d=5, rng=Rng(80))


def test_verdicts_recompute_from_serialized_sweeps():
    # the verdict is a pure function of the sweep: serialize, reload,
    # recompute, compare
    reports = [
        check_p1("mcc-pearson", encoder="E3", rho_grid=(0.0, 0.5), d=4,
                 rng=Rng(81), **_fast_kwargs()),
        check_p2("mcc-spearman", dgp="D1", d=4, rng=Rng(82),
                 **_fast_kwargs()),
        check_p3("r2", kind="E5", ratio_grid=(2.0,), d=4,
                 probe=ProbeSpec.linear(), rng=Rng(83), **_fast_kwargs()),
        check_p4("mcc-pearson", md_grid=(1.0,), mn_grid=(0.2, 0.5), seeds=2,
                 d=10, rng=Rng(84)),
    ]
    for rep in reports:
        payload = json.loads(rep.to_json())
        verdict, dev = verdict_from_sweep(payload["property_id"],
                                          payload["sweep"], T)
        assert verdict == rep.verdict
        assert dev == pytest.approx(rep.deviation, abs=1e-12)


def test_matrix_to_csv_layout(tmp_path):
    matrix = {"mcc-pearson": {"P1": "violated", "P2": "violated",
                              "P3": "violated", "P4": "violated"},
              "r2": {"P1": "satisfied", "P2": "partial",
                     "P3": "violated", "P4": "satisfied"}}
    path = tmp_path / "matrix.csv"
    matrix_to_csv(matrix, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,P1,P2,P3,P4"
    assert lines[1] == "mcc-pearson,violated,violated,violated,violated"
    assert lines[2] == "r2,satisfied,partial,violated,satisfied"


def test_property_and_matrix_constants():
    assert PROPERTY_IDS == ("P1", "P2", "P3", "P4")
    assert set(MATRIX_METRICS) == {"mcc-pearson", "mcc-spearman", "r2",
                                   "dci-d"}
