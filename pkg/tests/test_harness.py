import json

import numpy as np
import pytest

from latentbench import cli
from latentbench.harness import (CSV_COLUMNS, ConfigError, ExperimentConfig,
                                 MetricSetting, PRESET_NAMES, _cell_stream,
                                 diagnose, export, preset_config,
                                 read_matrix_csv, run, write_matrix_csv)
from latentbench.metrics import evaluate_metric
from latentbench.numstats import Rng
from latentbench.probes import ProbeSpec


def _small_config(**overrides):
    base = {
        "name": "unit",
        "dgps": [{"kind": "D1", "d": 3}],
        "encoders": [{"kind": "E1"}],
        "metrics": [MetricSetting("mcc-pearson")],
        "n": 120,
        "seeds": [0, 1],
    }
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_json_roundtrip():
    cfg = _small_config(metrics=[MetricSetting("r2", ProbeSpec.gbt(depth=2)),
                                 MetricSetting("mig", bins=5)])
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back.to_dict() == cfg.to_dict()
    assert back.metrics[0].probe.depth == 2
    assert back.metrics[1].bins == 5


@pytest.mark.parametrize("mutation, needle", [
    ({"name": ""}, "name"),
    ({"dgps": []}, "dgps"),
    ({"dgps": [{"kind": "D7", "d": 3}]}, "dgps[0].kind"),
    ({"dgps": [{"kind": "D1", "d": 0}]}, "dgps[0].d"),
    ({"encoders": [{"kind": "E99"}]}, "encoders[0].kind"),
    ({"metrics": [{"id": "auc"}]}, "metrics[0].id"),
    ({"seeds": []}, "seeds"),
    ({"split_fraction": 1.2}, "split_fraction"),
    ({"schema_version": "0"}, "schema_version"),
])
def test_config_validation_reports_field(mutation, needle):
    payload = json.loads(_small_config().to_json())
    payload.update(mutation)
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[")):
        ExperimentConfig.from_dict(payload)


def test_run_produces_one_row_per_cell_metric_seed():
    cfg = _small_config(
        dgps=[{"kind": "D2", "d": 3, "rho": [0.0, 0.5]}],
        metrics=[MetricSetting("mcc-pearson"), MetricSetting("mcc-spearman")])
    table = run(cfg)
    assert len(table.rows) == 2 * 2 * 2
    assert all(r.defined for r in table.rows)
    assert all(r.cell["m"] == 3 for r in table.rows)


def test_run_records_skipped_cells_with_reason():
    cfg = _small_config(
        dgps=[{"kind": "D2", "d": 3, "rho": [0.5, -0.9]}])
    table = run(cfg)
    assert len(table.skipped) == 1
    cell, reason = table.skipped[0]
    assert "rho" in reason
    skipped_rows = [r for r in table.rows if not r.defined]
    assert len(skipped_rows) == 2  # one per seed
    assert all(r.flags[0].startswith("skipped:") for r in skipped_rows)


def test_run_matches_direct_metric_evaluation():
    # a harness row must equal calling the metric by hand with the same
    # derived stream: the orchestration adds nothing
    cfg = _small_config(encoders=[{"kind": "E3", "kappa": 4.0}])
    table = run(cfg)
    row = [r for r in table.rows if r.seed == 1][0]
    from latentbench.harness import _encode_cell, _sample_cell
    cell = {k: v for k, v in row.cell.items()}
    stream = _cell_stream(1, cell)
    data = _sample_cell(cell, stream)
    ds = _encode_cell(cell, data, stream.derive("encoder"))
    direct = evaluate_metric(ds, "mcc-pearson", split_fraction=0.8,
                             rng=stream.derive("metric", "mcc-pearson"))
    assert row.value == direct.value


def test_cell_stream_ignores_grid_slicing():
    # the stream depends on coordinates, not on which sweep produced them
    a = _cell_stream(3, {"dgp": "D1", "d": 4, "encoder": "E1", "n": 100})
    b = _cell_stream(3, {"encoder": "E1", "n": 100, "dgp": "D1", "d": 4})
    assert a.generator().standard_normal(4).tolist() == \
        b.generator().standard_normal(4).tolist()


def test_m_over_n_axis_derives_sample_sizes():
    cfg = _small_config(
        dgps=[{"kind": "D1", "d": 4}],
        encoders=[{"kind": "E10-gaussian", "m_over_d": [1.0, 2.0]}],
        n=None, m_over_n=[0.1, 0.2])
    table = run(cfg)
    cells = {(r.cell["m"], r.cell["n"]) for r in table.rows}
    assert cells == {(4, 40), (4, 20), (8, 80), (8, 40)}


def test_export_is_byte_stable_and_schema_fixed(tmp_path):
    cfg = _small_config()
    a, b = tmp_path / "a", tmp_path / "b"
    export(run(cfg), a)
    export(run(cfg), b)
    for name in ("results.csv", "summary.csv", "results.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    with pytest.raises(ValueError):
        export(type(run(cfg))(cfg, [], []), tmp_path / "c")


def test_export_summary_includes_null_floor_overlay(tmp_path):
    cfg = _small_config(
        dgps=[{"kind": "D1", "d": 4}],
        encoders=[{"kind": "E10-gaussian", "m_over_d": [1.0]}],
        n=40)
    export(run(cfg), tmp_path)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    header = lines[0].split(",")
    floor_col = header.index("null_floor")
    values = [ln.split(",")[floor_col] for ln in lines[1:]]
    assert all(v != "" for v in values)
    assert float(values[0]) == pytest.approx(np.sqrt(2 * np.log(4) / 40))


def test_presets_all_validate_and_have_stable_names():
    assert PRESET_NAMES == ("correlation", "dropping", "null-phase",
                            "overcomplete-bars", "overcomplete-sweep",
                            "rho-kappa", "sample-sensitivity", "sanity")
    for name in PRESET_NAMES:
        cfg = preset_config(name)
        # every preset survives its own serialization contract
        back = ExperimentConfig.from_json(cfg.to_json())
        assert back.name == name
    with pytest.raises(ConfigError):
        preset_config("everything")


def test_matrix_csv_roundtrip_and_validation(tmp_path):
    z = Rng(0).generator().standard_normal((30, 3))
    path = tmp_path / "z.csv"
    write_matrix_csv(path, z, "z")
    back = read_matrix_csv(path, "z")
    assert np.array_equal(back, z)  # repr round-trips floats exactly
    with pytest.raises(ValueError, match="header"):
        read_matrix_csv(path, "c")
    bad = tmp_path / "bad.csv"
    bad.write_text("z0,z1\n1.0\n")
    with pytest.raises(ValueError, match="ragged"):
        read_matrix_csv(bad, "z")
    bad.write_text("z0,z1\n1.0,x\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_matrix_csv(bad, "z")
    bad.write_text("z0,z1\n")
    with pytest.raises(ValueError, match="no data"):
        read_matrix_csv(bad, "z")


def _diagnose_fixture(tmp_path, n=250, null=False):
    from latentbench import encoders as enc
    from latentbench.dgp import DgpSpec, sample
    data = sample(DgpSpec(kind="D1", d=4), n, Rng(1).derive("z"))
    if null:
        ds = enc.encode_null(data.z, m=4, kind="gaussian",
                             rng=Rng(1).derive("e"))
    else:
        ds = enc.encode_e1(data.z, rng=Rng(1).derive("e"))
    zp, cp = tmp_path / "z.csv", tmp_path / "c.csv"
    write_matrix_csv(zp, data.z, "z")
    write_matrix_csv(cp, ds.zhat, "c")
    return zp, cp


def test_diagnose_report_on_clean_representation(tmp_path):
    zp, cp = _diagnose_fixture(tmp_path)
    report = diagnose(zp, cp, rng=Rng(5))
    assert report.n == 250 and report.d == 4 and report.m == 4
    assert not report.ratio_warning
    assert report.scores["mcc-pearson"]["value"] == 1.0
    assert "mcc-pearson" not in report.indistinguishable
    md = report.to_markdown()
    assert "m/n = 0.016" in md
    payload = json.loads(report.to_json())
    assert payload["scores"]["r2[linear]"]["settings"]["probe"]["kind"] == "linear"


def test_diagnose_flags_null_codes_and_bad_ratio(tmp_path):
    zp, cp = _diagnose_fixture(tmp_path, n=30, null=True)
    report = diagnose(zp, cp, rng=Rng(6))
    assert report.ratio_warning
    assert "mcc-pearson" in report.indistinguishable
    statuses = {item: status for item, status, _ in report.checklist}
    assert statuses["report m/n before trusting matching scores"] == "warn"


def test_diagnose_rejects_row_mismatch(tmp_path):
    zp, cp = _diagnose_fixture(tmp_path)
    short = tmp_path / "short.csv"
    short.write_text("c0\n" + "\n".join(["1.0"] * 10) + "\n")
    with pytest.raises(ValueError, match="mismatch"):
        diagnose(zp, short)


# --- command line ------------------------------------------------------------

def test_cli_parse_grid():
    assert cli._parse_grid("0,0.5,0.9") == [0.0, 0.5, 0.9]
    assert cli._parse_grid("1:3:3", integer=True) == [1, 2, 3]
    assert cli._parse_grid("0:1:1") == [0.0]
    with pytest.raises(ValueError):
        cli._parse_grid("1:2")
    with pytest.raises(ValueError):
        cli._parse_grid("1:2:0")


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(_small_config().to_json())
    assert cli.main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "results.csv").exists()
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    cfg_path.write_text("{}")
    assert cli.main(["run", str(cfg_path)]) == 2
    capsys.readouterr()


def test_cli_preset_listing_and_show(capsys):
    assert cli.main(["preset", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert list(PRESET_NAMES) == out
    assert cli.main(["preset", "sanity", "--show"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["name"] == "sanity"
    assert cli.main(["preset", "bogus", "--show"]) == 2
    capsys.readouterr()


def test_cli_oracle_curves(tmp_path, capsys):
    assert cli.main(["oracle", "mcc-closed-form", "--rho", "0.0",
                     "--eps", "1.0"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "rho,eps,mcc"
    assert float(out[1].split(",")[2]) == pytest.approx(
        (1 + np.sqrt(2)) / 3)
    path = tmp_path / "floor.csv"
    assert cli.main(["oracle", "null-floor", "--m", "10", "--n", "20",
                     "--out", str(path)]) == 0
    assert path.read_text().splitlines()[1].startswith("10,20,")
    capsys.readouterr()


def test_cli_diagnose(tmp_path, capsys):
    zp, cp = _diagnose_fixture(tmp_path)
    json_path = tmp_path / "report.json"
    assert cli.main(["diagnose", "--z", str(zp), "--zhat", str(cp),
                     "--json", str(json_path)]) == 0
    assert "Representation diagnostic report" in capsys.readouterr().out
    assert json.loads(json_path.read_text())["m"] == 4
    assert cli.main(["diagnose", "--z", str(zp),
                     "--zhat", str(tmp_path / "nope.csv")]) == 2
    capsys.readouterr()


def test_cli_properties_strict_exit(tmp_path, capsys):
    cfg = tmp_path / "props.json"
    cfg.write_text(json.dumps({"metrics": ["mcc-pearson"], "seeds": 1}))
    out_csv = tmp_path / "matrix.csv"
    code = cli.main(["properties", str(cfg), "--strict",
                     "--out", str(out_csv)])
    assert code == 3  # matching scores violate every property
    assert out_csv.read_text().splitlines()[0] == "metric,P1,P2,P3,P4"
    assert cli.main(["properties", str(cfg), "--metrics", "banana"]) == 2
    capsys.readouterr()
