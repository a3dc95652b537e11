import json
import math
import textwrap
from fractions import Fraction
from pathlib import Path

import pytest

from sdmcable.capacity import DistributionQuery, required_snr_m
from sdmcable.cli import main
from sdmcable.errors import ConfigError
from sdmcable.optimizer import optimize_launch_power
from sdmcable.photonic import evaluate_gsnr
from sdmcable.rates import awgn_mi, mb_pmf_for_entropy, net_throughput
from sdmcable.study import COLUMNS, load_config, read_table, run_study, validate_config
from sdmcable.units import db_to_linear, linear_to_db

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def cfg(text):
    return validate_config(textwrap.dedent(text))


GSNR_SPAN = """
study_kind: gsnr-vs-span
output: {table_path: out/gsnr.csv}
fiber: {loss_db_per_km: 0.155, gamma_per_w_km: 0.715, dispersion_ps_nm_km: 22}
link: {total_length_km: 6900}
sweep:
  span_length_km: [50, 80, 120, 160]
"""


def close(a, b, rel=1e-9):
    return math.isclose(float(a), float(b), rel_tol=rel, abs_tol=1e-300)


# -- validation ---------------------------------------------------------------


def test_shipped_configs_validate():
    paths = sorted(CONFIG_DIR.glob("*.yaml"))
    assert len(paths) >= 5
    kinds = {load_config(p).study_kind for p in paths}
    assert kinds == {"snr-distribution", "gsnr-vs-span", "span-vs-length", "cable-sweep", "rate-plan"}


def test_quoted_number_with_unit_key_is_accepted():
    c = cfg(GSNR_SPAN.replace("loss_db_per_km: 0.155", 'loss_db_per_km: "0.155"'))
    assert c.fiber.loss_db_per_km == 0.155


def test_key_without_unit_suffix_is_unknown():
    with pytest.raises(ConfigError) as err:
        cfg(GSNR_SPAN.replace("loss_db_per_km", "loss"))
    assert any(p.startswith("fiber.loss: unknown key") for p in err.value.problems)


def test_negative_span_length_is_range_error():
    with pytest.raises(ConfigError) as err:
        cfg(GSNR_SPAN.replace("link: {total_length_km: 6900}", "link: {total_length_km: -6900}"))
    assert any("link.total_length_km" in p and "greater than 0" in p for p in err.value.problems)


def test_empty_sweep_names_the_field():
    with pytest.raises(ConfigError) as err:
        cfg(GSNR_SPAN.replace("[50, 80, 120, 160]", "[]"))
    assert any(p.startswith("sweep.span_length_km") and "empty" in p for p in err.value.problems)


def test_reversed_range_names_the_field():
    text = GSNR_SPAN.replace("[50, 80, 120, 160]", "{start: 200, stop: 50, step: 10}")
    with pytest.raises(ConfigError) as err:
        cfg(text)
    assert any(p.startswith("sweep.span_length_km") and "stop" in p for p in err.value.problems)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigError) as err:
        validate_config("study_kind: gsnr-vs-span\noutput: {table_path: x.csv\nlink: [\n")
    (problem,) = err.value.problems
    assert "syntax error" in problem and "line " in problem and "column " in problem


def test_all_problems_reported_at_once():
    text = """
    study_kind: cable-sweep
    output: {table_path: out.csv}
    cable: {fiber_pairs: 0, span_lenght_km: 84}
    feed: {voltage_kv: -15}
    link: {total_length_km: 100}
    """
    with pytest.raises(ConfigError) as err:
        cfg(text)
    problems = err.value.problems
    assert "sweep: block is required for study_kind 'cable-sweep'" in problems
    assert "link: block is not used by study_kind 'cable-sweep'" in problems
    assert any(p.startswith("cable.fiber_pairs") for p in problems)
    assert any(p.startswith("cable.span_lenght_km: unknown key") for p in problems)
    assert any(p.startswith("feed.voltage_kv") for p in problems)
    assert len(problems) >= 5


def test_unknown_study_kind_and_top_level_key():
    with pytest.raises(ConfigError) as err:
        validate_config("study_kind: fig9\noutput: {table_path: a.csv}\nverbose: true\n")
    problems = err.value.problems
    assert any(p.startswith("study_kind") for p in problems)
    assert "verbose: unknown key" in problems


def test_non_mapping_config():
    with pytest.raises(ConfigError):
        validate_config("- just\n- a list\n")


# -- running ------------------------------------------------------------------


def test_snr_distribution_table_round_trips(tmp_path):
    c = cfg("""
    study_kind: snr-distribution
    output: {table_path: snr.csv}
    distribution: {snr1_db: [5, 10, 15, 20, 25]}
    sweep: {m: {start: 1, stop: 50, step: 1}}
    """)
    report = run_study(c, base_dir=tmp_path)
    rows = read_table(report.table_path.read_text())
    assert len(rows) == 250
    assert list(rows[0]) == list(COLUMNS["snr-distribution"])
    for row in rows:
        exact = required_snr_m(DistributionQuery(float(row["snr1_linear"]), float(row["m"])))
        assert close(row["snr_m_linear"], exact)
        assert close(row["snr1_linear"], db_to_linear(float(row["snr1_db"])))
    at_15_2 = next(r for r in rows if r["snr1_db"] == "15.0" and r["m"] == "2.0")
    assert float(at_15_2["snr_m_db"]) == pytest.approx(6.73, abs=0.01)


def test_gsnr_vs_span_rows_round_trip(tmp_path):
    report = run_study(cfg(GSNR_SPAN), base_dir=tmp_path)
    c = cfg(GSNR_SPAN)
    for row in read_table(report.table_text):
        assert row["status"] == "ok"
        g = c.geometry(float(row["actual_span_km"]), int(row["span_count"]))
        b = evaluate_gsnr(g.with_power(float(row["launch_power_w"])))
        assert close(row["gsnr_linear"], b.gsnr_modified_linear)
        assert close(row["gsnr_db"], linear_to_db(b.gsnr_modified_linear))


def test_span_vs_length_rows_round_trip(tmp_path):
    c = cfg("""
    study_kind: span-vs-length
    output: {table_path: fig.csv}
    link: {backoff_db: 0}
    distribution: {m: 2, baseline_span_km: 50}
    sweep: {total_length_km: [500, 7000]}
    """)
    report = run_study(c, base_dir=tmp_path)
    for row in read_table(report.table_text):
        total = float(row["total_length_km"])
        count = round(total / 50.0)
        base = optimize_launch_power(c.geometry(total / count, count)).operating_gsnr_linear
        assert close(row["baseline_gsnr_db"], linear_to_db(base))
        assert close(row["target_gsnr_db"], linear_to_db(required_snr_m(DistributionQuery(base, 2))))
        g = c.geometry(float(row["span_km"]), float(row["span_count"]))
        b = evaluate_gsnr(g.with_power(float(row["launch_power_w"])))
        assert close(row["achieved_gsnr_db"], linear_to_db(b.gsnr_modified_linear))


def test_cable_sweep_marks_the_selected_design(tmp_path):
    c = load_config(CONFIG_DIR / "cable_sweep_15kv.yaml")
    report = run_study(c, base_dir=tmp_path)
    rows = read_table(report.table_text)
    (selected,) = [r for r in rows if "selected" in r["marker"].split(";")]
    assert (selected["fiber_pairs"], selected["repeater_count"], selected["amplifier_count"]) == ("19", "44", "1672")
    meta = json.loads(report.metadata_path.read_text())
    cal = meta["derived"]["calibration"]
    assert cal["eo_efficiency_min"] < meta["derived"]["feed"]["eo_efficiency"] < cal["eo_efficiency_max"]
    assert meta["config"]["feed"]["voltage_kv"] == 15.0
    assert meta["version"] and meta["wall_time_s"] >= 0

    base = c.geometry()
    for row in rows:
        n_rep = int(row["repeater_count"])
        assert int(row["amplifier_count"]) == 2 * int(row["fiber_pairs"]) * n_rep
        g = base.with_spans(float(row["span_km"]), n_rep)
        b = evaluate_gsnr(g.with_power(float(row["launch_power_w"])))
        assert close(row["per_fiber_gsnr_db"], b.gsnr_db)
        fp = int(row["fiber_pairs"])
        assert close(row["m"], float(Fraction(fp, 12)))
        cap = fp * 2 * 117 * 32e9 * math.log2(1 + b.gsnr_linear) / 1e12
        assert close(row["cable_capacity_tbps"], cap)


def test_rate_plan_rows_round_trip(tmp_path):
    c = cfg("""
    study_kind: rate-plan
    output: {table_path: rates.csv}
    rates: {code_gap_db: 1.0}
    sweep: {snr_db: [-10.0, 6.6, 12.5]}
    """)
    rows = read_table(run_study(c, base_dir=tmp_path).table_text)
    assert rows[0]["achievable"] == "false" and rows[0]["format"] == ""
    for row in rows[1:]:
        h = float(row["entropy_bits"])
        mi = awgn_mi(mb_pmf_for_entropy(row["format"], h), db_to_linear(float(row["snr_db"]) - 1.0))
        assert close(row["mi_bits"], mi)
        rate = Fraction(row["code_rate"]).limit_denominator(10)
        assert close(row["net_throughput_bps"], net_throughput(32e9, Fraction(row["entropy_bits"]), row["format"], rate))
    assert rows[2]["net_throughput_gbps"] == "243.2"


def test_infeasible_points_are_recorded_in_row(tmp_path):
    text = GSNR_SPAN.replace("[50, 80, 120, 160]", "[50, 80]").replace(
        "dispersion_ps_nm_km: 22}", "dispersion_ps_nm_km: 22}\namplifier: {noise_figure_db: 4.5}"
    )
    c = cfg(text.replace("gamma_per_w_km: 0.715", "gamma_per_w_km: 500000"))
    rows = read_table(run_study(c, base_dir=tmp_path, write=False).table_text)
    assert len(rows) == 2
    assert all(r["status"] != "ok" and r["gsnr_db"] == "" for r in rows)


def test_tables_are_byte_identical_across_runs_and_workers(tmp_path):
    c = cfg(GSNR_SPAN)
    first = run_study(c, base_dir=tmp_path / "a").table_path.read_bytes()
    second = run_study(c, base_dir=tmp_path / "b").table_path.read_bytes()
    par = c.model_copy(update={"execution": c.execution.model_copy(update={"workers": 2})})
    third = run_study(par, base_dir=tmp_path / "c").table_path.read_bytes()
    assert first == second == third


# -- command line -------------------------------------------------------------


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_cli_validate_ok_and_invalid(tmp_path, capsys):
    good = write(tmp_path, "good.yaml", GSNR_SPAN)
    assert main(["validate", str(good)]) == 0
    bad = write(tmp_path, "bad.yaml", GSNR_SPAN.replace("loss_db_per_km", "loss"))
    assert main(["validate", str(bad)]) == 1
    assert "fiber.loss: unknown key" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 1


def test_cli_run_writes_outputs(tmp_path):
    p = write(tmp_path, "g.yaml", GSNR_SPAN)
    assert main(["run", str(p), "--relative-to-config"]) == 0
    assert (tmp_path / "out" / "gsnr.csv").exists()
    assert (tmp_path / "out" / "gsnr.meta.json").exists()


def test_cli_anchor_failure_exit_code(tmp_path, capsys):
    p = write(tmp_path, "c.yaml", """
    study_kind: cable-sweep
    output: {table_path: c.csv}
    cable: {fiber_pairs: 12, span_length_km: 84, total_length_km: 6611}
    feed: {voltage_kv: 15}
    calibration: {boundary_fiber_pairs: 19}
    sweep: {fiber_pairs: [12, 13, 14]}
    """)
    assert main(["run", str(p), "--relative-to-config"]) == 2
    assert "calibration failed" in capsys.readouterr().err
    assert main(["calibrate-feed", str(p)]) == 2


def test_cli_calibrate_feed_prints_constants(capsys):
    assert main(["calibrate-feed", str(CONFIG_DIR / "cable_sweep_15kv.yaml")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["boundary_fiber_pairs"] == 19
    assert out["eo_efficiency_min"] < out["eo_efficiency"] < out["eo_efficiency_max"]
    assert out["cable_resistance_ohm_per_km"] == 1.0 and out["control_fraction"] == 0.1


def test_cli_calibrate_feed_needs_calibration_block(capsys):
    assert main(["calibrate-feed", str(CONFIG_DIR / "rate_plan.yaml")]) == 1
