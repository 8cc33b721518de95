from __future__ import annotations

import csv
import json

import pytest

from pseudo2d.cli import main


@pytest.fixture
def layout_file(tmp_path):
    path = tmp_path / "layout.json"
    assert main(["layout", "--d", "3", "--n", "2", "--out", str(path)]) == 0
    return path


def test_layout_summary(capsys):
    assert main(["layout", "--d", "15", "--n", "1"]) == 0
    out = capsys.readouterr().out
    assert "M                             29" in out
    assert "max_airbridges_per_resonator  14" in out


def test_layout_invalid_distance(capsys):
    assert main(["layout", "--d", "2", "--n", "1"]) == 2
    assert "odd" in capsys.readouterr().err


def test_layout_svg(tmp_path):
    svg = tmp_path / "out.svg"
    assert main(["layout", "--d", "3", "--n", "2", "--svg", str(svg)]) == 0
    assert svg.read_text().count('class="qubit') == 55


def test_freqalloc_and_check(tmp_path, layout_file, capsys):
    plan = tmp_path / "plan.json"
    assert main(["freqalloc", "--layout", str(layout_file), "--out", str(plan)]) == 0
    data = json.loads(plan.read_text())
    assert data["band"] == [7.0e9, 10.2e9] and data["delta_min"] == 10e6
    capsys.readouterr()
    assert main(["freqalloc", "--layout", str(layout_file), "--check", str(plan)]) == 0
    assert "0 violations" in capsys.readouterr().out


def test_freqalloc_check_reports_violations(tmp_path, layout_file, capsys):
    plan = tmp_path / "plan.json"
    main(["freqalloc", "--layout", str(layout_file), "--out", str(plan)])
    data = json.loads(plan.read_text())
    data["assignment"] = {k: 7.0e9 for k in data["assignment"]}
    plan.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["freqalloc", "--layout", str(layout_file), "--check", str(plan)]) == 3
    assert "violations" in capsys.readouterr().out


def test_freqalloc_infeasible(layout_file, capsys):
    code = main(["freqalloc", "--layout", str(layout_file), "--band-min-hz", "7e9", "--band-max-hz", "7.01e9"])
    assert code == 3
    assert "infeasible" in capsys.readouterr().err


def test_config_file_overrides_defaults(tmp_path, layout_file):
    cfg = tmp_path / "cfg.json"
    plan = tmp_path / "plan.json"
    cfg.write_text(json.dumps({"layout": str(layout_file), "band_min_hz": 8e9, "out": str(plan)}))
    assert main(["--config", str(cfg), "freqalloc"]) == 0
    assert json.loads(plan.read_text())["band"][0] == 8e9


def test_config_unknown_key_rejected(tmp_path, layout_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"layout": str(layout_file), "band_width": 1}))
    assert main(["--config", str(cfg), "freqalloc"]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_outputs_are_idempotent(tmp_path, layout_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["freqalloc", "--layout", str(layout_file), "--out", str(a)])
    main(["freqalloc", "--layout", str(layout_file), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_fitres_round_trip(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["synth-trace", "--out", str(trace), "--seed", "5"]) == 0
    assert "seed: 5" in capsys.readouterr().err
    out = tmp_path / "fit.json"
    assert main(["fitres", "--trace", str(trace), "--power-dbm", "-140", "--out", str(out)]) == 0
    fit = json.loads(out.read_text())
    assert fit["Q_i"] == pytest.approx(2.3e4, rel=1e-3)
    assert fit["avg_photon_number"] > 0
    for key in ("f_r", "Q_l", "Q_c_mag", "phi", "Q_i", "tau", "a", "alpha", "residual"):
        assert key in fit


def test_fitres_malformed_row(tmp_path, capsys):
    trace = tmp_path / "bad.csv"
    trace.write_text("frequency_hz,s21_re,s21_im\n1e9,1,0\n2e9,oops,0\n")
    assert main(["fitres", "--trace", str(trace)]) == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_fitres_flat_trace_is_numerical_failure(tmp_path):
    trace = tmp_path / "flat.csv"
    rows = ["frequency_hz,s21_re,s21_im"] + [f"{1e9 + 1e3 * k},1,0" for k in range(50)]
    trace.write_text("\n".join(rows) + "\n")
    assert main(["fitres", "--trace", str(trace)]) == 4


def test_crosstalk_command(tmp_path, capsys):
    trace = tmp_path / "dip.csv"
    main(["synth-trace", "--kind", "dip", "--f-r-hz", "8.6645e9", "--out", str(trace)])
    capsys.readouterr()
    assert main(["crosstalk", "--trace", str(trace)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["max_db"] == pytest.approx(-49.0, abs=0.2)
    assert res["f_at_max"] == pytest.approx(8.6645e9)


def test_czsweep_single_point(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["czsweep", "--q", "1e6", "--t-gate-s", "2.281e-8", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["q_factor", "kappa_rad_s", "infidelity_raw", "infidelity_corrected", "theta1", "theta2"]
    assert len(rows) == 2
    assert float(rows[1][3]) < 2e-3
    assert "crosses" in capsys.readouterr().out


def test_czsweep_inconsistent_kappa(capsys):
    assert main(["czsweep", "--q", "1e3", "--kappa-per-s", "1.0"]) == 2
    assert "inconsistent" in capsys.readouterr().err


def test_czsweep_params_file(tmp_path):
    params = tmp_path / "dev.json"
    params.write_text(json.dumps({
        "omega_r_hz": 6e9, "omega01_hz": [5.6e9, 5.8e9], "eta_hz": [-2e8, -2e8], "g_hz": [8.12e7, 8.12e7],
        "typo_hz": 1,
    }))
    assert main(["czsweep", "--params", str(params), "--q", "1e6"]) == 2
