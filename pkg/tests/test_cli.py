"""End-to-end command-line checks: exit codes, reports, determinism."""

import os

import pytest

from cheegerkit.cli import main
from cheegerkit.oracle import load_mask
from cheegerkit.report import read_report


def _values(captured: str) -> dict:
    """Parse captured report text into a {key: string} dict."""
    vals = {}
    for raw in captured.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if sep:
            vals[key.strip()] = val.strip()
    return vals


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage error" in capsys.readouterr().err


def test_tube_command_closed_forms(capsys):
    code = main(["tube", "--a", "0.4", "--rho", "2.0", "--d", "3"])
    vals = _values(capsys.readouterr().out)
    assert code == 0
    assert vals["schema"] == "tube"
    assert vals["geom_kind"] == "tube"
    assert vals["overlap_verdict"] == "CertifiedSufficient"
    assert float(vals["cheeger_h"]) == 5.0
    assert float(vals["tube_volume"]) == pytest.approx(
        2 * 3.141592653589793**2 * 2.0 * 0.4**2, rel=1e-9
    )


def test_tube_requires_radius(capsys):
    assert main(["tube", "--rho", "2.0"]) == 1
    assert "--a" in capsys.readouterr().err


def test_tube_overlap_is_computation_error(capsys):
    code = main(["tube", "--a", "1.5", "--rho", "1.0", "--d", "3"])
    captured = capsys.readouterr()
    assert code == 2
    vals = _values(captured.out)
    assert vals["overlap_verdict"] == "OverlapDetected"
    assert "cheeger_h" not in vals
    assert "overlap" in captured.err


def test_shell_command_closed_forms(capsys):
    code = main(["shell", "--r", "1.0", "--R", "2.0", "--d", "3"])
    vals = _values(capsys.readouterr().out)
    assert code == 0
    assert vals["schema"] == "shell"
    assert float(vals["cheeger_h"]) == pytest.approx(15.0 / 7.0, rel=1e-15)
    assert float(vals["profile_inner_boundary"]) == pytest.approx(-1.0, abs=1e-12)
    assert float(vals["profile_outer_boundary"]) == pytest.approx(1.0, abs=1e-12)


def test_shell_invalid_geometry_is_computation_error(capsys):
    assert main(["shell", "--r", "2.0", "--R", "1.0"]) == 2
    assert capsys.readouterr().err


def test_certify_shell_certified(capsys):
    code = main(
        ["certify", "--domain", "shell", "--r", "1.0", "--R", "2.0",
         "--d", "3", "--n", "2000"]
    )
    vals = _values(capsys.readouterr().out)
    assert code == 0
    assert vals["schema"] == "certificate"
    assert vals["verdict"] == "Certified"
    assert float(vals["claimed_c"]) == pytest.approx(15.0 / 7.0, rel=1e-15)
    assert float(vals["max_norm"]) <= 1.0 + 1e-9
    assert vals["n_violations"] == "0"


def test_certify_overclaim_exits_3(capsys):
    code = main(
        ["certify", "--domain", "shell", "--r", "1.0", "--R", "2.0",
         "--d", "3", "--n", "2000", "--claimed-c", "3.0"]
    )
    vals = _values(capsys.readouterr().out)
    assert code == 3
    assert vals["verdict"] == "Violated"
    assert int(vals["n_violations"]) > 0


def test_certify_unknown_sampler_is_usage_error(capsys):
    code = main(
        ["certify", "--domain", "shell", "--r", "1.0", "--R", "2.0",
         "--n", "2000", "--sampler", "sobol"]
    )
    assert code == 1
    assert "sampler" in capsys.readouterr().err


def test_certify_unknown_domain_is_usage_error(capsys):
    assert main(["certify", "--domain", "cube", "--n", "2000"]) == 1
    assert "cube" in capsys.readouterr().err


def test_stdout_is_deterministic_and_matches_out_file(tmp_path, capsys):
    out = tmp_path / "tube.txt"
    args = ["tube", "--a", "0.4", "--rho", "2.0", "--d", "3", "--out", str(out)]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert out.read_text() == first
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert "timing" not in first


def test_timings_flag_appends_timing_key(capsys):
    assert main(["shell", "--r", "1.0", "--R", "2.0", "--timings"]) == 0
    assert "timing_total_s" in _values(capsys.readouterr().out)


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tube run\na = 0.4\nrho = 2.0\nd = 3\n")
    assert main(["tube", "--config", str(cfg)]) == 0
    vals = _values(capsys.readouterr().out)
    assert float(vals["cheeger_h"]) == 5.0


def test_explicit_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("a = 0.4\nrho = 2.0\nd = 3\n")
    assert main(["tube", "--config", str(cfg), "--a", "0.2"]) == 0
    vals = _values(capsys.readouterr().out)
    assert float(vals["geom_a"]) == 0.2
    assert float(vals["cheeger_h"]) == pytest.approx(10.0, rel=1e-12)


def test_unknown_config_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("a = 0.4\nwavelength = 3\n")
    assert main(["tube", "--config", str(cfg)]) == 1
    assert "wavelength" in capsys.readouterr().err


def test_missing_config_file_is_usage_error(tmp_path, capsys):
    assert main(["tube", "--a", "0.4", "--config", str(tmp_path / "no.cfg")]) == 1


def test_outdir_env_resolves_relative_paths(tmp_path, capsys, monkeypatch):
    outdir = tmp_path / "results"
    monkeypatch.setenv("CHEEGERKIT_OUTDIR", str(outdir))
    assert main(["shell", "--r", "1.0", "--R", "2.0", "--out", "shell.txt"]) == 0
    capsys.readouterr()
    assert (outdir / "shell.txt").is_file()
    data = read_report(outdir / "shell.txt")
    assert data.schema == "shell"


def test_oracle_disk_with_artifacts(tmp_path, capsys):
    svg = tmp_path / "cut.svg"
    mask = tmp_path / "cut.mask"
    code = main(
        ["oracle", "--shape", "disk", "--radius", "1.0", "--n", "64",
         "--svg", str(svg), "--mask", str(mask)]
    )
    vals = _values(capsys.readouterr().out)
    assert code == 0
    assert vals["schema"] == "oracle"
    assert float(vals["h"]) == pytest.approx(2.0, rel=0.05)
    assert int(vals["n_iter"]) == len(
        [k for k in vals if k.startswith("trace_")]
    )
    assert svg.read_text().startswith("<svg")
    members, delta, origin = load_mask(mask)
    assert members.sum() == int(vals["subset_cells"])
    assert delta == float(vals["delta"])


def test_oracle_unknown_shape_is_usage_error(capsys):
    assert main(["oracle", "--shape", "pentagon"]) == 1
    assert "pentagon" in capsys.readouterr().err


def test_report_joins_certificate_and_oracle(tmp_path, capsys):
    closed = tmp_path / "shell.txt"
    cert = tmp_path / "cert.txt"
    orc = tmp_path / "oracle.txt"
    base = ["--r", "1.0", "--R", "2.0", "--d", "2"]
    assert main(["shell", *base, "--out", str(closed)]) == 0
    assert main(
        ["certify", "--domain", "shell", *base, "--n", "2000", "--out", str(cert)]
    ) == 0
    assert main(
        ["oracle", "--shape", "annulus", *base, "--n", "64", "--out", str(orc)]
    ) == 0
    capsys.readouterr()

    code = main(
        ["report", "--closed-form", str(closed), "--certificate", str(cert),
         "--oracle", str(orc)]
    )
    vals = _values(capsys.readouterr().out)
    assert code == 0
    assert vals["schema"] == "comparison"
    assert float(vals["closed_form_h"]) == 2.0
    assert vals["certificate_verdict"] == "Certified"
    assert float(vals["oracle_h"]) == pytest.approx(2.0, rel=0.10)
    assert float(vals["oracle_relative_deviation"]) < 0.10


def test_report_refuses_geometry_mismatch(tmp_path, capsys):
    closed = tmp_path / "shell.txt"
    cert = tmp_path / "cert.txt"
    assert main(
        ["shell", "--r", "1.0", "--R", "2.0", "--d", "3", "--out", str(closed)]
    ) == 0
    assert main(
        ["certify", "--domain", "shell", "--r", "1.1", "--R", "2.0", "--d", "3",
         "--n", "2000", "--out", str(cert)]
    ) == 0
    capsys.readouterr()
    code = main(["report", "--closed-form", str(closed), "--certificate", str(cert)])
    captured = capsys.readouterr()
    assert code == 1
    assert "geometry mismatch" in captured.err


def test_report_needs_something_to_compare(tmp_path, capsys):
    closed = tmp_path / "shell.txt"
    assert main(["shell", "--r", "1.0", "--R", "2.0", "--out", str(closed)]) == 0
    capsys.readouterr()
    assert main(["report", "--closed-form", str(closed)]) == 1


def test_report_rejects_wrong_schema(tmp_path, capsys):
    cert = tmp_path / "cert.txt"
    assert main(
        ["certify", "--domain", "shell", "--r", "1.0", "--R", "2.0",
         "--n", "2000", "--out", str(cert)]
    ) == 0
    capsys.readouterr()
    code = main(["report", "--closed-form", str(cert), "--certificate", str(cert)])
    assert code == 1
    assert "schema" in capsys.readouterr().err
