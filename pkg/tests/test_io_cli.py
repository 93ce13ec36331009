import hashlib
import io
import json
import math

import numpy as np
import pytest

from madelung_thermo import InsufficientData, UnknownFigureTag, ground_state, sweep
from madelung_thermo.cli import read_config_file, resolve_config, run
from madelung_thermo.io import (
    PROFILE_COLUMNS,
    TABLE_COLUMNS,
    ProfileRef,
    emit_plot_script,
    read_profile_csv,
    read_state_table_csv,
    write_profile_csv,
    write_state_table_csv,
)
from madelung_thermo.sweep import StateRow, StateTable


def run_cli(*argv):
    out = io.StringIO()
    code = run(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def small_table():
    return sweep([0.5, 1.0, 2.0], [1.0, 2.0])


class TestProfileCSV:
    def test_round_trip(self, tmp_path, sol11, state11):
        path = tmp_path / "p.csv"
        write_profile_csv(sol11, state11.Z, path)
        text = path.read_text()
        assert text.splitlines()[0] == "r,U,dU,Y,rho,omega"
        assert text.endswith("\n") and "\r" not in text
        data = read_profile_csv(path)
        assert tuple(data) == PROFILE_COLUMNS
        assert np.array_equal(data["r"], sol11.grid)
        assert np.array_equal(data["U"], sol11.U)
        assert np.array_equal(data["Y"], sol11.Y)

    def test_first_row(self, tmp_path, sol11, state11):
        path = tmp_path / "p.csv"
        write_profile_csv(sol11, state11.Z, path)
        d = read_profile_csv(path)
        assert d["r"][0] == sol11.r_eps
        assert d["U"][0] == pytest.approx(1.0, abs=1e-3)
        assert d["omega"][0] == pytest.approx(math.sqrt(2.0), rel=1e-3)
        assert d["rho"][0] == pytest.approx(math.exp(-d["U"][0]) / state11.Z, rel=1e-14)

    def test_write_failure_names_path(self, tmp_path, sol11, state11):
        bad = tmp_path / "missing" / "p.csv"
        with pytest.raises(OSError, match="missing"):
            write_profile_csv(sol11, state11.Z, bad)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_profile_csv(p)


class TestTableCSV:
    def test_round_trip(self, tmp_path, small_table):
        rows = small_table.rows + (StateRow.failed(9.0, 9.0, "MaxStepsExceeded"),)
        table = StateTable(rows)
        path = tmp_path / "t.csv"
        write_state_table_csv(table, path)
        assert path.read_text().splitlines()[0] == ",".join(TABLE_COLUMNS)
        back = read_state_table_csv(path)
        for a, b in zip(table.rows, back.rows):
            for c in TABLE_COLUMNS:
                va, vb = getattr(a, c), getattr(b, c)
                assert va == vb or (isinstance(va, float) and math.isnan(va) and math.isnan(vb))

    def test_generic_reader(self, tmp_path, small_table):
        import csv
        path = tmp_path / "t.csv"
        write_state_table_csv(small_table, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["Ubar"]) for r in rows] == [r.Ubar for r in small_table.rows]


class TestPlotScripts:
    def test_fig1_curves(self, tmp_path):
        refs = [ProfileRef(f"p{T}.csv", T, 1.0) for T in (0.05, 0.2, 1.0)]
        path = emit_plot_script(refs, "fig1", tmp_path / "f1.gp", ground=ground_state(1.0))
        text = path.read_text()
        density_curves = text.count("using 1:5") + text.count("rho0(x) with")
        assert density_curves == 4
        assert "besj0" in text

    def test_fig2_needs_two_T(self, tmp_path):
        table = sweep([1.0], [1.0, 2.0])
        with pytest.raises(InsufficientData):
            emit_plot_script(table, "fig2", tmp_path / "f.gp", data_path="t.csv")

    def test_unknown_tag(self, tmp_path, small_table):
        with pytest.raises(UnknownFigureTag):
            emit_plot_script(small_table, "fig4", tmp_path / "f.gp", data_path="t.csv")

    @pytest.mark.parametrize("tag,series", [("fig2", 2), ("fig3", 3), ("fig5", 3), ("fig7", 2)])
    def test_table_figures(self, tmp_path, small_table, tag, series):
        text = emit_plot_script(small_table, tag, tmp_path / "f.gp", data_path="t.csv").read_text()
        assert text.count("'t.csv'") == series
        if tag in ("fig2", "fig3", "fig5"):
            assert "set logscale xy" in text


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\nT = 2\nX = 3\nrtol = 1e-9\n")
        rc = resolve_config("solve", {"T": "1"}, read_config_file(cfg), environ={})
        assert (rc.T, rc.X, rc.rtol, rc.atol) == (1.0, 3.0, 1e-9, 1e-12)

    def test_dash_keys(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("tail-depth = 12\n")
        rc = resolve_config("solve", {"T": "1", "X": "1"}, read_config_file(cfg), environ={})
        assert rc.tail_depth == 12.0

    def test_env_output_dir(self):
        rc = resolve_config("solve", {"T": "1", "X": "1"}, environ={"MADELUNG_OUTPUT_DIR": "/x"})
        assert str(rc.output_path("a.csv")) == "/x/a.csv"
        rc = resolve_config("solve", {"T": "1", "X": "1", "out_dir": "/y"},
                            environ={"MADELUNG_OUTPUT_DIR": "/x"})
        assert str(rc.output_path("a.csv")) == "/y/a.csv"


class TestCLI:
    def test_solve_writes_profile(self, tmp_path):
        path = tmp_path / "profile.csv"
        code, out = run_cli("solve", "--T", "1", "--X", "1", "--profile-out", str(path))
        assert code == 0 and path.exists()
        assert "r_m = 1.34753" in out

    def test_negative_T(self, capsys):
        code, _ = run_cli("solve", "--T", "-1", "--X", "1")
        assert code == 1
        assert "T must be" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ("solve", "--T", "1"),
        ("solve", "--T", "1", "--X", "1", "--bogus", "2"),
        ("solve", "--T", "abc", "--X", "1"),
        ("frobnicate",),
        ("fit", "--axis", "Z", "--fixed", "1"),
    ])
    def test_validation_exit_1(self, argv):
        assert run_cli(*argv)[0] == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("T = 1\nX = 1\ncolour = red\n")
        assert run_cli("solve", "--config", str(cfg))[0] == 1

    def test_numerical_failure_exit_2(self):
        assert run_cli("solve", "--T", "1", "--X", "1", "--max-steps", "3")[0] == 2

    def test_verify(self):
        code, out = run_cli("verify", "--T", "1", "--X", "1")
        assert code == 0
        assert any(l.startswith("PASS kinetic_identity") for l in out.splitlines())

    def test_verify_json(self):
        code, out = run_cli("verify", "--T", "0.5", "--X", "2", "--format", "json")
        assert code == 0
        assert all(c["pass"] for c in json.loads(out))

    def test_sweep_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert run_cli("sweep", "--T-values", "0.5,1", "--X-values", "1,2", "--table-out", str(p))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        code, out = run_cli("sweep", "--T-values", "0.5,1", "--X-values", "1,2")
        assert out.encode() == a.read_bytes()

    def test_sweep_plot_script(self, tmp_path):
        code, _ = run_cli("sweep", "--T-values", "0.5,1", "--X-values", "1", "--table-out",
                          str(tmp_path / "t.csv"), "--plot-script", str(tmp_path / "f.gp"), "--figure", "fig7")
        assert code == 0 and (tmp_path / "f.gp").exists()

    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MADELUNG_OUTPUT_DIR", str(tmp_path / "out"))
        assert run_cli("solve", "--T", "1", "--X", "1", "--profile-out", "p.csv")[0] == 0
        assert (tmp_path / "out" / "p.csv").exists()

    def test_fit_does_not_touch_input(self, tmp_path):
        table = tmp_path / "t.csv"
        run_cli("sweep", "--T-values", "10,20,40,70,100", "--X-values", "1", "--table-out", str(table))
        digest = hashlib.sha256(table.read_bytes()).hexdigest()
        mtime = table.stat().st_mtime_ns
        code, out = run_cli("fit", "--table", str(table), "--axis", "T", "--fixed", "1")
        assert code == 0 and "exponent=" in out
        assert hashlib.sha256(table.read_bytes()).hexdigest() == digest
        assert table.stat().st_mtime_ns == mtime

    def test_fit_insufficient(self):
        assert run_cli("fit", "--axis", "T", "--fixed", "1", "--T-values", "10,20")[0] == 2

    def test_limits(self, tmp_path):
        code, out = run_cli("limits", "--T-values", "0.2,0.1", "--large-T-values", "1,10",
                            "--profile-dir", str(tmp_path), "--plot-script", str(tmp_path / "f1.gp"))
        assert code == 0
        assert "large_T_trends_ok = True" in out
        assert (tmp_path / "f1.gp").exists() and (tmp_path / "profile_T0.2.csv").exists()

    def test_tensions(self):
        code, out = run_cli("tensions", "--T", "1", "--X", "1", "--format", "json")
        rep = json.loads(out)
        assert code == 0
        assert rep["drm_dX"] < 0 and rep["drm_dT"] < 0
        assert rep["first_law_X"] < 1e-6

    def test_help(self, capsys):
        assert run_cli("solve", "--help")[0] == 0
