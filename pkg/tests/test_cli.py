import csv
import json

import pytest

from cfgrid.cli import run
from cfgrid.errors import ColumnNotFound, EmptyData
from cfgrid.plot import PlotSpec, render_plot

from conftest import TABLE_I


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_powerflow_coefficients(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["powerflow", "wscc9", "--coeffs", str(out), "--out", str(tmp_path / "v.csv")]) == 0
    rows = read_csv(out)
    assert rows[0] == ["bus", "kind", "counterpart", "re", "im"]
    got = {(r[0], r[1], r[2]): complex(float(r[3]), float(r[4])) for r in rows[1:]}
    assert abs(got[("1", "c_eta", "4")] - TABLE_I["1"][0]["4"]) < 0.015
    assert got[("4", "c_xi", "4")] == 0


def test_simulate_analyze_plot(tmp_path):
    traj, dec, rep = tmp_path / "t.csv", tmp_path / "d.csv", tmp_path / "r.txt"
    assert run(["simulate", "wscc9", "--tstop", "0.2", "--dt", "0.01", "--out", str(traj)]) == 0
    head = read_csv(traj)[0]
    assert head[:3] == ["t", "v_mag:1", "v_mag:2"]
    assert run(["analyze", "wscc9", "--traj", str(traj), "--bus", "5", "--bus", "8",
                "--out", str(dec), "--report", str(rep)]) == 0
    rows = read_csv(dec)
    assert rows[0] == ["time", "bus", "kind", "counterpart", "coef_re", "coef_im", "cf_re", "cf_im"]
    assert {r[1] for r in rows[1:]} == {"5", "8"}
    assert "max reconstruction error" in rep.read_text()
    svg = tmp_path / "p.svg"
    assert run(["plot", str(dec), "--columns", "coef_re", "--x", "time", "--where", "bus=5",
                "--where", "kind=c_eta", "--group", "counterpart", "--out", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 2


def test_stdout_output(capsys):
    assert run(["simulate", "wscc9", "--tstop", "0.02", "--dt", "0.01"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("t,v_mag:1") and len(lines) == 4


def test_missing_file_exit_code(tmp_path, capsys):
    assert run(["powerflow", str(tmp_path / "nope.json")]) == 3
    assert error_of(capsys)["exit"] == 3


def test_usage_exit_code(capsys):
    assert run(["simulate", "wscc9"]) == 2
    assert error_of(capsys)["error"] == "usage"
    assert run(["frobnicate"]) == 2
    assert run(["simulate", "wscc9", "--tstop", "1", "--dt", "-1"]) == 2


def test_solver_exit_code(capsys):
    assert run(["--max-iter", "1", "powerflow", "wscc9"]) == 4
    assert error_of(capsys)["error"] == "NonConvergence"


def test_bad_plot_column(tmp_path, capsys):
    p = tmp_path / "a.csv"
    p.write_text("t,x\n0,1\n1,2\n")
    assert run(["plot", str(p), "--columns", "y", "--out", str(tmp_path / "o.svg")]) == 3


def test_render_plot_two_columns(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t,x,y\n0,1,2\n1,2,1\n2,nan,0\n")
    svg = render_plot(PlotSpec(str(p), ["x", "y"], str(tmp_path / "o.svg"), title="a < b"))
    assert svg.count("<polyline") == 2
    assert "a &lt; b" in svg
    again = render_plot(PlotSpec(str(p), ["x", "y"], str(tmp_path / "o2.svg"), title="a < b"))
    assert again == svg


def test_render_plot_patterns(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t,v:1,v:2,w\n0,1,2,3\n1,2,1,3\n")
    svg = render_plot(PlotSpec(str(p), ["v:*"], str(tmp_path / "o.svg")))
    assert svg.count("<polyline") == 2


def test_render_plot_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t,x\n")
    with pytest.raises(EmptyData):
        render_plot(PlotSpec(str(p), ["x"], str(tmp_path / "o.svg")))
    with pytest.raises(ColumnNotFound):
        render_plot(PlotSpec(str(p), ["zz"], str(tmp_path / "o.svg")))
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(EmptyData):
        render_plot(PlotSpec(str(empty), ["x"], str(tmp_path / "o.svg")))
