import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from ctrw_fdd.cli import main
from ctrw_fdd.errors import ConfigError
from ctrw_fdd.io import GridAxis, RunConfig, load_config, read_table, write_table


def g_half(t, u=1.0):
    return u / (2 * math.sqrt(math.pi)) * t ** -1.5 * math.exp(-u * u / (4 * t))


def run_cli(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "-o", str(out)])
    return code, out


# -- configuration -------------------------------------------------------------------

def test_defaults_from_empty_file(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{}")
    cfg = load_config(f, command="density")
    assert cfg.tol_rel == 1e-5 and cfg.format == "csv" and cfg.seed == 20261016


def test_flags_override_file(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"command": "density", "beta": 0.3, "seed": 5}))
    cfg = load_config(f, beta=0.7)
    assert cfg.beta == 0.7 and cfg.seed == 5


def test_times_must_increase():
    with pytest.raises(ConfigError, match="times must be strictly increasing"):
        load_config(None, command="density", times="2,1")


def test_unknown_key_lists_valid_keys(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"command": "density", "bogus": 1}))
    with pytest.raises(ConfigError, match="valid keys: command, model, beta"):
        load_config(f)


@pytest.mark.parametrize("bad,field", [({"grid": ["t:0:1:1"]}, "grid"), ({"paths": 0}, "paths"),
                                       ({"beta": 1.5}, "beta"), ({"format": "xml"}, "format")])
def test_invariant_violation_names_field(bad, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig("density", **bad)


def test_config_round_trip(tmp_path):
    cfg = load_config(None, command="joint2", times="1,2", grid=["x:0:5:11", "y:0:7:15"], beta=0.4)
    f = tmp_path / "c.json"
    f.write_text(json.dumps(cfg.to_dict()))
    assert load_config(f).to_dict() == cfg.to_dict()


def test_grid_axis_parse():
    ax = GridAxis.parse("t:0:10:200")
    assert (ax.name, ax.min, ax.max, ax.points) == ("t", 0.0, 10.0, 200)
    with pytest.raises(ConfigError):
        GridAxis.parse("t:0:10")


# -- tables ------------------------------------------------------------------------------

def test_empty_table_has_header_and_metadata(tmp_path):
    p = tmp_path / "e.csv"
    write_table([], ("a", "b"), {"seed": 3}, "csv", p)
    lines = p.read_text().splitlines()
    assert lines[-1] == "a,b" and all(ln.startswith("#") for ln in lines[:-1])
    meta, cols, rows = read_table(p)
    assert meta["seed"] == 3 and "version" in meta and rows == []


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_round_trip_bit_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "t.csv"
    write_table([(v,) for v in values], ("v",), {"seed": 0}, "csv", p)
    _, _, rows = read_table(p)
    assert [float(r[0]) for r in rows] == values


def test_json_table(tmp_path):
    p = tmp_path / "t.json"
    write_table([(1, 0.1), (2, 1 / 3)], ("i", "v"), {"seed": 1}, "json", p)
    doc = json.loads(p.read_text())
    assert set(doc) == {"meta", "columns", "rows"} and doc["rows"][1][1] == 1 / 3
    assert doc["meta"]["seed"] == 1 and "version" in doc["meta"]


# -- commands -----------------------------------------------------------------------------

def test_density_command(tmp_path):
    code, out = run_cli(tmp_path, "density", "--beta", "0.5", "--times", "1", "--grid", "t:0:10:200")
    assert code == 0
    meta, cols, rows = read_table(out)
    assert len(rows) == 200 and cols == ["t", "u", "density"]
    for t, u, g in rows[1:]:
        assert g == pytest.approx(g_half(t), rel=1e-8)
    assert meta["seed"] == 20261016 and meta["config"]["grid"] == ["t:0.0:10.0:200"]


def test_density_at_one():
    from ctrw_fdd.stable_core import StableParams, stable_pdf
    assert stable_pdf(StableParams(0.5), 1.0) == pytest.approx(0.219696, abs=5e-7)


def test_output_reproduces_config(tmp_path):
    code, out = run_cli(tmp_path, "inverse-density", "--beta", "0.3", "--times", "0.5,2", "--grid", "x:0.1:3:7")
    meta, _, rows = read_table(out)
    again = RunConfig(**meta["config"])
    assert again.to_dict() == meta["config"] and len(rows) == 14


def test_joint2_mass(tmp_path):
    code, out = run_cli(tmp_path, "joint2", "--beta", "0.5", "--times", "1,2", "--grid", "x:0:30:61",
                        "--grid", "y:0:30:61")
    assert code == 0
    meta, cols, rows = read_table(out)
    total = sum(r[cols.index("mass")] for r in rows)
    assert abs(total - 1) < 1e-3
    diag = sum(r[cols.index("mass")] for r in rows if r[0] == "diagonal")
    assert diag == pytest.approx(0.5, abs=1e-6)
    assert meta["total_mass"] == pytest.approx(total, abs=1e-12)


def test_kernel_p_atom_and_mass(tmp_path):
    code, out = run_cli(tmp_path, "kernel-p", "--model", "example1", "--times", "1", "--start", "0.5,1",
                        "--grid", "v:0:1:4", "--grid", "x:0.5:3:4")
    meta, cols, rows = read_table(out)
    assert cols == ["kind", "x", "v", "value"]
    atom = [r for r in rows if r[0] == "atom"]
    assert atom == [["atom", 0.5, 2.0, pytest.approx(2 ** -0.5)]]
    assert abs(meta["total_mass"] - 1) < 1e-3
    assert meta["truncated_mass"] == pytest.approx(meta["total_mass"] - meta["grid_mass"])


def test_kernel_q_and_joint_xyvr(tmp_path):
    code, out = run_cli(tmp_path, "kernel-q", "--model", "example2", "--times", "1", "--start", "0,0.3",
                        "--grid", "r:0.1:2:5")
    assert code == 0 and len(read_table(out)[2]) == 5
    code, out = run_cli(tmp_path, "joint-xyvr", "--model", "example2", "--times", "1", "--grid", "v:0.1:0.9:3",
                        "--grid", "r:0.1:2:3", name="j.csv")
    meta, cols, rows = read_table(out)
    assert code == 0 and len(rows) == 9
    for _, x, y, v, r, _d in rows:
        assert x == pytest.approx(1 - v) and y == pytest.approx(1 + r)


def test_simulate_is_seeded(tmp_path):
    a = run_cli(tmp_path, "simulate", "--times", "0.5,1", "--paths", "50", "--seed", "4", name="a.csv")[1]
    b = run_cli(tmp_path, "simulate", "--times", "0.5,1", "--paths", "50", "--seed", "4", name="b.csv")[1]
    meta, cols, rows = read_table(a)
    assert read_table(b)[2] == rows
    assert meta["seed"] == 4 and len(rows) == 100
    c = run_cli(tmp_path, "simulate", "--model", "example2", "--times", "1", "--paths", "20", "--scale", "100",
                name="c.csv")[1]
    for _, t, x, y in read_table(c)[2]:
        assert x < t < y


def test_json_output(tmp_path):
    code, out = run_cli(tmp_path, "density", "--times", "1", "--grid", "t:1:2:3", "--format", "json",
                        name="d.json")
    doc = json.loads(out.read_text())
    assert doc["columns"] == ["t", "u", "density"] and doc["rows"][0][2] == pytest.approx(0.219696, abs=5e-7)


# -- exit codes ----------------------------------------------------------------------------

def test_validation_exit_code(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "density", "--times", "2,1", "--grid", "t:0:1:3")
    assert code == 1 and "times must be strictly increasing" in capsys.readouterr().err


def test_component_error_names_module(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "kernel-p", "--model", "pure-drift", "--times", "1")
    assert code == 1 and "ctrw_fdd.fdd.kernels" in capsys.readouterr().err


def test_missing_grid_axis(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "kernel-p", "--times", "1", "--grid", "v:0:1:3")
    assert code == 1 and "missing x" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    from ctrw_fdd import cli
    from ctrw_fdd.errors import IntegrationError

    def boom(cfg):
        raise IntegrationError("did not converge")
    monkeypatch.setitem(cli.HANDLERS, "density", boom)
    code, _ = run_cli(tmp_path, "density", "--grid", "t:0:1:3")
    assert code == 2


def test_workers_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("CTRW_FDD_WORKERS", "2")
    code, out = run_cli(tmp_path, "density", "--grid", "t:0:1:3", "--workers", "1")
    assert read_table(out)[0]["config"]["workers"] == 2


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from ctrw_fdd import checks

    def failing(cfg):
        r = checks.CheckResult("CX", "always fails")
        r.add("x", 1.0, 0.0, 0.5)
        return r
    monkeypatch.setattr(checks, "ALL_CHECKS", (failing,))
    code, out = run_cli(tmp_path, "verify", "--quick")
    assert code == 3
    meta, cols, rows = read_table(out)
    assert rows[0][-1] is False and meta["checks"] == {"CX": False}
