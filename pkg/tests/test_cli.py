import json
import subprocess
import sys

import pytest

from grnswitch import cli
from grnswitch.errors import NumericalError
from grnswitch.recipes import CRITERION_RECIPES, RECIPES
from grnswitch.tables import read_csv


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_reproduce_list(capsys):
    code, out, _ = run(["reproduce", "--list"], capsys)
    assert code == 0
    for name in RECIPES:
        assert name in out
    assert "parplane" in out and "alias of fig4" in out


def test_every_criterion_has_a_recipe():
    assert sorted(CRITERION_RECIPES) == list(range(1, 13))


def test_simulate_writes_tables(tmp_path, capsys):
    code, out, _ = run(["simulate", "--system", "qssr", "--initial", "0.5", "0.5", "--t-end", "20",
                        "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    paths = out.split()
    assert any(p.endswith("-trajectory.csv") for p in paths)
    table = read_csv(next(p for p in paths if p.endswith("-trajectory.csv")))
    assert table.column_names[0] == "t" and len(table) > 1


def test_equilibrium_json(tmp_path, capsys):
    code, out, _ = run(["equilibrium", "--format", "json", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    data = json.loads(open(out.split()[0]).read())
    row = dict(zip([c["name"] for c in data["columns"]], data["rows"][0]))
    assert row["p_a"] == pytest.approx(1.0, abs=0.05) and row["stability"] in ("stable", "unstable")


def test_invalid_input_exits_2(tmp_path, capsys):
    code, _, err = run(["simulate", "--tol", "1e-3", "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "tol" in err
    code, _, err = run(["simulate", "--system", "qssr", "--initial", "1", "2", "3", "--out-dir", str(tmp_path)],
                       capsys)
    assert code == 2 and "initial" in err
    code, _, err = run(["reproduce", "no-such-recipe"], capsys)
    assert code == 2 and "unknown recipe" in err
    code, _, err = run(["pwl", "--xi-a", "0.5", "--out-dir", str(tmp_path)], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--system", "bogus"])
    assert exc.value.code == 2


def test_numerical_failure_exits_3(tmp_path, capsys, monkeypatch):
    def fail(cfg):
        raise NumericalError("step size underflow")

    monkeypatch.setattr(cli, "simulate_tables", fail)
    code, _, err = run(["simulate", "--out-dir", str(tmp_path)], capsys)
    assert code == 3 and "numerical failure" in err


def test_config_file_and_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "alpha", "output": {"dir": str(tmp_path / "a")}}))
    code, out, _ = run(["reproduce", "--config", str(cfg)], capsys)
    assert code == 0 and str(tmp_path / "a") in out
    code, out, _ = run(["reproduce", "--config", str(cfg), "--out-dir", str(tmp_path / "b")], capsys)
    assert code == 0 and str(tmp_path / "b") in out


def test_reproduce_is_deterministic(tmp_path, capsys):
    outputs = []
    for k in range(2):
        code, out, _ = run(["reproduce", "poincare", "--out-dir", str(tmp_path / str(k))], capsys)
        assert code == 0
        outputs.append(sorted(open(p).read() for p in out.split()))
    assert outputs[0] == outputs[1]


def test_parplane_threads_agree(tmp_path, capsys):
    args = ["parplane", "--sigma-range", "1e-3", "1e-1", "4", "--eps-range", "1e-6", "1e-1", "4"]
    code, out1, _ = run(args + ["--out-dir", str(tmp_path / "one")], capsys)
    code2, out2, _ = run(args + ["--threads", "2", "--out-dir", str(tmp_path / "two")], capsys)
    assert code == code2 == 0
    assert open(out1.split()[0]).read() == open(out2.split()[0]).read()
    regions = set(read_csv(out1.split()[0]).column("region"))
    assert regions <= {"no-manifold-guarantee", "hopf-possible", "hopf-impossible", "boundary"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "grnswitch", "charts-check", "--samples", "3",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "charts-check" in proc.stdout
