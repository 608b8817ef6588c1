import json
import subprocess
import sys

import numpy as np
import pytest

from aggclust import INF, aggregate_cost, make_instance
from aggclust.cli import main
from aggclust.generators import gen_random
from aggclust.io import load_instance, save_instance

from conftest import tri2


@pytest.fixture
def tri2_file(tmp_path):
    p = tmp_path / "tri2.json"
    save_instance(tri2(), p)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(capsys, tri2_file):
    code, out, _ = run(capsys, "validate", tri2_file)
    assert code == 0 and out.startswith("ok")


def test_validate_asymmetric(capsys, tmp_path):
    p = tmp_path / "bad.json"
    m = np.array([[0, 1], [2, 0.0]])
    save_instance(make_instance([m], 1), p)
    code, out, _ = run(capsys, "validate", str(p))
    assert code == 1 and "not symmetric" in out


def test_validate_malformed(capsys, tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{ not json")
    assert run(capsys, "validate", str(p))[0] == 2
    assert run(capsys, "validate", str(tmp_path / "missing.json"))[0] == 2


def test_solve_brute(capsys, tri2_file):
    code, out, _ = run(capsys, "solve", tri2_file, "--algo", "brute")
    res = json.loads(out)
    assert code == 0 and res["solution"] == ["b"] and res["aggregate"] == 5
    assert res["per_scenario"] == [2, 3]


def test_solve_precondition(capsys, tmp_path):
    p = tmp_path / "t3.json"
    save_instance(gen_random(5, 3, 1, 0, "line", z=INF), p)
    code, _, err = run(capsys, "solve", str(p), "--algo", "supplier-t2")
    assert code == 1 and "two scenarios" in err


def test_solve_epas_deterministic(capsys, tri2_file):
    a = run(capsys, "solve", tri2_file, "--algo", "epas", "--seed", "7", "--ci")
    b = run(capsys, "solve", tri2_file, "--algo", "epas", "--seed", "7", "--ci")
    assert a[0] == 0 and a[1] == b[1]


def test_ci_requires_seed(capsys, tri2_file):
    with pytest.raises(SystemExit) as e:
        main(["solve", tri2_file, "--algo", "epas", "--ci"])
    assert e.value.code == 2


@pytest.mark.parametrize("algo", ["brute", "median-t2", "fpt", "epas", "treewidth"])
def test_emitted_cost_reevaluates(capsys, tri2_file, algo):
    code, out, _ = run(capsys, "solve", tri2_file, "--algo", algo, "--seed", "1", "--ci")
    res = json.loads(out)
    inst = load_instance(tri2_file)
    S = [inst.points.index(lbl) for lbl in res["solution"]]
    assert aggregate_cost(inst, S).aggregate == res["aggregate"]


def test_compare_ratio(capsys, tri2_file):
    code, out, _ = run(capsys, "compare", tri2_file, "--algos", "brute,median-t2",
                       "--format", "json", "--ci")
    res = json.loads(out)
    assert code == 0 and res["optimum"] == 5
    assert all(r["ratio"] <= 28 for r in res["rows"])


def test_compare_errors_are_cells(capsys, tri2_file):
    code, out, _ = run(capsys, "compare", tri2_file, "--algos", "brute,supplier-t2",
                       "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("algo,solution,aggregate,ratio")
    assert "z = inf" in lines[2]


def test_compare_text(capsys, tri2_file):
    code, out, _ = run(capsys, "compare", tri2_file, "--algos", "brute,fpt")
    assert code == 0 and "ratio" in out.splitlines()[0]


def test_compare_3dm_yes(capsys, tmp_path):
    p = tmp_path / "3dm.json"
    code, _, _ = run(capsys, "gen", "3dm", "--k", "3", "--edges", "6", "--plant", "yes",
                     "--seed", "2", "-o", str(p))
    assert code == 0
    code, out, _ = run(capsys, "compare", str(p), "--algos", "brute", "--format", "json")
    assert json.loads(out)["rows"][0]["aggregate"] == 0


def test_compare_unknown_algo(capsys, tri2_file):
    with pytest.raises(SystemExit) as e:
        main(["compare", tri2_file, "--algos", "brute,magic"])
    assert e.value.code == 2


def test_lp(capsys, tri2_file):
    code, out, _ = run(capsys, "lp", tri2_file, "--exact")
    assert code == 0 and json.loads(out)["value"] == "5"


def test_gen_random_roundtrip(capsys, tmp_path):
    p = tmp_path / "r.json"
    assert run(capsys, "gen", "random", "--n", "6", "--z", "inf", "--aggregator", "l2",
               "--seed", "4", "-o", str(p))[0] == 0
    inst = load_instance(p)
    assert inst.n == 6 and inst.z == INF and inst.aggregator.kind == "lp"
    assert run(capsys, "validate", str(p))[0] == 0


def test_gen_hitting_set(capsys):
    code, out, _ = run(capsys, "gen", "hitting-set", "--universe", "4", "--sets", "3")
    doc = json.loads(out)
    assert code == 0 and len(doc["scenarios"]) == 3


def test_module_entry_point(tri2_file):
    r = subprocess.run([sys.executable, "-m", "aggclust", "solve", tri2_file, "--algo", "brute"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["solution"] == ["b"]
