import json
import subprocess
import sys

import pytest

from gkcap import cli
from gkcap.linear_source import CAP_ENV_VAR


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def record(out):
    return json.loads(out.strip().splitlines()[-1])


@pytest.fixture
def ex1_path(fixtures_dir):
    return str(fixtures_dir / "example1.json")


def test_capacity_example1(capsys, ex1_path):
    code, out, _ = run(capsys, "capacity", ex1_path)
    assert code == 0
    rec = record(out)
    assert rec["capacity_bits"] == 1.0 and rec["jgk_bits"] == 1.0
    assert rec["rank_m"] == 1 and rec["rank_md"] == 0
    assert any(line.split()[:2] == ["capacity_bits", "1"] for line in out.splitlines()[:-1])


def test_mcf_example1(capsys, ex1_path):
    code, out, _ = run(capsys, "mcf", ex1_path, "--format", "json")
    assert code == 0
    assert len(out.strip().splitlines()) == 1
    rec = record(out)
    assert rec["g_matrix"] == "p=2 rows=3 cols=1 data=1;1;0"
    assert rec["recovery_maps"]["2"] == "p=2 rows=2 cols=1 data=1;1"


def test_entropy_empty_and_full(capsys, ex1_path):
    code, out, _ = run(capsys, "entropy", ex1_path, "--set", "")
    assert code == 0 and record(out)["entropy_bits"] == 0.0
    _, out, _ = run(capsys, "entropy", ex1_path, "--set", "1,2")
    assert record(out)["entropy_bits"] == 3.0
    assert record(out)["set"] == ["1", "2"]


def test_entropy_unknown_user(capsys, ex1_path):
    code, _, err = run(capsys, "entropy", ex1_path, "--set", "9")
    assert code == 2 and "9" in err


def test_wyner2(capsys, ex1_path):
    code, out, _ = run(capsys, "wyner2", ex1_path)
    rec = record(out)
    assert code == 0
    assert rec["jgk_bits"] == rec["mi_bits"] == rec["wyner_bits"] == 1.0
    assert rec["certified"] and rec["cond_mi_bits"] < 1e-10


def test_wyner2_needs_two_active(capsys, fixtures_dir, tmp_path):
    doc = json.loads((fixtures_dir / "example1.json").read_text())
    doc["users"].append({"id": "3", "matrix": [[1], [0], [0]], "roles": {"active": True}})
    path = tmp_path / "three.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "wyner2", str(path))
    assert code == 2 and "error" in err


def test_mmi_on_linear_and_discrete(capsys, ex1_path, fixtures_dir):
    code, out, _ = run(capsys, "mmi", ex1_path)
    assert code == 0
    rec = record(out)
    assert rec["mmi_bits"] == pytest.approx(1.0, abs=1e-12)
    assert rec["argmin_partition"] == [["1"], ["2"]]
    _, out, _ = run(capsys, "mmi", str(fixtures_dir / "dm_joint.json"), "--set", "1,2,Q")
    assert record(out)["mmi_bits"] == pytest.approx(1.0, abs=1e-12)


def test_check_dm(capsys, fixtures_dir):
    code, out, _ = run(capsys, "check-dm", str(fixtures_dir / "dm_joint.json"), "--active", "1,2")
    rec = record(out)
    assert code == 0
    assert rec["hypothesis_holds"] and rec["consequent_exact_zero"]
    assert rec["antecedent_mi_bits"] == {"1": 0.0, "2": 0.0}


def test_check_dm_bad_q(capsys, fixtures_dir):
    code, _, _ = run(capsys, "check-dm", str(fixtures_dir / "dm_joint.json"), "--active", "1,2",
                     "--q", "nope")
    assert code == 2


def test_simulate(capsys, ex1_path):
    code, out, _ = run(capsys, "simulate", ex1_path, "--n", "8", "--trials", "200", "--seed", "4")
    rec = record(out)
    assert code == 0
    assert rec["agreement_rate"] == 1.0 and rec["key_rate_bits_per_sample"] == 1.0
    assert rec["exact_independence"] is True
    assert rec["rng_seed"] == 4 and rec["rng_algorithm"]
    _, out, _ = run(capsys, "simulate", ex1_path, "--n", "3", "--trials", "20", "--binning")
    assert record(out)["mode"] == "binning"
    assert run(capsys, "simulate", ex1_path, "--n", "0")[0] == 2


def test_output_is_byte_identical(capsys, ex1_path):
    for argv in (["simulate", ex1_path, "--n", "2", "--trials", "100", "--seed", "7"],
                 ["mcf", ex1_path], ["wyner2", ex1_path]):
        first = run(capsys, *argv)[1]
        assert run(capsys, *argv)[1] == first


def test_numeric_fields_carry_units(capsys, ex1_path, fixtures_dir):
    dm = str(fixtures_dir / "dm_joint.json")
    for argv in (["mcf", ex1_path], ["capacity", ex1_path], ["entropy", ex1_path, "--set", "1"],
                 ["wyner2", ex1_path], ["mmi", ex1_path], ["check-dm", dm, "--active", "1,2"],
                 ["simulate", ex1_path, "--n", "2", "--trials", "10"], ["xcheck", ex1_path]):
        rec = record(run(capsys, *argv)[1])
        for key, value in rec.items():
            if isinstance(value, float) or (isinstance(value, dict)
                                            and any(isinstance(v, float) for v in value.values())):
                assert key.endswith(("_bits", "_rate")) or "_bits_" in key, (argv[0], key)


def test_xcheck_corpus(capsys, fixtures_dir):
    paths = sorted(str(p) for p in (fixtures_dir / "corpus").glob("*.json"))
    assert len(paths) >= 20
    code, out, _ = run(capsys, "xcheck", *paths, "--format", "json")
    assert code == 0
    recs = [json.loads(line) for line in out.strip().splitlines()]
    assert len(recs) == len(paths) and all(r["pass"] for r in recs)


def test_xcheck_mismatch_exits_3(capsys, ex1_path, monkeypatch):
    monkeypatch.setattr(cli.ds, "capacity_oracle", lambda *a, **k: 99.0)
    code, out, _ = run(capsys, "xcheck", ex1_path)
    assert code == 3
    assert record(out)["pass"] is False


ACT = {"active": True}


@pytest.mark.parametrize("doc,where", [
    ({"field_p": 4, "ambient_dim": 1, "users": []}, "field_p"),
    ({"field_p": 2, "ambient_dim": 2,
      "users": [{"id": "1", "matrix": [[1]], "roles": ACT},
                {"id": "2", "matrix": [[1], [0]], "roles": ACT}]}, "users[0].matrix"),
    ({"field_p": 2, "ambient_dim": 1,
      "users": [{"id": "1", "matrix": [[1]], "roles": ACT}]}, "active"),
    ({"field_p": 2, "ambient_dim": 1, "active": ["1", "2"],
      "users": [{"id": "1", "matrix": [[1]]}, {"id": "2", "matrix": [[1]]}]}, "'active'"),
    ({"field_p": 2, "ambient_dim": 1,
      "users": [{"id": "1", "matrix": [[1]], "roles": {"active": 1}},
                {"id": "2", "matrix": [[1]], "roles": ACT}]}, "users[0].roles.active"),
    ({"field_p": 2, "ambient_dim": 1,
      "users": [{"id": "1", "matrix": [[1]], "roles": {"activ": True}},
                {"id": "2", "matrix": [[1]], "roles": ACT}]}, "users[0].roles"),
])
def test_malformed_spec_reports_location(capsys, tmp_path, doc, where):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "capacity", str(path))
    assert code == 2
    assert where in err


def test_unparseable_and_missing_files(capsys, tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    assert run(capsys, "mcf", str(path))[0] == 2
    assert run(capsys, "mcf", str(tmp_path / "missing.json"))[0] == 2


def test_exhaustion_cap_exit(capsys, ex1_path, monkeypatch):
    monkeypatch.setenv(CAP_ENV_VAR, "4")
    code, _, err = run(capsys, "mmi", ex1_path)
    assert code == 2
    assert "8" in err


def test_console_script_end_to_end(ex1_path):
    proc = subprocess.run([sys.executable, "-m", "gkcap.cli", "capacity", ex1_path,
                           "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["capacity_bits"] == 1.0
