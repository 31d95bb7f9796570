import json
from importlib.resources import files

import jsonschema
import pytest

from cbfs.cli import main, manifest_path_for


def schema(name):
    return json.loads((files("cbfs") / "schemas" / f"{name}.schema.json").read_text())


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def gen_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["-q", "gen", "--m", "10", "--n", "6", "--k", "2", "--noise-features", "2",
                 "--seed", "3", "--out-dir", str(out)]) == 0
    return out


@pytest.fixture
def three_files(tmp_path):
    m = write(tmp_path / "m.csv", "feature,s1,s2\ng1,5,1\ng2,1,5\ng3,10,11\n")
    lab = write(tmp_path / "l.csv", "s1,A\ns2,B\n")
    return m, lab


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "cbfs 0.1.0" in capsys.readouterr().out


def test_usage_error_exit_code(capsys):
    assert main(["solve", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["solve"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_gen_outputs_are_deterministic_and_valid(tmp_path, gen_dir):
    again = tmp_path / "again"
    main(["-q", "gen", "--m", "10", "--n", "6", "--k", "2", "--noise-features", "2",
          "--seed", "3", "--out-dir", str(again)])
    for name in ("matrix.csv", "labels.csv", "truth.json"):
        assert (gen_dir / name).read_bytes() == (again / name).read_bytes()
    truth = json.loads((gen_dir / "truth.json").read_text())
    jsonschema.validate(truth, schema("truth"))
    assert len(truth["consistent_features"]) == 8


def test_solve_writes_valid_result_and_manifest(tmp_path, gen_dir, capsys):
    out = tmp_path / "res" / "result.json"
    sel = tmp_path / "res" / "sel.txt"
    code = main(["-q", "solve", str(gen_dir / "matrix.csv"), str(gen_dir / "labels.csv"),
                 "--restarts", "4", "--out", str(out), "--selection-out", str(sel)])
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("result"))
    assert doc["consistent"] and len(doc["restarts"]) == 4
    assert sel.read_text().splitlines() == doc["selected_features"]
    manifest = json.loads(manifest_path_for(out).read_text())
    jsonschema.validate(manifest, schema("manifest"))
    assert "| mode |" in capsys.readouterr().out


def test_manifest_rerun_is_byte_identical(tmp_path, gen_dir):
    out = tmp_path / "r1.json"
    assert main(["-q", "solve", str(gen_dir / "matrix.csv"), str(gen_dir / "labels.csv"),
                 "--restarts", "3", "--seed", "9", "--out", str(out)]) == 0
    out2 = tmp_path / "r2.json"
    assert main(["-q", "solve", "--manifest", str(manifest_path_for(out)), "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_solve_inconsistent_exit_code(three_files):
    # no selection can clear an additive margin this large
    assert main(["-q", "solve", *three_files, "--alpha", "1000", "--restarts", "1"]) == 2


def test_solve_progress_log(three_files, capsys):
    main(["solve", *three_files, "--restarts", "1"])
    assert "restart=0 iter=1" in capsys.readouterr().err


def test_check_verdicts(tmp_path, three_files, capsys):
    m, lab = three_files
    bad = write(tmp_path / "all.txt", "g1\ng2\ng3\n")
    good = write(tmp_path / "two.txt", "# comment\ng1\n\ng2\n")
    assert main(["-q", "check", m, lab, bad]) == 2
    out = capsys.readouterr().out
    assert "verdict: inconsistent" in out
    assert "violation sample=s1 class=A rival=B margin=-0.5" in out
    assert main(["-q", "check", m, lab, good, "--epsilon", "1"]) == 0
    out = capsys.readouterr().out
    assert "verdict: consistent" in out and "1 feature(s) with margin <= 1" in out


def test_check_unknown_feature(tmp_path, three_files):
    m, lab = three_files
    assert main(["-q", "check", m, lab, write(tmp_path / "s.txt", "nope\n")]) == 1


def test_validate_outputs(tmp_path, three_files, capsys):
    m, lab = three_files
    sel = write(tmp_path / "s.txt", "g1\ng2\n")
    vm = write(tmp_path / "vm.csv", "feature,v1,v2,v3\ng1,6,0,1\ng2,1,4,3\ng3,0,0,0\n")
    vl = write(tmp_path / "vl.csv", "v1,A\nv2,B\nv3,A\n")
    prefix = tmp_path / "val" / "report"
    assert main(["-q", "validate", m, lab, sel, vm, vl, "--out", str(prefix)]) == 0
    assert "err=1 of 3" in capsys.readouterr().out
    doc = json.loads((tmp_path / "val" / "report.json").read_text())
    jsonschema.validate(doc, schema("validation"))
    assert (tmp_path / "val" / "report.csv").read_text().count("\n") == 4


def test_validate_feature_mismatch(tmp_path, three_files):
    m, lab = three_files
    sel = write(tmp_path / "s.txt", "g1\n")
    vm = write(tmp_path / "vm.csv", "feature,v1\ng2,1\ng1,2\ng3,0\n")
    vl = write(tmp_path / "vl.csv", "v1,A\n")
    assert main(["-q", "validate", m, lab, sel, vm, vl]) == 1


def test_malformed_csv(tmp_path, capsys):
    m = write(tmp_path / "m.csv", "feature,s1,s2\ng1,5,abc\ng2,1,5\n")
    lab = write(tmp_path / "l.csv", "s1,A\ns2,B\n")
    assert main(["-q", "solve", m, lab]) == 1
    assert "line 2" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["-q", "solve", str(tmp_path / "none.csv"), str(tmp_path / "none2.csv")]) == 1


def test_sweep(tmp_path, gen_dir, capsys):
    out = tmp_path / "sweep.csv"
    args = ["-q", "sweep", str(gen_dir / "matrix.csv"), str(gen_dir / "labels.csv"),
            "--mode", "alpha", "--restarts", "2", "--out", str(out)]
    assert main(args + ["--values", "0", "1", "5"]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "alpha,f(x),consistent" and len(rows) == 4
    counts = [int(r.split(",")[1]) for r in rows[1:] if r.split(",")[1] != "failed"]
    assert counts == sorted(counts, reverse=True)
    assert main(args) == 1
    assert main(args + ["--values", "5", "1"]) == 1


def test_sweep_with_validation(tmp_path, gen_dir, capsys):
    args = ["-q", "sweep", str(gen_dir / "matrix.csv"), str(gen_dir / "labels.csv"),
            "--mode", "beta", "--values", "1", "1.5", "--restarts", "2",
            "--validation-matrix", str(gen_dir / "matrix.csv"),
            "--validation-labels", str(gen_dir / "labels.csv")]
    assert main(args) == 0
    assert "| beta | f(x) | consistent | err |" in capsys.readouterr().out
