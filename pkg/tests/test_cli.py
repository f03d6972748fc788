import json

import pytest

from tropline.cli import main


def run(capsys, *args):
    main(list(args))
    return capsys.readouterr().out


def run_fail(capsys, *args):
    with pytest.raises(SystemExit) as exc:
        main(list(args))
    out = capsys.readouterr()
    return exc.value.code, out.out + out.err


@pytest.fixture
def vec3(tmp_path):
    u = tmp_path / "u.txt"
    v = tmp_path / "v.txt"
    u.write_text("3\n3 3 1\n")
    v.write_text("3\n3 2 3\n")
    return str(u), str(v)


class TestValidate:
    def test_ultrametric_yes(self, capsys, vec3):
        out = run(capsys, "validate", vec3[0])
        assert "ultrametric: yes" in out

    def test_newick_input(self, capsys, tmp_path):
        p = tmp_path / "t.nwk"
        p.write_text("((1:0.5,2:0.5):1.0,3:1.5);\n")
        out = run(capsys, "validate", str(p))
        assert "ultrametric: yes" in out

    def test_failure_reports_triple_and_exits_1(self, capsys, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("3\n1 2 3\n")
        code, out = run_fail(capsys, "validate", str(p))
        assert code == 1
        assert "ultrametric: no; triple (1, 2, 3)" in out

    def test_malformed_file_exits_1(self, capsys, tmp_path):
        p = tmp_path / "junk.txt"
        p.write_text("not a vector\n")
        code, out = run_fail(capsys, "validate", str(p))
        assert code == 1
        assert "error" in out.lower()

    def test_missing_file_is_usage_error(self, capsys, tmp_path):
        code, _ = run_fail(capsys, "validate", str(tmp_path / "nope.txt"))
        assert code == 2


class TestSegment:
    def test_worked_example(self, capsys, vec3):
        report = json.loads(run(capsys, "segment", *vec3))
        assert [p["lambda"] for p in report["points"]] == ["-2", "0", "1"]
        assert report["points"][1]["class"] == "SingleNNI"
        assert report["points"][1]["newick"].count(",") == 2  # 3-leaf star

    def test_identical_inputs(self, capsys, vec3):
        report = json.loads(run(capsys, "segment", vec3[0], vec3[0]))
        assert len(report["points"]) == 1
        assert report["points"][0]["class"] == "NoChange"

    def test_worst_case_n6_counts(self, capsys, tmp_path):
        run(capsys, "--out", str(tmp_path / "wc"), "worst-case", "6")
        report = json.loads(
            run(
                capsys,
                "segment",
                str(tmp_path / "wc.u.txt"),
                str(tmp_path / "wc.v.txt"),
            )
        )
        assert len(report["points"]) == 15
        classes = [p["class"] for p in report["points"]]
        assert classes.count("SingleNNI") == 10

    def test_decimal_flag(self, capsys, vec3):
        report = json.loads(run(capsys, "--decimal", "segment", *vec3))
        assert report["points"][0]["lambda_decimal"] == -2.0


class TestClassifyAndTnni:
    def test_classify_checks_pass(self, capsys, vec3):
        report = json.loads(run(capsys, "classify", *vec3))
        assert all(report["checks"].values())
        assert report["class_counts"] == {"NoChange": 2, "SingleNNI": 1}

    def test_tnni(self, capsys, vec3):
        report = json.loads(run(capsys, "tnni", *vec3))
        assert report["turning_points"] == 3
        assert report["tropical_nni_number"] == 1


class TestWorstCase:
    def test_stdout_vectors(self, capsys):
        out = run(capsys, "worst-case", "3")
        assert "6 6 3" in out and "1 2 2" in out

    def test_writes_files(self, capsys, tmp_path):
        run(capsys, "--out", str(tmp_path / "w"), "worst-case", "3")
        assert (tmp_path / "w.u.txt").read_text() == "3\n6 6 3\n"
        assert (tmp_path / "w.v.txt").read_text() == "3\n1 2 2\n"

    def test_rejects_small_n(self, capsys):
        code, _ = run_fail(capsys, "worst-case", "2")
        assert code == 2


class TestCount:
    def test_formula_matches_enumeration(self, capsys):
        rows = json.loads(run(capsys, "count", "5"))
        row5 = [r for r in rows if r["n"] == 5][0]
        assert row5["planar"] == 14 == row5["planar_enumerated"]

    def test_csv_format(self, capsys):
        out = run(capsys, "--format", "csv", "count", "3")
        lines = out.strip().splitlines()
        assert lines[0] == "n,planar,planar_enumerated,marked,marked_enumerated"
        assert lines[-1] == "3,2,2,4,4"


class TestRandomPairAndExperiment:
    def test_random_pair_deterministic(self, capsys):
        a = run(capsys, "--seed", "21", "random-pair", "5")
        b = run(capsys, "--seed", "21", "random-pair", "5")
        assert a == b
        report = json.loads(a)
        assert report["seed"] == 21 and len(report["u"]) == 10

    def test_default_seed_is_fixed(self, capsys):
        a = run(capsys, "random-pair", "4")
        b = run(capsys, "random-pair", "4")
        assert a == b

    def test_experiment_csv_and_sidecar(self, capsys, tmp_path):
        out = str(tmp_path / "exp.csv")
        run(capsys, "--seed", "3", "--out", out, "experiment", "-n", "4", "--trials", "40")
        lines = (tmp_path / "exp.csv").read_text().strip().splitlines()
        assert lines[0] == "n,trials,mean_pi,var,ci99,bound,seconds"
        fields = lines[1].split(",")
        assert fields[0] == "4" and fields[1] == "40"
        assert float(fields[2]) <= float(fields[5])  # mean <= bound
        sidecar = json.loads((tmp_path / "exp.csv.json").read_text())
        assert sidecar["seed"] == 3
        assert "/" in sidecar["rows"][0]["bound_exact"]

    def test_experiment_deterministic_modulo_timing(self, capsys, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = str(tmp_path / name)
            run(capsys, "--out", out, "experiment", "-n", "4", "--trials", "30")
            rows = (tmp_path / name).read_text().strip().splitlines()
            outs.append([r.rsplit(",", 1)[0] for r in rows])  # drop seconds
        assert outs[0] == outs[1]


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        code, _ = run_fail(capsys, "segment")
        assert code == 2

    def test_unknown_command_is_2(self, capsys):
        code, _ = run_fail(capsys, "frobnicate")
        assert code == 2

    def test_non_ultrametric_segment_input_is_1(self, capsys, tmp_path, vec3):
        bad = tmp_path / "bad.txt"
        bad.write_text("3\n1 2 3\n")
        code, _ = run_fail(capsys, "segment", str(bad), vec3[0])
        assert code == 1
