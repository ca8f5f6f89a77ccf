import json

import numpy as np
import pytest

from sparsemp import policy
from sparsemp.cli import main
from sparsemp.trajectory import load_trajectory_csv


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    code = run(
        "synth", "--out", str(out), "--seed", "5", "--demos", "2",
        "--dof", "2", "--samples", "60", "--rate", "100",
        "--features", "2", "--noise", "0.005",
    )
    assert code == 0
    return out


class TestSynth:
    def test_outputs_exist(self, fixture_dir):
        assert (fixture_dir / "demo_1.csv").exists()
        assert (fixture_dir / "demo_2.csv").exists()
        assert (fixture_dir / "stream.csv").exists()
        assert (fixture_dir / "ground_truth_1.json").exists()

    def test_demo_shape(self, fixture_dir):
        demo = load_trajectory_csv(fixture_dir / "demo_1.csv")
        assert demo.n_samples == 60
        assert demo.n_dof == 2
        assert demo.dt == pytest.approx(0.01)

    def test_ground_truth_flagged_and_accurate(self, fixture_dir):
        doc = json.loads((fixture_dir / "ground_truth_1.json").read_text())
        assert doc["ground_truth"] is True
        prim = policy.load_policy(fixture_dir / "ground_truth_1.json")
        demo = load_trajectory_csv(fixture_dir / "demo_1.csv")
        from sparsemp.trainers import reconstruct

        resid = demo.Q - reconstruct(prim, demo.t)
        # ground truth differs from the demo only by the injected noise
        assert np.sqrt(np.mean(resid ** 2)) <= 0.01

    def test_deterministic(self, tmp_path, fixture_dir):
        again = tmp_path / "again"
        code = run(
            "synth", "--out", str(again), "--seed", "5", "--demos", "2",
            "--dof", "2", "--samples", "60", "--rate", "100",
            "--features", "2", "--noise", "0.005",
        )
        assert code == 0
        for name in ("demo_1.csv", "stream.csv", "ground_truth_2.json"):
            assert (again / name).read_bytes() == (fixture_dir / name).read_bytes()


class TestSegment:
    def test_stream_recut(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "cuts"
        code = run(
            "segment", str(fixture_dir / "stream.csv"),
            "--out-dir", str(out), "--count", "2",
            "--window", "0.6", "--rate", "100",
        )
        assert code == 0
        assert (out / "demo_1.csv").exists() and (out / "demo_2.csv").exists()
        printed = capsys.readouterr().out
        assert "peak index" in printed
        cut = load_trajectory_csv(out / "demo_1.csv")
        assert cut.n_samples == 60

    def test_bad_count_is_usage_error(self, fixture_dir, tmp_path):
        code = run(
            "segment", str(fixture_dir / "stream.csv"),
            "--out-dir", str(tmp_path), "--count", "0",
            "--window", "0.6", "--rate", "100",
        )
        assert code == 2

    def test_rate_mismatch_fails(self, fixture_dir, tmp_path):
        code = run(
            "segment", str(fixture_dir / "stream.csv"),
            "--out-dir", str(tmp_path), "--count", "2",
            "--window", "0.6", "--rate", "250",
        )
        assert code == 1


class TestTrain:
    def test_lsdp_writes_policy(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "lsdp.json"
        code = run(
            "train", "lsdp", str(fixture_dir / "demo_1.csv"),
            "--out", str(out),
        )
        assert code == 0
        assert "method=lsdp" in capsys.readouterr().out
        model = policy.load_policy(out)
        assert model.mode == "lsdp"

    def test_clsdp_couples_demo_columns(self, fixture_dir, tmp_path):
        out = tmp_path / "clsdp.json"
        code = run(
            "train", "clsdp",
            str(fixture_dir / "demo_1.csv"), str(fixture_dir / "demo_2.csv"),
            "--out", str(out),
        )
        assert code == 0
        model = policy.load_policy(out)
        assert model.mode == "clsdp"
        assert model.W.shape[1] == 2

    def test_lsdp_rejects_multiple_demos(self, fixture_dir, tmp_path):
        code = run(
            "train", "lsdp",
            str(fixture_dir / "demo_1.csv"), str(fixture_dir / "demo_2.csv"),
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 2

    def test_dmp_reports_params_per_dof(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "dmp.json"
        code = run(
            "train", "dmp", str(fixture_dir / "demo_1.csv"), "--out", str(out)
        )
        assert code == 0
        assert "params per DoF: 11" in capsys.readouterr().out

    def test_ridge_policy_round_trip(self, fixture_dir, tmp_path):
        out = tmp_path / "ridge.json"
        code = run(
            "train", "ridge", str(fixture_dir / "demo_1.csv"), "--out", str(out)
        )
        assert code == 0
        model = policy.load_policy(out)
        assert model.params_per_dof() == 11

    def test_missing_input_fails(self, tmp_path):
        code = run(
            "train", "lsdp", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 1


@pytest.fixture(scope="module")
def trained(fixture_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    lsdp = out / "lsdp.json"
    assert run(
        "train", "lsdp", str(fixture_dir / "demo_1.csv"), "--out", str(lsdp)
    ) == 0
    dmp = out / "dmp.json"
    assert run(
        "train", "dmp", str(fixture_dir / "demo_1.csv"), "--out", str(dmp)
    ) == 0
    return lsdp, dmp


class TestRankEval:
    def test_rank_prints_ordering(self, fixture_dir, trained, tmp_path, capsys):
        lsdp, _ = trained
        csv_out = tmp_path / "path.csv"
        code = run(
            "rank", str(lsdp), str(fixture_dir / "demo_1.csv"),
            "--grid", "40", "--out", str(csv_out),
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert "rank 1: feature" in printed
        header = csv_out.read_text().splitlines()[0]
        assert header == "lambda,feature_index,row_norm"

    def test_rank_rejects_dmp(self, fixture_dir, trained):
        _, dmp = trained
        code = run("rank", str(dmp), str(fixture_dir / "demo_1.csv"))
        assert code == 1

    def test_eval_reports_all_policies(self, fixture_dir, trained, tmp_path, capsys):
        lsdp, dmp = trained
        out = tmp_path / "report.csv"
        code = run(
            "eval", str(lsdp), str(dmp),
            "--demos", str(fixture_dir / "demo_1.csv"),
            "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "method,nnz,acc_norm,res_norm,total_cost"
        assert lines[1].startswith("lsdp,")
        assert lines[2].startswith("dmp,")

    def test_eval_missing_policy_fails(self, fixture_dir, tmp_path):
        code = run(
            "eval", str(tmp_path / "nope.json"),
            "--demos", str(fixture_dir / "demo_1.csv"),
        )
        assert code == 1
