import json
import subprocess
import sys

import numpy as np
import pytest

from spikeslab.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestQueries:
    def test_eppf(self, capsys):
        code, out, _ = run(capsys, "eppf", "--sigma", "0.5", "--freqs", "2")
        assert code == 0
        assert float(out.split()[1]) == pytest.approx(0.5)

    def test_eppf_check_nig(self, capsys):
        code, out, _ = run(capsys, "eppf", "--model", "nig", "--zeta", "0.3", "--freqs", "2,1",
                           "--spike-index", "1", "--check")
        assert code == 0 and "generic" in out

    def test_predict(self, capsys):
        code, out, _ = run(capsys, "predict", "--sigma", "0.25", "--freqs", "5,3,2")
        assert code == 0
        rows = dict(line.split(",") for line in out.strip().splitlines())
        assert float(rows["new"]) == pytest.approx(0.075)
        assert float(rows["cluster_1"]) == pytest.approx(0.475)

    def test_n0_and_kn(self, capsys):
        code, out, _ = run(capsys, "n0-dist", "--sigma", "0.25", "--zeta", "0.5", "--n", "2")
        assert code == 0
        probs = [float(l.split(",")[1]) for l in out.strip().splitlines()[1:]]
        np.testing.assert_allclose(probs, [0.4375, 0.125, 0.4375])
        code, out, _ = run(capsys, "kn-dist", "--model", "nig", "--zeta", "0.2", "--n", "4", "--check")
        assert code == 0

    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["eppf", "--freqs", "1,a"])
        assert e.value.code == 2
        with pytest.raises(SystemExit):
            main(["sample", "--m", "3"])
        code, _, err = run(capsys, "eppf", "--sigma", "1.5", "--freqs", "2")
        assert code == 2 and "sigma" in err
        code, _, _ = run(capsys, "predict", "--zeta", "0", "--freqs", "2", "--spike-index", "1")
        assert code == 2

    def test_help_lists_flags(self):
        text = build_parser().format_help()
        for cmd in ("eppf", "predict", "n0-dist", "kn-dist", "sample", "experiment"):
            assert cmd in text


class TestRuns:
    def test_sample_deterministic(self, tmp_path, capsys):
        for d in ("a", "b"):
            code, _, _ = run(capsys, "sample", "--zeta", "0.3", "--m", "10", "--reps", "4", "--seed", "5",
                             "--freqs", "3,1", "--n-spike", "2", "--out", str(tmp_path / d))
            assert code == 0
        a = (tmp_path / "a" / "trajectories.tsv").read_bytes()
        assert a == (tmp_path / "b" / "trajectories.tsv").read_bytes()
        assert len(a.decode().splitlines()) == 41

    def test_experiment_with_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sigmas": [0.5], "zetas": [0.5], "m": 20}))
        code, out, _ = run(capsys, "experiment", "fig2", "--seed", "1", "--reps", "500",
                           "--config", str(cfg), "--out", str(tmp_path / "o"), "--format", "both")
        assert code == 0
        names = sorted(p.name for p in (tmp_path / "o").iterdir())
        assert names == ["n0_inner_sigma0.5_zeta0.5.csv", "n0_inner_sigma0.5_zeta0.5.svg",
                         "n0_outer_sigma0.5_zeta0.5.csv", "n0_outer_sigma0.5_zeta0.5.svg"]

    def test_experiment_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sigmaz": [0.5]}))
        code, _, err = run(capsys, "experiment", "table1", "--seed", "1", "--config", str(cfg),
                           "--out", str(tmp_path))
        assert code == 2 and "sigmaz" in err

    def test_console_script(self):
        out = subprocess.run([sys.executable, "-m", "spikeslab.cli", "--help"], capture_output=True,
                             text=True)
        assert out.returncode == 0 and "experiment" in out.stdout
