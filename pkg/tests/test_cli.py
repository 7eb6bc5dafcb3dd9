import csv
import json
import subprocess
import sys

import pytest

from crvpinn.cli import main
from crvpinn.sparse_linalg import read_matrix_market


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def rows_without_time(path):
    rows = list(csv.reader(path.read_text().splitlines()))
    return [r[:-1] for r in rows]


class TestTrain:
    ARGS = ("train", "--problem", "laplace-sinsin", "--n", "6", "--layers", "1", "--width", "4", "--iters", "10")

    def test_outputs(self, tmp_path, capsys):
        assert run(tmp_path, *self.ARGS) == 0
        for f in ("records.csv", "manifest.json", "checkpoint.bin", "convergence.svg"):
            assert (tmp_path / f).exists(), f
        lines = (tmp_path / "records.csv").read_text().splitlines()
        assert len(lines) == 11
        assert "sqrt_loss=" in capsys.readouterr().out

    def test_deterministic_except_time(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(a, *self.ARGS, "--seed", "4")
        run(b, *self.ARGS, "--seed", "4")
        assert rows_without_time(a / "records.csv") == rows_without_time(b / "records.csv")
        assert (a / "checkpoint.bin").read_bytes() == (b / "checkpoint.bin").read_bytes()

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CRVPINN_SEED", "17")
        run(tmp_path, *self.ARGS, "--no-svg")
        assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 17
        assert not (tmp_path / "convergence.svg").exists()

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CRVPINN_SEED", "17")
        run(tmp_path, *self.ARGS, "--seed", "2")
        assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 2

    def test_bad_iters(self, tmp_path):
        assert run(tmp_path, "train", "--iters", "0") == 2

    def test_pinn_loss(self, tmp_path):
        assert run(tmp_path, *self.ARGS, "--loss", "pinn") == 0
        last = (tmp_path / "records.csv").read_text().splitlines()[-1].split(",")
        assert last[5] == "" and last[6] == ""


def test_unknown_problem_exits_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as ei:
        run(tmp_path, "train", "--problem", "bogus")
    assert ei.value.code == 2
    assert "laplace-sinsin" in capsys.readouterr().err


class TestLemmas:
    def test_pass(self, tmp_path, capsys):
        assert run(tmp_path, "lemmas", "--n", "4,8", "--trials", "5") == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6
        assert (tmp_path / "manifest.json").exists()

    def test_injected_bug(self, tmp_path, capsys):
        assert run(tmp_path, "lemmas", "--n", "4", "--trials", "3", "--inject-bug") == 1
        assert "FAIL" in capsys.readouterr().out

    def test_zero_trials_warns(self, tmp_path, capsys):
        assert run(tmp_path, "lemmas", "--trials", "0") == 0
        assert "vacuous" in capsys.readouterr().err

    def test_bad_n(self, tmp_path):
        assert run(tmp_path, "lemmas", "--n", "1") == 2


class TestInfsup:
    def test_csv(self, tmp_path):
        assert run(tmp_path, "infsup", "--n", "6,8") == 0
        rows = list(csv.DictReader((tmp_path / "infsup.csv").open()))
        assert [int(r["N"]) for r in rows] == [6, 8]
        assert float(rows[1]["lambda1"]) == pytest.approx(0.01628058047190627, rel=1e-8)

    def test_too_large(self, tmp_path):
        assert run(tmp_path, "infsup", "--n", "40") == 2


class TestExportGram:
    def test_laplace_n4(self, tmp_path):
        assert run(tmp_path, "export-gram", "--problem", "laplace-sinsin", "--n", "4") == 0
        G = read_matrix_market(tmp_path / "gram_laplace-sinsin_N4.mtx")
        assert G.shape == (9, 9) and G.nnz == 33

    def test_bad_n(self, tmp_path):
        assert run(tmp_path, "export-gram", "--n", "1") == 2


def test_bench(tmp_path, capsys):
    assert run(tmp_path, "bench", "--n", "8", "--iters", "3", "--layers", "1", "--width", "8") == 0
    data = json.loads((tmp_path / "bench.json").read_text())
    assert set(data) == {"pinn", "crvpinn", "ratio"}
    assert "ratio" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "crvpinn", "export-gram", "--n", "3", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert "4x4" in r.stdout
