import json
import shutil
import subprocess
import sys

import pytest

from defectqoc.cli import EXIT_INVALID, EXIT_OK, EXIT_THRESHOLD, main
from defectqoc.harness import load
from defectqoc.problems import preset, save_problem


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCatalog:
    def test_lists_presets(self, capsys):
        code, out, _ = run(capsys, "catalog", "--format", "csv")
        assert code == EXIT_OK
        names = [line.split(",")[0] for line in out.splitlines()[2:]]
        assert names == ["creation", "deformation1", "detachment", "injection2"]

    def test_json_default(self, capsys):
        code, out, _ = run(capsys, "catalog")
        assert json.loads(out)["metadata"]["kind"] == "catalog"


class TestSolve:
    def test_writes_report(self, capsys, tmp_path):
        out_path = tmp_path / "solve.json"
        code, _, _ = run(capsys, "--out", str(out_path), "solve", "--problem", "creation",
                         "--time", "1.3", "--segments", "2", "--restarts", "3")
        assert code == EXIT_OK
        doc = load(out_path)
        assert doc["metadata"]["best_infidelity"] < 1e-10
        assert len(doc["rows"]) == 3

    def test_global_flags_after_subcommand(self, capsys, tmp_path):
        out_path = tmp_path / "s.csv"
        code, _, _ = run(capsys, "solve", "--problem", "creation", "--time", "1.3",
                         "--segments", "2", "--restarts", "2", "--out", str(out_path),
                         "--threads", "2")
        assert code == EXIT_OK
        assert load(out_path)["metadata"]["config"]["threads"] == 2

    def test_byte_identical_runs(self, capsys, tmp_path):
        texts = []
        for i in range(2):
            path = tmp_path / f"r{i}.csv"
            run(capsys, "--out", str(path), "solve", "--problem", "deformation1",
                "--time", "2.0", "--segments", "3", "--restarts", "4", "--seed", "11")
            texts.append(path.read_bytes())
        assert texts[0] == texts[1]

    def test_threads_do_not_change_bytes(self, capsys, tmp_path):
        texts = []
        for threads in ("1", "3"):
            path = tmp_path / f"t{threads}.json"
            run(capsys, "--threads", threads, "--out", str(path), "solve", "--problem",
                "creation", "--time", "1.2", "--segments", "3", "--restarts", "6")
            doc = json.loads(path.read_text())
            doc["metadata"]["config"].pop("threads")
            texts.append(json.dumps(doc))
        assert texts[0] == texts[1]

    def test_require_epsilon_unmet(self, capsys):
        code, out, err = run(capsys, "solve", "--problem", "creation", "--time", "0.5",
                             "--segments", "2", "--restarts", "2", "--require-epsilon")
        assert code == EXIT_THRESHOLD
        assert "not reached" in err
        assert json.loads(out)["metadata"]["kind"] == "solve"

    def test_require_epsilon_met(self, capsys):
        code, _, _ = run(capsys, "solve", "--problem", "creation", "--time", "1.3",
                         "--segments", "2", "--restarts", "3", "--require-epsilon")
        assert code == EXIT_OK

    def test_unknown_problem(self, capsys):
        code, _, err = run(capsys, "solve", "--problem", "nope", "--time", "1", "--segments", "2")
        assert code == EXIT_INVALID and "nope" in err

    def test_invalid_segments(self, capsys):
        code, _, _ = run(capsys, "solve", "--problem", "creation", "--time", "1",
                         "--segments", "0")
        assert code == EXIT_INVALID

    def test_argument_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["solve", "--problem", "creation"])
        assert info.value.code == 2

    def test_problem_file(self, capsys, tmp_path):
        path = tmp_path / "p.json"
        save_problem(preset("deformation1"), path)
        code, out, _ = run(capsys, "solve", "--problem-file", str(path), "--time", "2.0",
                           "--segments", "4", "--restarts", "5")
        assert code == EXIT_OK
        assert json.loads(out)["metadata"]["problem"] == "deformation1"

    def test_bad_problem_file(self, capsys, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"name": "x"}')
        code, _, err = run(capsys, "solve", "--problem-file", str(path), "--time", "1",
                           "--segments", "1")
        assert code == EXIT_INVALID and "missing" in err


class TestOtherCommands:
    def test_sweep(self, capsys, tmp_path):
        path = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, "--out", str(path), "sweep", "--problem", "creation",
                         "--t-min", "1.2", "--t-max", "1.3", "--t-step", "0.05",
                         "--segments", "2", "--restarts", "5", "--require-epsilon")
        assert code == EXIT_OK
        doc = load(path)
        assert [r[0] for r in doc["rows"]] == [1.2, 1.25, 1.3]
        assert doc["metadata"]["drop_time"] in (1.2, 1.25, 1.3)

    def test_sweep_without_drop(self, capsys):
        code, _, _ = run(capsys, "sweep", "--problem", "creation", "--t-min", "0.3",
                         "--t-max", "0.4", "--t-step", "0.1", "--segments", "2",
                         "--restarts", "2", "--require-epsilon")
        assert code == EXIT_THRESHOLD

    def test_baseline_grid(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "baseline", "--problem", "creation",
                           "--t-grid", "0.1,0.5,1.15", "--n-ramp", "200")
        assert code == EXIT_OK
        assert out.splitlines()[1] == "T,infidelity_linear"
        assert len(out.splitlines()) == 5

    def test_baseline_needs_grid(self, capsys):
        code, _, _ = run(capsys, "baseline", "--problem", "creation")
        assert code == EXIT_INVALID

    def test_blocks(self, capsys):
        code, out, _ = run(capsys, "blocks", "--problem", "detachment", "--n-adiabatic", "1000")
        meta = json.loads(out)["metadata"]
        assert code == EXIT_OK and meta["n_blocks"] == 16 and meta["n_sectors"] == 256

    def test_blocks_without_symmetry(self, capsys, tmp_path):
        path = tmp_path / "q.json"
        path.write_text(json.dumps({
            "name": "qubit", "n_qubits": 1, "objective": "gate",
            "h_initial": [{"coeff": -0.5, "paulis": [{"site": 1, "axis": "Z"}]}],
            "h_final": [{"coeff": -0.5, "paulis": [{"site": 1, "axis": "X"}]}]}))
        code, _, err = run(capsys, "blocks", "--problem-file", str(path))
        assert code == EXIT_INVALID and "symmetry" in err

    def test_min_segments(self, capsys):
        code, out, _ = run(capsys, "min-segments", "--problem", "creation", "--time", "1.3",
                           "--n-max", "3", "--restarts", "5")
        assert code == EXIT_OK
        assert json.loads(out)["metadata"]["n_segments"] == 2

    def test_table_empty(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "table", "--problems")
        assert code == EXIT_OK and len(out.splitlines()) == 2


class TestEntryPoints:
    def test_module(self):
        res = subprocess.run([sys.executable, "-m", "defectqoc", "catalog", "--format", "csv"],
                             capture_output=True, text=True, check=True)
        assert "creation" in res.stdout

    @pytest.mark.skipif(shutil.which("defectqoc") is None, reason="console script not installed")
    def test_console_script(self):
        res = subprocess.run(["defectqoc", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and "0.1.0" in res.stdout
