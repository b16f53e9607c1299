import csv
import json

import numpy as np
import pytest

from lorapar.cli import main

FAST_LYAP = [
    "lyapunov", "--n", "16", "--T", "0.3", "--slices", "3", "--q", "2", "--r", "5",
    "--kmax", "3", "--seed", "11", "--substeps", "16",
]


def run_cli(args):
    return main(args)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestValidate:
    def test_valid_spec_prints_manifest(self, capsys, tmp_path):
        code = run_cli(["validate", *FAST_LYAP, "--output", str(tmp_path)])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["experiment"] == "lyapunov"
        assert doc["h"] == pytest.approx(0.1)
        assert doc["seeds"]["source"] == 11

    def test_equal_ranks_rejected(self, capsys):
        code = run_cli(["validate", "lyapunov", "--q", "16", "--r", "16"])
        assert code == 2
        assert "q < r" in capsys.readouterr().err

    def test_missing_output_dir(self, tmp_path):
        code = run_cli(["validate", *FAST_LYAP, "--output", str(tmp_path / "nope")])
        assert code == 2

    def test_two_sweeps_rejected(self, capsys):
        code = run_cli(["validate", "lyapunov", "--sweep-q", "2,4", "--sweep-r", "8,16"])
        assert code == 2
        assert "sweep" in capsys.readouterr().err

    def test_bad_h_sweep_rejected(self):
        assert run_cli(["validate", "lyapunov", "--T", "2.0", "--sweep-h", "0.13"]) == 2

    def test_duplicate_sweep_values_rejected(self, capsys):
        code = run_cli(["validate", "lyapunov", "--sweep-q", "4,4"])
        assert code == 2
        assert "distinct" in capsys.readouterr().err

    def test_divergent_bound_constants_rejected(self, capsys):
        code = run_cli(["validate", "bounds-figure", "--alpha", "0.6", "--beta", "0.5"])
        assert code == 2
        assert "alpha" in capsys.readouterr().err


@pytest.fixture(scope="module")
def lyap_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("lyap")
    assert run_cli(["run", *FAST_LYAP, "--output", str(out)]) == 0
    return out


class TestRun:
    def test_artifacts_exist(self, lyap_out):
        for name in ("convergence.csv", "spectra.csv", "manifest.json"):
            assert (lyap_out / name).exists()

    def test_convergence_rows_complete_and_unique(self, lyap_out):
        rows = read_rows(lyap_out / "convergence.csv")
        assert len(rows) == 4 * 4  # (K_max+1) x (N+1)
        keys = {(r["sweep_value"], r["k"], r["n"]) for r in rows}
        assert len(keys) == len(rows)

    def test_errors_decrease(self, lyap_out):
        rows = read_rows(lyap_out / "convergence.csv")
        maxerr = {}
        for r in rows:
            k = int(r["k"])
            maxerr[k] = max(maxerr.get(k, 0.0), float(r["error"]))
        assert maxerr[3] <= maxerr[0]

    def test_spectra_times(self, lyap_out):
        rows = read_rows(lyap_out / "spectra.csv")
        times = sorted({float(r["time"]) for r in rows})
        assert times == pytest.approx([0.0, 0.15, 0.3])

    def test_byte_identical_rerun(self, lyap_out, tmp_path):
        out2 = tmp_path / "again"
        assert run_cli(["run", *FAST_LYAP, "--output", str(out2)]) == 0
        assert (out2 / "convergence.csv").read_bytes() == (lyap_out / "convergence.csv").read_bytes()
        assert (out2 / "spectra.csv").read_bytes() == (lyap_out / "spectra.csv").read_bytes()

    def test_manifest_roundtrip(self, lyap_out, tmp_path):
        out2 = tmp_path / "from_manifest"
        code = run_cli(["run", "--from-manifest", str(lyap_out / "manifest.json"), "--output", str(out2)])
        assert code == 0
        assert (out2 / "convergence.csv").read_bytes() == (lyap_out / "convergence.csv").read_bytes()

    def test_sweep_emits_one_block_per_value(self, tmp_path):
        out = tmp_path / "sweep"
        args = ["run", *FAST_LYAP, "--sweep-q", "2,3", "--output", str(out)]
        assert run_cli(args) == 0
        rows = read_rows(out / "convergence.csv")
        values = {r["sweep_value"] for r in rows}
        assert len(values) == 2
        assert len(rows) == 2 * 4 * 4


class TestBoundsFigure:
    def test_four_kinds_emitted(self, tmp_path):
        out = tmp_path / "bf"
        args = ["run", "bounds-figure", "--alpha", "0.2", "--beta", "0.7",
                "--gamma", "1", "--kappa", "1e-15", "--n", "30", "--output", str(out)]
        assert run_cli(args) == 0
        rows = read_rows(out / "bounds.csv")
        kinds = {r["kind"] for r in rows}
        assert kinds == {"linear", "second_linear", "superlinear", "exact_recursion"}
        assert len(rows) == 4 * 31
        values = np.array([float(r["value"]) for r in rows])
        assert np.all(np.isfinite(values))


class TestExitCodes:
    def test_runtime_failure_exits_3(self, monkeypatch, tmp_path, capsys):
        from lorapar import cli
        from lorapar.integrators import AccuracyError

        def boom(*args, **kwargs):
            raise AccuracyError("flow did not converge", 1.0)

        monkeypatch.setattr(cli, "_single_run", boom)
        code = run_cli(["run", *FAST_LYAP, "--output", str(tmp_path)])
        assert code == 3
        assert "AccuracyError" in capsys.readouterr().err

    def test_missing_experiment(self):
        assert run_cli(["run"]) == 2

    def test_unknown_experiment_is_argparse_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["run", "warp-drive"])
        assert exc.value.code == 2

    def test_riccati_even_k_rejected(self):
        assert run_cli(["validate", "riccati", "--k", "4"]) == 2
