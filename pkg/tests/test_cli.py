import subprocess
import sys

import numpy as np
import pytest

from fou2.cli import main
from fou2.model import read_path, ModelParams
from fou2.estimators import correction_limit
import oracles


def run(*args):
    proc = subprocess.run([sys.executable, "-m", "fou2", *args], capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def fields(line):
    return dict(item.split("=", 1) for item in line.split())


MINIMAL_INI = """
[model]
theta = 2
hurst = 0.7
[simulation]
horizons = 5
[experiment]
replicates = {reps}
estimators = moment, lse-corrected, pathwise
seed = 4
"""


class TestSampleFbm:
    def test_rows_and_reproducible(self, tmp_path):
        out = tmp_path / "b.csv"
        code, _, _ = run("sample-fbm", "--hurst", "0.7", "--grid", "uniform:10,400", "--seed", "1",
                         "--out", str(out))
        assert code == 0
        with open(out) as fh:
            path, header = read_path(fh)
        assert len(path) == 401 and path.times[0] == 0.0 and path.values[0] == 0.0
        assert header["seed"] == "1"
        first = out.read_bytes()
        assert main(["sample-fbm", "--hurst", "0.7", "--grid", "uniform:10,400", "--seed", "1",
                     "--out", str(out)]) == 0
        assert out.read_bytes() == first

    def test_grid_file(self, tmp_path, capsys):
        g = tmp_path / "grid.txt"
        g.write_text("# times\n0.5\n1.0\n2.5\n")
        assert main(["sample-fbm", "--hurst", "0.3", "--grid", str(g)]) == 0
        assert capsys.readouterr().out.count("\n") == 2 + 3

    def test_bad_hurst(self):
        assert run("sample-fbm", "--hurst", "1.5", "--grid", "uniform:1,10")[0] == 2

    def test_bad_grid(self):
        assert main(["sample-fbm", "--hurst", "0.7", "--grid", "uniform:abc"]) == 2


class TestSimulate:
    def test_rows_and_zero_start(self, tmp_path):
        out = tmp_path / "x.csv"
        code, _, _ = run("simulate", "--theta", "2", "--hurst", "0.7", "--T", "50", "--dt", "0.025",
                         "--out", str(out))
        assert code == 0
        with open(out) as fh:
            path, header = read_path(fh)
        assert len(path) == 2001 and path.values[0] == 0.0
        assert header["theta"] == "2" and header["route"] == "exact"

    def test_theta_domain(self):
        assert run("simulate", "--theta", "0.5", "--hurst", "0.7", "--T", "5")[0] == 2

    def test_grid_cap(self):
        code, _, err = run("simulate", "--theta", "2", "--hurst", "0.7", "--T", "300")
        assert code == 1 and "8192" in err

    def test_stationary_route_beyond_cap(self, tmp_path):
        out = tmp_path / "x.csv"
        assert main(["simulate", "--theta", "2", "--hurst", "0.7", "--T", "300", "--route",
                     "stationary", "--out", str(out)]) == 0


class TestEstimate:
    @pytest.fixture
    def path_file(self, tmp_path):
        out = tmp_path / "x.csv"
        assert main(["simulate", "--theta", "2", "--hurst", "0.7", "--T", "100", "--seed", "2",
                     "--out", str(out)]) == 0
        return out

    def test_pathwise_replay(self, path_file):
        code, out, _ = run("estimate", "--in", str(path_file), "--estimator", "pathwise")
        assert code == 0
        f = fields(out)
        data = np.loadtxt(path_file, delimiter=",", comments="#", skiprows=2)
        t, x = data[:, 0], data[:, 1]
        expected = -0.5 * x[-1] ** 2 / np.trapezoid(x * x, t)
        assert float(f["theta_hat"]) == pytest.approx(expected, rel=1e-12)
        assert f["estimator"] == "pathwise" and float(f["T"]) == 100.0

    def test_lse_requires_theta(self, path_file):
        assert run("estimate", "--in", str(path_file), "--estimator", "lse-corrected", "--hurst", "0.7")[0] == 2

    def test_moment_near_truth(self, path_file, capsys):
        assert main(["estimate", "--in", str(path_file), "--estimator", "moment", "--hurst", "0.7"]) == 0
        th = float(fields(capsys.readouterr().out)["theta_hat"])
        assert 1.2 < th < 3.0

    def test_lse(self, path_file, capsys):
        assert main(["estimate", "--in", str(path_file), "--estimator", "lse-corrected",
                     "--hurst", "0.7", "--theta", "2"]) == 0
        f = fields(capsys.readouterr().out)
        assert float(f["correction"]) > 0

    def test_moment_out_of_range(self, tmp_path, capsys):
        p = tmp_path / "flat.csv"
        p.write_text("t,value\n0,10\n1,10\n")
        assert main(["estimate", "--in", str(p), "--estimator", "moment", "--hurst", "0.7"]) == 1
        assert "achievable" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["estimate", "--in", str(tmp_path / "nope"), "--estimator", "pathwise"]) == 2


class TestVarianceAndCorrection:
    def test_variance(self):
        code, out, _ = run("variance", "--theta", "2", "--hurst", "0.7")
        assert code == 0
        v = float(fields(out)["sigma_squared"])
        assert np.isfinite(v) and v > 0

    def test_variance_bad_hurst(self):
        assert run("variance", "--theta", "2", "--hurst", "0.4")[0] == 2

    def test_correction_limit_field(self):
        code, out, _ = run("correction", "--theta", "2", "--hurst", "0.7", "--T", "50")
        assert code == 0
        f = fields(out)
        assert float(f["limit"]) == pytest.approx(oracles.correction_limit(2.0, 0.7), rel=1e-14)
        assert float(f["per_unit_time"]) == pytest.approx(float(f["correction"]) / 50, rel=1e-15)

    def test_correction_bad_T(self):
        assert main(["correction", "--theta", "2", "--hurst", "0.7", "--T", "-1"]) == 2

    def test_float_format(self, capsys):
        main(["correction", "--theta", "2", "--hurst", "0.7", "--T", "1"])
        lim = fields(capsys.readouterr().out)["limit"]
        assert lim == f"{correction_limit(ModelParams(2.0, 0.7)):.17g}"


class TestExperiment:
    def test_minimal(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text(MINIMAL_INI.format(reps=1))
        code, out, _ = run("experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "o"))
        assert code == 0
        assert sorted(p.name for p in (tmp_path / "o").iterdir()) == \
            ["aggregates.csv", "manifest.json", "records.csv"]

    def test_workers_identical(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text(MINIMAL_INI.format(reps=16))
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "a"), "--workers", "1"]) == 0
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "b"), "--workers", "8"]) == 0
        assert (tmp_path / "a" / "records.csv").read_bytes() == (tmp_path / "b" / "records.csv").read_bytes()

    def test_schema_violation(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text(MINIMAL_INI.format(reps=1).replace("seed = 4", "sead = 4"))
        code, _, err = run("experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "o"))
        assert code == 2 and "experiment.sead" in err and "experiment.seed" in err

    def test_missing_args(self):
        assert run("experiment")[0] == 2
