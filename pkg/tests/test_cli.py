import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hermprod import harness
from hermprod.cli import config_from_args, main
from hermprod.harness import ConfigError, GridSpec, RunConfig, SuiteReport, ks_distance


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestCommands:
    def test_moments(self, capsys):
        code, out, _ = run_cli(capsys, "moments", "--fc", "3", "--k", "4")
        assert code == 0
        assert [r[1] for r in rows(out)[1:]] == ["1", "1", "4", "22", "140"]

    def test_sample_shape(self, capsys):
        code, out, _ = run_cli(capsys, "sample", "--M", "1", "--n", "4", "--nu", "0", "--seed", "7",
                               "--repeats", "1000")
        table = rows(out)
        assert code == 0
        assert table[0] == ["sample_index", "eigenvalue_rank", "value"]
        vals = np.array([float(r[2]) for r in table[1:]]).reshape(1000, 4)
        assert np.all(np.diff(vals, axis=1) > 0) and np.all(vals != 0)

    def test_worker_count_independence(self, capsys):
        base = ["sample", "--M", "1", "--n", "3", "--nu", "1", "--seed", "11", "--repeats", "5000"]
        _, one, _ = run_cli(capsys, *base, "--workers", "1")
        _, four, _ = run_cli(capsys, *base, "--workers", "4")
        assert one == four

    def test_prefix_stability(self, capsys):
        base = ["sample", "--M", "0", "--n", "3", "--seed", "5"]
        _, short, _ = run_cli(capsys, *base, "--repeats", "100")
        _, long, _ = run_cli(capsys, *base, "--repeats", "2500")
        assert long.startswith(short)

    def test_density_global_with_empirical(self, capsys):
        code, out, _ = run_cli(capsys, "density", "--M", "0", "--n", "50", "--seed", "3",
                               "--repeats", "40", "--grid-min", "-1.5", "--grid-max", "1.5",
                               "--grid-points", "4")
        table = rows(out)
        assert code == 0
        assert table[0] == ["x", "density_analytic", "density_empirical", "stderr"]
        for r in table[1:]:
            assert abs(float(r[1]) - float(r[2])) < 6 * float(r[3]) + 0.02

    def test_density_default_grid_skips_origin(self, capsys):
        # for M=5 the symmetric default grid puts a rounding-error point at the origin
        code, out, _ = run_cli(capsys, "density", "--M", "5")
        assert code == 0
        table = rows(out)[1:]
        assert len(table) == 80
        assert max(float(r[1]) for r in table) < 1.0

    @pytest.mark.parametrize("kind", ["fc", "mb"])
    def test_density_kinds(self, capsys, kind):
        code, out, _ = run_cli(capsys, "density", "--kind", kind, "--M", "1", "--nu", "0",
                               "--grid-min", "0.5", "--grid-max", "2", "--grid-points", "3")
        assert code == 0 and len(rows(out)) == 4

    def test_kernel_hard_edge_json(self, capsys):
        code, out, _ = run_cli(capsys, "kernel", "--M", "0", "--route", "unified", "--grid-min", "-1",
                               "--grid-max", "1", "--grid-points", "2", "--y", "0.5", "--format",
                               "json")
        data = json.loads(out)
        assert code == 0
        assert data["columns"] == ["x", "y", "even", "odd", "total"]
        x, y, *_, total = data["rows"][1]
        assert total == pytest.approx(float(np.sin(2 * (x - y)) / (np.pi * (x - y))), abs=1e-8)

    def test_kernel_finite(self, capsys):
        code, out, _ = run_cli(capsys, "kernel", "--M", "1", "--nu", "1", "--n", "4", "--route",
                               "abc-oracle", "--grid-points", "1", "--grid-min", "0.3",
                               "--grid-max", "0.3")
        assert code == 0 and len(rows(out)) == 2

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "m.csv"
        code, out, _ = run_cli(capsys, "moments", "--fc", "1", "--k", "3", "--out", str(path))
        assert code == 0 and out == ""
        assert path.read_text().splitlines()[-1] == "3,5"

    def test_verify_hard_edge(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "hard-edge", "--M", "0")
        assert code == 0
        assert any("sine kernel" in line and line.startswith("[PASS]") for line in out.splitlines())


class TestExitCodes:
    def test_missing_seed(self, capsys):
        code, _, err = run_cli(capsys, "sample", "--M", "0", "--n", "2")
        assert code == 2 and "seed" in err

    @pytest.mark.parametrize("argv", [
        ["sample", "--M", "1", "--nu", "0,1", "--seed", "1"],
        ["sample", "--nu", "a", "--seed", "1"],
        ["bogus"],
        ["moments", "--fc", "3"],
        ["verify", "nope"],
        ["sample", "--seed", "1", "--grid-min", "0"],
        ["sample", "--seed", "-1"],
    ])
    def test_config_errors(self, capsys, argv):
        assert run_cli(capsys, *argv)[0] == 2

    def test_numerical_failure(self, capsys):
        code, _, err = run_cli(capsys, "kernel", "--M", "0", "--route", "double-contour",
                               "--grid-min", "0.5", "--grid-max", "0.5", "--grid-points", "1",
                               "--y", "0.3")
        assert code == 3 and "numerical" in err

    def test_failed_check(self, capsys, monkeypatch):
        def failing(config, report):
            report.add("always fails", 1.0, 0.5)

        monkeypatch.setitem(harness._SUITE_FUNCS, "weights", failing)
        code, out, _ = run_cli(capsys, "verify", "weights")
        assert code == 1 and "[FAIL]" in out


class TestConfig:
    def test_json_file_with_override(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"params": {"depth": 1, "base_dim": 4, "nu": [2]}, "seed": 9,
                                    "repeats": 50, "grid": {"min": -1, "max": 1, "points": 5}}))
        cfg = config_from_args(["sample", "--config", str(path), "--repeats", "7"])
        assert cfg.params.nu == (2,) and cfg.params.base_dim == 4
        assert cfg.seed == 9 and cfg.repeats == 7
        assert cfg.grid == GridSpec(-1.0, 1.0, 5)

    def test_round_trip_schema(self):
        cfg = RunConfig("moments", fc=2, k=3)
        d = cfg.to_dict()
        assert d["fc"] == 2 and d["params"] == {"depth": 0, "base_dim": 2, "nu": []}

    def test_bad_config_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            config_from_args(["moments", "--config", str(path)])

    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            GridSpec(1.0, 0.0, 3)


class TestStatistics:
    def test_ks_self(self):
        rng = np.random.default_rng(0)
        assert ks_distance(rng.standard_normal(10_000), stats.norm.cdf) < 0.02

    def test_ks_point_mass(self):
        assert ks_distance(np.zeros(100), lambda t: np.where(t >= 0, 1.0, 0.0)) <= 1 / 100

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 1.0))
    def test_ks_shift(self, shift):
        rng = np.random.default_rng(1)
        d = ks_distance(rng.standard_normal(20_000) + shift, stats.norm.cdf)
        gap = stats.norm.cdf(shift / 2) - stats.norm.cdf(-shift / 2)
        assert d == pytest.approx(gap, abs=0.02)

    def test_ks_empty(self):
        with pytest.raises(ValueError):
            ks_distance([], stats.norm.cdf)

    def test_report_pass_logic(self):
        r = SuiteReport("demo")
        r.add("a", 0.1, 1.0)
        assert r.passed
        r.add("b", 2.0, 1.0)
        assert not r.passed
        assert r.lines()[-1].startswith("demo: FAIL (1/2")
        assert r.to_dict()["passed"] is False

    def test_blocked_draws_order(self):
        out = harness.blocked_draws(lambda i, b: np.full((b, 1), i), 10, 3, workers=3)
        assert out.ravel().tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3]
