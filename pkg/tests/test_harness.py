import json
import os

import numpy as np
import pytest

from b2bopt import (
    ConfigError,
    ExperimentConfig,
    NmfProblem,
    SyntheticSpec,
    generate_synthetic,
    run_experiment,
)
from b2bopt.cli import main as cli_main
from b2bopt.harness import (
    finite_difference_check,
    read_summary,
    read_trace,
)


class TestGenerateSynthetic:
    def test_noiseless_is_exactly_factorizable(self):
        from b2bopt import relative_residual

        A, U, V = generate_synthetic(12, 9, 3, noise_level=0.0, seed=1)
        assert relative_residual(A, U, V) <= 1e-14

    def test_deterministic_per_seed(self):
        A1, _, _ = generate_synthetic(10, 8, 2, noise_level=0.02, seed=5)
        A2, _, _ = generate_synthetic(10, 8, 2, noise_level=0.02, seed=5)
        np.testing.assert_array_equal(A1, A2)

    def test_noise_level_recorded_not_asserted(self):
        from b2bopt import relative_residual

        A, U, V = generate_synthetic(50, 40, 5, noise_level=0.01, seed=2)
        r = relative_residual(A, U, V)
        assert 0 < r < 0.1  # small, noise-governed

    def test_entries_nonnegative(self):
        A, _, _ = generate_synthetic(20, 15, 3, noise_level=0.5, seed=3)
        assert A.min() >= 0.0

    def test_validation(self):
        with pytest.raises(ConfigError):
            generate_synthetic(4, 4, 9)
        with pytest.raises(ConfigError):
            generate_synthetic(4, 4, 2, noise_level=-0.1)


class TestRunExperiment:
    def test_single_trial_reaches_tolerance(self, tmp_path):
        config = ExperimentConfig(
            data_source=SyntheticSpec(16, 12, 2, 0.0, seed=4), rank=2,
            algorithms=("gb2b",), epsilon=1e-3, max_iter=400, trials=1,
            seed=7, output_dir=str(tmp_path))
        summary = run_experiment(config)
        row = summary.rows[0]
        assert row.status == "ToleranceReached"
        assert row.final_rel_proj_grad <= 1e-3
        assert os.path.exists(tmp_path / "gb2b_t0.csv")

    def test_shared_initial_point_across_algorithms(self, tmp_path):
        config = ExperimentConfig(
            data_source=SyntheticSpec(12, 10, 2, 0.05, seed=1), rank=2,
            algorithms=("gb2b", "cbbcd"), epsilon=1e-2, max_iter=100,
            trials=2, seed=3, output_dir=str(tmp_path))
        summary = run_experiment(config)
        by_trial = {}
        for row in summary.rows:
            by_trial.setdefault(row.trial, set()).add(row.init_hash)
        for trial, hashes in by_trial.items():
            assert len(hashes) == 1, f"trial {trial} initial points differ"

    def test_per_run_errors_recorded_not_raised(self, tmp_path, monkeypatch):
        import b2bopt.harness as harness_mod

        calls = {"n": 0}
        real_run = harness_mod.run

        def flaky(problem, cfg, x0=None):
            calls["n"] += 1
            if cfg.algorithm == "cbbcd":
                raise RuntimeError("injected failure")
            return real_run(problem, cfg, x0=x0)

        monkeypatch.setattr(harness_mod, "run", flaky)
        config = ExperimentConfig(
            data_source=SyntheticSpec(10, 8, 2, 0.0, seed=2), rank=2,
            algorithms=("cbbcd", "gb2b"), epsilon=1e-2, max_iter=50,
            trials=1, seed=1, output_dir=str(tmp_path))
        summary = run_experiment(config)
        errors = {r.algorithm: r.error for r in summary.rows}
        assert errors["cbbcd"] == "injected failure"
        assert errors["gb2b"] == ""

    def test_rank_validated_against_data(self, tmp_path):
        config = ExperimentConfig(
            data_source=SyntheticSpec(6, 5, 2, 0.0, seed=0), rank=6,
            output_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            run_experiment(config)

    def test_config_validation(self):
        good = dict(data_source=SyntheticSpec(6, 5, 2, 0.0, seed=0), rank=2)
        with pytest.raises(ConfigError):
            ExperimentConfig(**good, algorithms=())
        with pytest.raises(ConfigError):
            ExperimentConfig(**good, algorithms=("hals",))
        with pytest.raises(ConfigError):
            ExperimentConfig(**good, epsilon=1.5)
        with pytest.raises(ConfigError):
            ExperimentConfig(**good, trials=0)

    def test_parallel_jobs_match_serial(self, tmp_path):
        base = dict(data_source=SyntheticSpec(12, 10, 2, 0.05, seed=6), rank=2,
                    algorithms=("gb2b", "rb2b"), epsilon=1e-3, max_iter=150,
                    trials=2, seed=9)
        s1 = run_experiment(ExperimentConfig(**base, output_dir=str(tmp_path / "serial"), jobs=1))
        s2 = run_experiment(ExperimentConfig(**base, output_dir=str(tmp_path / "par"), jobs=3))
        for r1, r2 in zip(s1.rows, s2.rows):
            assert (r1.algorithm, r1.trial, r1.iterations, r1.block_updates,
                    r1.final_objective, r1.status) == \
                   (r2.algorithm, r2.trial, r2.iterations, r2.block_updates,
                    r2.final_objective, r2.status)


class TestSummaryRoundTrip:
    def test_csv_roundtrip_identity(self, tmp_path):
        config = ExperimentConfig(
            data_source=SyntheticSpec(10, 8, 2, 0.0, seed=8), rank=2,
            algorithms=("gb2b", "cbbcd"), epsilon=1e-2, max_iter=80,
            trials=2, seed=2, output_dir=str(tmp_path))
        summary = run_experiment(config)
        parsed = read_summary(str(tmp_path))
        assert parsed.rows == summary.rows
        assert parsed.aggregates() == summary.aggregates()

    def test_json_mirror_matches(self, tmp_path):
        config = ExperimentConfig(
            data_source=SyntheticSpec(10, 8, 2, 0.0, seed=8), rank=2,
            algorithms=("gb2b",), epsilon=1e-2, max_iter=80, trials=1,
            seed=2, output_dir=str(tmp_path))
        summary = run_experiment(config)
        with open(tmp_path / "summary.json") as fh:
            payload = json.load(fh)
        assert payload["aggregates"] == summary.aggregates()
        assert len(payload["rows"]) == len(summary.rows)


def strip_elapsed(rows):
    # drop the wall-time column (index 2)
    return [r[:2] + r[3:] for r in rows]


class TestDeterminism:
    def test_traces_byte_identical_modulo_walltime(self, tmp_path):
        base = dict(data_source=SyntheticSpec(14, 11, 2, 0.05, seed=10), rank=2,
                    algorithms=("gb2b", "rb2b", "cbbcd"), epsilon=1e-3,
                    max_iter=120, trials=2, seed=17)
        run_experiment(ExperimentConfig(**base, output_dir=str(tmp_path / "a")))
        run_experiment(ExperimentConfig(**base, output_dir=str(tmp_path / "b")))
        for name in os.listdir(tmp_path / "a"):
            if not name.endswith(".csv") or name == "summary.csv":
                continue
            ra = strip_elapsed(read_trace(tmp_path / "a" / name))
            rb = strip_elapsed(read_trace(tmp_path / "b" / name))
            assert ra == rb, f"{name} differs"


class TestFiniteDifferenceNegativeControl:
    def test_injected_gradient_bug_names_block(self):
        A, _, _ = generate_synthetic(8, 6, 2, seed=11)

        class Buggy(NmfProblem):
            def partial_gradient(self, x, b):
                g = super().partial_gradient(x, b)
                if b == 2:
                    g = g * 1.01  # corrupted block
                return g

        problem = Buggy(A, 2)
        x = np.random.default_rng(12).uniform(0.1, 1, problem.n)
        ok, errs = finite_difference_check(problem, x)
        assert not ok
        assert int(np.argmax(errs)) == 2


class TestCli:
    def test_synth_then_solve(self, tmp_path, capsys):
        data = tmp_path / "A.mtx"
        out = tmp_path / "res"
        assert cli_main(["synth", "--synthetic", "12,9,2,0.0", "--seed", "4",
                         "--out", str(data)]) == 0
        code = cli_main(["solve", "--data", str(data), "--rank", "2",
                         "--algo", "gb2b", "--eps", "1e-2", "--max-iter", "100",
                         "--seed", "4", "--out", str(out)])
        assert code == 0
        assert (out / "summary.json").exists()
        assert "gb2b" in capsys.readouterr().out

    def test_solve_synthetic_inline(self, tmp_path):
        out = tmp_path / "res"
        code = cli_main(["solve", "--synthetic", "10,8,2,0.05", "--rank", "2",
                         "--algo", "gb2b,rb2b", "--eps", "1e-2",
                         "--max-iter", "60", "--out", str(out)])
        assert code == 0
        assert (out / "rb2b_t0.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        code = cli_main(["solve", "--synthetic", "10,8,2,0.0", "--rank", "20",
                         "--out", str(tmp_path / "x")])
        assert code == 2
        code = cli_main(["solve", "--synthetic", "10,8", "--rank", "2",
                         "--out", str(tmp_path / "y")])
        assert code == 2

    def test_negative_data_rejected(self, tmp_path):
        bad = tmp_path / "bad.mtx"
        bad.write_text("%%MatrixMarket matrix array real general\n1 2\n1.0\n-2.0\n")
        code = cli_main(["solve", "--data", str(bad), "--rank", "1",
                         "--out", str(tmp_path / "z")])
        assert code == 2

    def test_check_subcommand_writes_report(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = cli_main(["check", "--out", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["passed"] is True
        names = {c["name"] for c in payload["checks"]}
        assert "HALS column-update equivalence" in names
