"""Config parsing, the replicate runner, serialisation and the CLI."""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from alpha_descent.cli import main
from alpha_descent.harness import (
    CSV_HEADER,
    ExperimentConfig,
    build_target,
    parse_config,
    read_trace_csv,
    replicate_rng,
    run_experiment,
    run_replicate,
    write_trace,
)


def _config(**overrides):
    base = dict(
        algorithm="emd",
        alpha=0.5,
        step_size_base=0.3,
        num_components=4,
        sample_count=(32,),
        num_steps=2,
        num_phases=2,
        dim=2,
        replicates=2,
        seed=11,
        target_separation=1.0,
        init_cov_scale=1.0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


class TestConfig:
    def test_repo_reference_config_parses(self):
        config = parse_config(str(CONFIG_DIR / "figure1.json"))
        assert config.algorithm == "power"
        assert config.alpha == 0.5
        assert config.step_size_base == 0.3
        assert config.num_components == 100
        assert config.sample_count == (100, 1000, 2000)
        assert config.num_steps == 20
        assert config.num_phases == 10
        assert config.dim == 16
        assert config.replicates == 100
        assert config.shift == 0.0
        assert config.exploration == "resample"

    def test_repo_smoke_config_parses(self):
        config = parse_config(str(CONFIG_DIR / "smoke.json"))
        assert config.replicates == 2

    def test_scalar_sample_count_promoted(self):
        assert _config(sample_count=64).sample_count == (64,)

    def test_unknown_key_rejected(self, tmp_path):
        path = _write_json(
            tmp_path / "bad.json",
            {"algorithm": "emd", "bandwidth": 1.0, "momentum": 0.9},
        )
        with pytest.raises(ValueError, match="bandwidth, momentum"):
            parse_config(path)

    def test_missing_keys_listed(self, tmp_path):
        path = _write_json(tmp_path / "bad.json", {"algorithm": "emd"})
        with pytest.raises(ValueError, match="missing required"):
            parse_config(path)

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="JSON object"):
            parse_config(str(path))

    def test_field_validation(self):
        with pytest.raises(ValueError, match="algorithm"):
            _config(algorithm="adam")
        with pytest.raises(ValueError, match="sample_count"):
            _config(sample_count=(0,))
        with pytest.raises(ValueError, match="num_components"):
            _config(num_components=0)
        with pytest.raises(ValueError, match="step_size_base"):
            _config(step_size_base=0.0)
        with pytest.raises(ValueError, match="seed"):
            _config(seed=1.5)

    def test_algorithm_alpha_coupling(self):
        with pytest.raises(ValueError, match="alpha=1"):
            _config(algorithm="power", alpha=1.0)
        with pytest.raises(ValueError, match="alpha=1"):
            _config(algorithm="renyi", alpha=1.0)
        with pytest.raises(ValueError, match="kl"):
            _config(algorithm="kl", alpha=0.5)
        _config(algorithm="kl", alpha=1.0)

    def test_mean_update_needs_mass_covering_alpha(self):
        with pytest.raises(ValueError, match="mean_update"):
            _config(exploration="mean_update", alpha=2.0)
        _config(exploration="mean_update", alpha=0.5)

    def test_zero_steps_and_replicates_allowed(self):
        config = _config(num_steps=0, replicates=0)
        assert config.num_steps == 0

    def test_descent_params_scaling(self):
        params = _config(step_size_base=0.3, num_steps=20).descent_params()
        assert params.step_size == pytest.approx(0.3 / math.sqrt(20), rel=1e-15)
        assert params.alpha == 0.5
        # zero steps must not divide by zero
        assert _config(num_steps=0).descent_params().step_size == pytest.approx(0.3)

    def test_single_sample_count(self):
        assert _config().single_sample_count() == 32
        with pytest.raises(ValueError, match="several"):
            _config(sample_count=(8, 16)).single_sample_count()


class TestTargetAndStreams:
    def test_build_target_geometry(self):
        config = _config(dim=3, target_separation=2.0, target_scale=2.0)
        target = build_target(config)
        # symmetric modes at +-2 along the diagonal, equal mass
        assert target.log_density(2.0 * np.ones(3)) == pytest.approx(
            target.log_density(-2.0 * np.ones(3))
        )
        assert target.normalisation_hint == 2.0

    def test_replicate_rng_reproducible_and_disjoint(self):
        a = replicate_rng(11, 0).standard_normal(4)
        b = replicate_rng(11, 0).standard_normal(4)
        c = replicate_rng(11, 1).standard_normal(4)
        d = replicate_rng(12, 0).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)


class TestRunReplicate:
    def test_record_count_and_iteration_sequence(self):
        config = _config(num_phases=3, num_steps=2)
        trace = run_replicate(config, 0)
        assert trace.status == "completed"
        assert trace.replicate == 0
        assert len(trace.records) == 3 * 2 + 1
        want = [(1, 0), (1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)]
        assert [(r.phase, r.step) for r in trace.records] == want
        for rec in trace.records:
            assert np.isfinite(rec.vr_bound)
            assert math.isnan(rec.objective)

    def test_zero_steps_records_initial_only(self):
        trace = run_replicate(_config(num_steps=0), 0)
        assert [(r.phase, r.step) for r in trace.records] == [(1, 0)]

    def test_deterministic_per_index(self):
        config = _config()
        a = run_replicate(config, 1)
        b = run_replicate(config, 1)
        assert len(a.records) == len(b.records)
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.weights, rb.weights)
            assert ra.vr_bound == rb.vr_bound

    def test_weights_reset_after_exploration(self):
        config = _config(num_phases=2, num_steps=3, seed=13)
        trace = run_replicate(config, 0)
        first_of_phase2 = next(r for r in trace.records if r.phase == 2)
        # step 1 of a fresh phase starts from uniform, one update in
        assert first_of_phase2.step == 1
        end_of_phase1 = [r for r in trace.records if r.phase == 1][-1]
        assert not np.array_equal(first_of_phase2.weights, end_of_phase1.weights)

    def test_mean_update_exploration_runs(self):
        config = _config(exploration="mean_update", alpha=0.5, seed=17)
        trace = run_replicate(config, 0)
        assert trace.status == "completed"

    def test_guard_violation_truncates_single_replicate(self):
        config = _config(
            algorithm="power",
            num_components=10,
            sample_count=(50,),
            num_steps=3,
            num_phases=1,
            dim=16,
            init_cov_scale=5.0,
            target_separation=2.0,
            seed=41,
        )
        trace = run_replicate(config, 0)
        assert trace.status.startswith("guard_violation: step 1 of phase 1")
        assert len(trace.records) == 1  # the initial record survives

    def test_kl_run_flags_nan_monitor(self):
        config = _config(algorithm="kl", alpha=1.0, num_phases=2, num_steps=2)
        trace = run_replicate(config, 0)
        assert trace.status == "completed (nan_vr=5)"
        assert all(math.isnan(r.vr_bound) for r in trace.records)


class TestRunExperiment:
    def test_zero_replicates(self):
        assert run_experiment(_config(replicates=0)) == []

    def test_replicate_order_and_identity(self):
        config = _config(replicates=3)
        traces = run_experiment(config, max_workers=2)
        assert [t.replicate for t in traces] == [0, 1, 2]

    def test_threaded_matches_serial(self):
        config = _config(replicates=4)
        serial = run_experiment(config, max_workers=1)
        threaded = run_experiment(config, max_workers=4)
        for a, b in zip(serial, threaded):
            assert a.status == b.status
            for ra, rb in zip(a.records, b.records):
                assert np.array_equal(ra.weights, rb.weights)
                assert ra.vr_bound == rb.vr_bound

    def test_one_bad_replicate_does_not_stop_the_rest(self):
        config = _config(
            algorithm="power",
            num_components=10,
            sample_count=(50,),
            num_steps=2,
            num_phases=1,
            dim=16,
            init_cov_scale=5.0,
            target_separation=2.0,
            seed=41,
            replicates=3,
        )
        traces = run_experiment(config, max_workers=1)
        assert len(traces) == 3
        assert all(t.status.startswith("guard_violation") for t in traces)


class TestSerialisation:
    def test_files_and_round_trip(self, tmp_path):
        config = _config(replicates=2)
        traces = run_experiment(config, max_workers=1)
        out = tmp_path / "out"
        summary_path = write_trace(traces, str(out), config)
        assert sorted(os.listdir(out)) == ["rep_0.csv", "rep_1.csv", "summary.json"]
        rows = read_trace_csv(str(out / "rep_1.csv"))
        assert len(rows) == len(traces[1].records)
        for row, rec in zip(rows, traces[1].records):
            assert row["t"] == rec.phase
            assert row["n"] == rec.step
            # repr-format floats survive the text round trip bit for bit
            assert row["vr_bound"] == rec.vr_bound
            assert math.isnan(row["psi_exact"])
        with open(summary_path) as fh:
            summary = json.load(fh)
        assert summary["config"]["algorithm"] == "emd"
        assert summary["config"]["sample_count"] == [32]
        assert summary["statuses"] == ["completed", "completed"]
        assert [s["n"] for s in summary["series"][:3]] == [0, 1, 2]

    def test_summary_statistics(self, tmp_path):
        config = _config(replicates=3, num_phases=1)
        traces = run_experiment(config, max_workers=1)
        write_trace(traces, str(tmp_path), config)
        with open(tmp_path / "summary.json") as fh:
            summary = json.load(fh)
        entry = summary["series"][0]
        vals = [t.records[0].vr_bound for t in traces]
        assert entry["vr_mean"] == pytest.approx(np.mean(vals), rel=1e-12)
        assert entry["vr_std"] == pytest.approx(np.std(vals), rel=1e-12)

    def test_single_replicate_std_is_zero(self, tmp_path):
        traces = run_experiment(_config(replicates=1), max_workers=1)
        write_trace(traces, str(tmp_path), _config(replicates=1))
        with open(tmp_path / "summary.json") as fh:
            summary = json.load(fh)
        assert all(s["vr_std"] == 0.0 for s in summary["series"])

    def test_no_replicates_still_writes_summary(self, tmp_path):
        path = write_trace([], str(tmp_path), _config(replicates=0))
        with open(path) as fh:
            summary = json.load(fh)
        assert summary["series"] == []
        assert summary["statuses"] == []

    def test_nan_written_verbatim(self, tmp_path):
        config = _config(algorithm="kl", alpha=1.0, replicates=1)
        traces = run_experiment(config, max_workers=1)
        write_trace(traces, str(tmp_path), config)
        text = (tmp_path / "rep_0.csv").read_text()
        assert "nan" in text.splitlines()[1]
        rows = read_trace_csv(str(tmp_path / "rep_0.csv"))
        assert math.isnan(rows[0]["vr_bound"])

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "rep_0.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_trace_csv(str(path))


class TestCli:
    def _smoke_config(self, tmp_path, **overrides):
        data = dict(
            algorithm="emd",
            alpha=0.5,
            step_size_base=0.3,
            num_components=4,
            sample_count=[16],
            num_steps=1,
            num_phases=1,
            dim=2,
            replicates=1,
            seed=3,
        )
        data.update(overrides)
        return _write_json(tmp_path / "config.json", data)

    def test_run_writes_outputs(self, tmp_path, capsys):
        config = self._smoke_config(tmp_path)
        out = str(tmp_path / "out")
        with pytest.raises(SystemExit) as info:
            main(["run", "--config", config, "--out", out, "--max-workers", "1"])
        assert info.value.code == 0
        assert os.path.exists(os.path.join(out, "summary.json"))
        assert "0 aborted" in capsys.readouterr().out

    def test_flag_overrides_config(self, tmp_path):
        config = self._smoke_config(tmp_path)
        out = str(tmp_path / "out")
        with pytest.raises(SystemExit):
            main(
                [
                    "run", "--config", config, "--out", out,
                    "--max-workers", "1", "--replicates", "2",
                ]
            )
        assert os.path.exists(os.path.join(out, "rep_1.csv"))

    def test_multiple_sample_counts_get_subdirectories(self, tmp_path):
        config = self._smoke_config(tmp_path, sample_count=[8, 16])
        out = str(tmp_path / "out")
        with pytest.raises(SystemExit) as info:
            main(["run", "--config", config, "--out", out, "--max-workers", "1"])
        assert info.value.code == 0
        for sub in ("samples_8", "samples_16"):
            assert os.path.exists(os.path.join(out, sub, "summary.json"))
            with open(os.path.join(out, sub, "summary.json")) as fh:
                assert json.load(fh)["config"]["sample_count"] == [
                    int(sub.split("_")[1])
                ]

    def test_aborted_replicates_fail_the_run(self, tmp_path, capsys):
        config = self._smoke_config(
            tmp_path,
            algorithm="power",
            num_components=10,
            sample_count=[50],
            num_steps=2,
            dim=16,
            seed=41,
        )
        with pytest.raises(SystemExit) as info:
            main(
                [
                    "run", "--config", config,
                    "--out", str(tmp_path / "out"), "--max-workers", "1",
                ]
            )
        assert info.value.code == 1
        assert "1 aborted" in capsys.readouterr().out

    def test_check_subcommand_passes(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["check"])
        assert info.value.code == 0
        assert "ok" in capsys.readouterr().out.lower()
