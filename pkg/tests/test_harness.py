import math
import statistics

import numpy as np
import pytest

from fairdp.classifier import ModelParams
from fairdp.dataset import train_test_split
from fairdp.exceptions import CalibrationError
from fairdp.fairness import FermiConfig
from fairdp.harness import (
    NO_PRIVACY,
    SENSITIVE_ONLY,
    ExperimentConfig,
    SyntheticSpec,
    TradeoffRecord,
    aggregate,
    calibrate_for_run,
    emit_csv,
    evaluate_metrics,
    run_sweep,
    synth_dataset,
)
from fairdp.optimizer import SgdaConfig, dp_fermi_train
from fairdp.privacy import NoiseScales


def cheap_config(**kw):
    base = dict(
        dataset=SyntheticSpec(n=120, d_x=3, bias=0.6, noise_scale=1.0, seed=0),
        lambdas=(0.0,),
        epsilons=(1.0,),
        trials=1,
        granularity=NO_PRIVACY,
        eta_theta=0.02,
        eta_w=0.02,
        epochs=2,
        batch_size=30,
        box_radius=1.0,
        clip_theta=None,
        master_seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestSyntheticData:
    def test_deterministic(self):
        spec = SyntheticSpec(n=50, d_x=4, bias=0.3, noise_scale=1.0, seed=9)
        a, b = synth_dataset(spec), synth_dataset(spec)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.sensitive, b.sensitive)

    def test_zero_bias_labels_independent_of_groups(self):
        ds = synth_dataset(SyntheticSpec(n=20_000, d_x=3, bias=0.0, seed=1))
        # empirical P(y=2 | s) should match across groups up to sampling noise
        rates = [
            (ds.labels[ds.sensitive == r] == 2).mean() for r in (1, 2)
        ]
        assert abs(rates[0] - rates[1]) <= 0.02

    def test_bias_skews_preferred_class(self):
        ds = synth_dataset(SyntheticSpec(n=20_000, d_x=3, bias=0.8, seed=1))
        rate_g2 = (ds.labels[ds.sensitive == 2] == 2).mean()
        rate_g1 = (ds.labels[ds.sensitive == 1] == 2).mean()
        assert rate_g2 - rate_g1 >= 0.3

    def test_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n=0, d_x=3)
        with pytest.raises(ValueError):
            SyntheticSpec(n=10, d_x=3, bias=1.5)

    @staticmethod
    def _unregularized_violation(bias, seed):
        ds = synth_dataset(SyntheticSpec(n=2000, d_x=5, bias=bias, noise_scale=1.0, seed=seed))
        train, test = train_test_split(ds, 0.25, seed)
        sgda = SgdaConfig(
            eta_theta=0.01, eta_w=0.01, T=400, m=min(1024, train.n), box_radius=1.0, seed=seed
        )
        result = dp_fermi_train(
            train, ModelParams.zeros(2, 5), FermiConfig(0.0), sgda, NoiseScales.none()
        )
        return evaluate_metrics(result.params, test)["dp_violation"]

    def test_unbiased_data_trains_to_low_violation(self):
        mean = np.mean([self._unregularized_violation(0.0, seed) for seed in range(5)])
        assert mean <= 0.05

    def test_biased_data_trains_to_high_violation(self):
        mean = np.mean([self._unregularized_violation(0.8, seed) for seed in range(5)])
        assert mean >= 0.3


class TestRunSweep:
    def test_record_count_matches_grid(self, tmp_path):
        config = cheap_config(
            lambdas=(0.0, 0.5, 1.0, 1.5, 2.0, 2.5),
            epsilons=(0.5, 1.0, 3.0, 9.0),
            trials=5,
            epochs=1,
        )
        records = run_sweep(config)
        assert len(records) == 4 * 6 * 5
        assert all(rec.status == "ok" for rec in records)
        path = tmp_path / "grid.csv"
        emit_csv(records, path)
        assert len(path.read_text().strip().splitlines()) == 121

    def test_plain_erm_baseline_matches_direct_run(self):
        config = cheap_config(epochs=3)
        record = run_sweep(config)[0]
        # replay the single cell by hand with the same derived stream
        ds = synth_dataset(config.dataset)
        train, test = train_test_split(ds, 0.25, config.master_seed)
        m = min(config.batch_size, train.n)
        T = config.epochs * math.ceil(train.n / m)
        rng = np.random.default_rng(np.random.SeedSequence((config.master_seed, 0, 0, 0)))
        sgda = SgdaConfig(
            eta_theta=config.eta_theta, eta_w=config.eta_w, T=T, m=m, box_radius=1.0
        )
        result = dp_fermi_train(
            train, ModelParams.zeros(train.l, train.d_x), FermiConfig(0.0), sgda,
            NoiseScales.none(), rng,
        )
        metrics = evaluate_metrics(result.params, test)
        assert record.test_error == pytest.approx(metrics["error"], abs=1e-12)
        assert record.dp_violation == pytest.approx(metrics["dp_violation"], abs=1e-12)
        assert record.sigma_theta_sq == 0.0 and record.sigma_w_sq == 0.0

    def test_calibration_floor_enforced(self):
        config = cheap_config(granularity=SENSITIVE_ONLY, epochs=1, batch_size=2)
        # T = 45 but min_iterations(90, 2, 1) = ceil((90/4)^2) >> 45
        with pytest.raises(CalibrationError):
            run_sweep(config)

    def test_deterministic_records(self):
        config = cheap_config(lambdas=(0.0, 1.0), trials=2)
        assert run_sweep(config) == run_sweep(config)


def toy_records():
    base = dict(
        dataset_id="toy", delta=1e-5, notion="demographic_parity", T=10, m=5,
        sigma_theta_sq=0.0, sigma_w_sq=0.0, train_error=0.1, test_error=0.2,
        dp_violation=0.3, eo_violation=0.4, ermi_hard=0.05, status="ok",
    )
    return base


class TestAggregate:
    def test_single_record(self):
        rec = TradeoffRecord(seed=0, epsilon=1.0, lam=0.5, **toy_records())
        row = aggregate([rec])[0]
        assert row["runs"] == 1
        assert row["test_error_mean"] == pytest.approx(0.2)
        assert row["test_error_std"] == 0.0

    def test_symmetric_pair_mean_at_midpoint(self):
        base = toy_records()
        recs = []
        for seed, err in ((0, 0.1), (1, 0.3)):
            fields = dict(base)
            fields["test_error"] = err
            recs.append(TradeoffRecord(seed=seed, epsilon=1.0, lam=0.0, **fields))
        row = aggregate(recs)[0]
        assert row["test_error_mean"] == pytest.approx(0.2)
        assert row["test_error_std"] == pytest.approx(0.1)

    def test_fifteen_records_match_independent_recomputation(self):
        rng = np.random.default_rng(3)
        base = toy_records()
        recs = []
        for seed in range(15):
            fields = dict(base)
            fields["test_error"] = float(rng.uniform(0, 1))
            fields["dp_violation"] = float(rng.uniform(0, 1))
            recs.append(TradeoffRecord(seed=seed, epsilon=2.0, lam=1.0, **fields))
        row = aggregate(recs)[0]
        errors = [rec.test_error for rec in recs]
        assert row["test_error_mean"] == pytest.approx(statistics.fmean(errors), abs=1e-12)
        assert row["test_error_std"] == pytest.approx(statistics.pstdev(errors), abs=1e-12)

    def test_groups_sorted_by_epsilon_then_lambda(self):
        base = toy_records()
        recs = [
            TradeoffRecord(seed=0, epsilon=e, lam=l, **base)
            for e, l in [(3.0, 0.0), (1.0, 1.0), (1.0, 0.0), (3.0, 1.0)]
        ]
        rows = aggregate(recs)
        assert [(r["epsilon"], r["lam"]) for r in rows] == [
            (1.0, 0.0), (1.0, 1.0), (3.0, 0.0), (3.0, 1.0)
        ]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestEmitCsv:
    def test_header_only_for_no_records(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("dataset_id,seed,epsilon,delta,lambda,notion")

    def test_round_trip_six_digits(self, tmp_path):
        rec = TradeoffRecord(
            seed=3, epsilon=1.23456789, lam=0.987654321, **toy_records()
        )
        path = tmp_path / "r.csv"
        emit_csv([rec], path)
        header, row = path.read_text().strip().splitlines()
        values = dict(zip(header.split(","), row.split(",")))
        assert float(values["epsilon"]) == float(f"{1.23456789:.6g}")
        assert float(values["lambda"]) == float(f"{0.987654321:.6g}")
        assert values["status"] == "ok"

    def test_line_count(self, tmp_path):
        config = cheap_config(lambdas=(0.0, 1.0), epsilons=(1.0, 2.0), trials=2)
        records = run_sweep(config)
        path = tmp_path / "sweep.csv"
        emit_csv(records, path)
        assert len(path.read_text().strip().splitlines()) == len(records) + 1

    def test_aggregate_rows_supported(self, tmp_path):
        rec = TradeoffRecord(seed=0, epsilon=1.0, lam=0.0, **toy_records())
        path = tmp_path / "agg.csv"
        emit_csv(aggregate([rec]), path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("epsilon,lambda,runs")

    def test_byte_identical_output(self, tmp_path):
        config = cheap_config(lambdas=(0.0, 0.5), trials=2)
        paths = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            emit_csv(run_sweep(config), path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]


class TestCalibrateForRun:
    def test_none_granularity_is_noiseless(self):
        noise = calibrate_for_run(NO_PRIVACY, 1.0, 1e-5, 10, 100, 10, 0.5, 1.0, 1.0, 2)
        assert noise.sigma_theta_sq == 0.0 and noise.sigma_w_sq == 0.0

    def test_iteration_floor(self):
        with pytest.raises(CalibrationError):
            calibrate_for_run(SENSITIVE_ONLY, 1.0, 1e-5, 10, 1000, 10, 0.5, 1.0, 1.0, 2)
