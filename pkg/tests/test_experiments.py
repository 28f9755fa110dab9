import numpy as np
import pytest
import statsmodels.api as sm

from dpbayes.calibration import CalibrationSpec, DataSource, NonPrivatePipeline, calibrate_cutoff, estimate_power
from dpbayes.experiments import (
    POWER_CSV_HEADER,
    ContingencyChi2,
    NormalMeanT,
    RegressionF,
    format_effect,
    gen_contingency,
    gen_contingency_records,
    gen_normal_mean,
    gen_regression,
    get_experiment,
    power_rows_to_csv,
    run_power_curve,
)
from dpbayes.statistics import f_statistic


class TestGenerators:
    def test_normal_fixture(self):
        np.testing.assert_array_equal(
            gen_normal_mean(4, 0.0, 1.0, 7),
            [0.0012301533574825742, 0.2987455375084699, -0.2741378553622176, -0.8905918387572742],
        )

    def test_normal_law_of_large_numbers(self):
        assert abs(gen_normal_mean(1_000_000, 0.5, 1.0, 1).mean() - 0.5) < 0.004

    def test_normal_sigma(self):
        with pytest.raises(ValueError):
            gen_normal_mean(5, 0.0, 0.0, 1)

    def test_contingency_fixture(self):
        np.testing.assert_array_equal(gen_contingency(500, 0.1, 11), [[182, 83], [72, 163]])

    def test_contingency_cell_probabilities(self):
        cells = gen_contingency_records(400_000, 0.2, 2)
        freq = np.bincount(cells, minlength=4) / cells.size
        np.testing.assert_allclose(freq, [0.45, 0.05, 0.05, 0.45], atol=0.003)

    def test_contingency_null_counts(self):
        counts = gen_contingency(400_000, 0.0, 3)
        np.testing.assert_allclose(counts / 400_000, 0.25, atol=0.003)

    @pytest.mark.parametrize("delta", [-0.01, 0.25, 0.3])
    def test_contingency_invalid_delta(self, delta):
        with pytest.raises(ValueError):
            gen_contingency(10, delta, 0)

    def test_regression_null(self):
        X, y = gen_regression(200_000, 2, 1.0, [0.0, 0.0], 0.1, 4)
        assert abs(y.mean() - 1.0) < 0.002 and abs(y.std() - 0.1) < 0.002
        assert X.shape == (200_000, 2)

    def test_regression_fixture_matches_statsmodels(self):
        X, y = gen_regression(50, 2, 1.0, [0.5, 0.5], 0.1, 5)
        ref = sm.OLS(y, sm.add_constant(X)).fit()
        obs = f_statistic(X, y)
        assert obs.value == pytest.approx(ref.fvalue, rel=1e-10)
        assert (obs.dof1, obs.dof2) == (2.0, 47.0)

    def test_regression_validation(self):
        with pytest.raises(ValueError):
            gen_regression(10, 2, 1.0, [1.0], 0.1, 0)
        with pytest.raises(ValueError):
            gen_regression(10, 0, 1.0, [], 0.1, 0)

    def test_generator_or_seed(self):
        rng = np.random.default_rng(9)
        np.testing.assert_array_equal(gen_normal_mean(3, 0, 1, rng), gen_normal_mean(3, 0, 1, np.random.default_rng(9)))


class TestExperimentDefinitions:
    def test_normal_grid(self):
        exp = NormalMeanT()
        assert len(exp.effect_grid) == 200
        assert min(abs(e) for e in exp.effect_grid) == 0.01 and max(exp.effect_grid) == 1.0
        assert exp.n_grid == (25, 50, 100, 200, 500)

    def test_contingency_grid(self):
        exp = ContingencyChi2()
        assert exp.effect_grid == (0.05, 0.10, 0.15, 0.20)
        assert exp.n_grid == (500, 1000, 1500, 2000)

    def test_regression_grid(self):
        exp = RegressionF()
        assert len(exp.effect_grid) == 64
        assert (0.25, -1.0) in exp.effect_grid
        assert exp.n_grid == (50, 100, 200, 500)

    def test_records_from_counts(self):
        records = ContingencyChi2.records_from_counts([2, 0, 1, 3])
        np.testing.assert_array_equal(records, [0, 0, 2, 3, 3, 3])

    def test_registry(self):
        assert isinstance(get_experiment("f", p=3), RegressionF)
        with pytest.raises(ValueError):
            get_experiment("anova")

    def test_format_effect(self):
        assert format_effect(0.5) == "0.5"
        assert format_effect((0.5, -0.25)) == "0.5:-0.25"

    def test_simulate_batch_cycles_effects(self):
        batch = NormalMeanT().simulate_batch(2000, [0.0, 5.0], 1, "x", 4)
        means = batch.mean(axis=1)
        assert abs(means[0]) < 0.2 and abs(means[1] - 5) < 0.2 and abs(means[2]) < 0.2


class TestPowerCurve:
    def test_null_effect_gives_size(self):
        spec = CalibrationSpec(0.05, 4000, 21)
        for exp, n in [(NormalMeanT(), 50), (ContingencyChi2(), 500), (RegressionF(), 50)]:
            rows = run_power_curve(exp, spec, n_list=[n], fixed=(5, 3), effect_settings={"zero": [exp.null_effect]})
            for row in rows:
                assert abs(row.power - 0.05) < 0.025, (exp.name, row)

    @pytest.mark.parametrize(
        "exp,n,effects",
        [
            (NormalMeanT(), 50, [0.1, 0.2, 0.3, 0.5]),
            (ContingencyChi2(), 500, [0.05, 0.10, 0.15, 0.20]),
            (RegressionF(), 50, [(0.0, 0.01), (0.01, 0.02), (0.02, 0.03), (0.03, 0.05)]),
        ],
    )
    def test_effect_monotonicity(self, exp, n, effects):
        spec = CalibrationSpec(0.05, 1000, 8)
        pipe = NonPrivatePipeline(exp, n)
        cutoff = calibrate_cutoff(DataSource.null(exp, n), pipe, spec)
        powers = [estimate_power(DataSource.alternative(exp, n, [e], label=f"e{i}"), pipe, cutoff, spec) for i, e in enumerate(effects)]
        se = np.sqrt(np.array(powers) * (1 - np.array(powers)) / spec.n_mc)
        for i in range(len(powers) - 1):
            assert powers[i + 1] >= powers[i] - 3 * max(se[i], se[i + 1], 1 / spec.n_mc), powers

    def test_nonprivate_evidence_grows_with_n(self):
        exp = NormalMeanT()
        spec = CalibrationSpec(0.05, 500, 13)
        medians = []
        for n in exp.n_grid:
            log_r = NonPrivatePipeline(exp, n).statistics(DataSource.alternative(exp, n, [0.5]).batch(spec))
            medians.append(np.median(log_r))
        assert all(b > a for a, b in zip(medians, medians[1:])), medians

    def test_seeded_fixture(self):
        rows = run_power_curve(
            NormalMeanT(), CalibrationSpec(0.05, 200, 5), n_list=[25, 100], fixed=(5, 3), effect_settings={"mid": [0.5]}
        )
        assert power_rows_to_csv(rows) == (
            "n,effect,pipeline,power,cutoff,mc_se,seed\n"
            "25,mid,nonprivate,0.775,0.9009110168,0.02952752953,5\n"
            "25,mid,private,0.085,2.350214065,0.01971991379,5\n"
            "100,mid,nonprivate,0.995,0.6966458813,0.004987484336,5\n"
            "100,mid,private,0.265,2.070243845,0.03120697038,5\n"
        )

    def test_row_order_and_header(self):
        rows = run_power_curve(
            NormalMeanT(), CalibrationSpec(0.05, 100, 1), n_list=[100, 50], fixed=(2, 1),
            effect_settings={"mid": [0.5], "grid": [0.2, -0.2]},
        )
        assert [(r.n, r.effect, r.pipeline) for r in rows] == [
            (n, e, p) for n in (50, 100) for e in ("grid", "mid") for p in ("nonprivate", "private")
        ]
        text = power_rows_to_csv(rows)
        assert text.splitlines()[0] == ",".join(POWER_CSV_HEADER)

    def test_tuned_curve_is_deterministic(self):
        kw = dict(n_list=[50], m_grid=[2, 5], a_grid=[1, 3], effect_settings={"mid": [0.5]})
        spec = CalibrationSpec(0.05, 200, 3)
        a = power_rows_to_csv(run_power_curve(NormalMeanT(), spec, **kw))
        b = power_rows_to_csv(run_power_curve(NormalMeanT(), spec, n_jobs=4, **kw))
        assert a == b
