import numpy as np
import pandas as pd
import pytest
from powermarket.base import ConfigError, DataError, DomainError
from powermarket.forecast import (
    aa_sweep,
    agreement_accuracy,
    forecast_series,
    load_inferences,
    select_inference,
    split_seeds,
    synth_forecast,
)
from powermarket.synthetic import price_history
from powermarket.types import IspForecast
from scipy.stats import spearmanr

TARGET = pd.Timestamp("2021-03-01 12:15", tz="UTC")
HEADER = "prediction_time_iso8601,target_isp_start_iso8601,predicted_shortage_eur_mwh"


def _inference_file(path, rows):
    path.write_text("\n".join([HEADER] + rows) + "\n", encoding="utf-8")
    return path


def _row(minutes_before, value, target=TARGET):
    return f"{(target - pd.Timedelta(minutes=minutes_before)).isoformat()},{target.isoformat()},{value}"


class TestLoadInferences:
    def test_groups_by_target_in_time_order(self, tmp_path):
        rows = [_row(5, 30.0), _row(15, 10.0), _row(10, 20.0)]
        forecasts = load_inferences(_inference_file(tmp_path / "inferences.csv", rows))
        assert list(forecasts) == [TARGET]
        assert forecasts[TARGET].minute_predictions == (10.0, 20.0, 30.0)

    def test_missing_minutes_are_allowed(self, tmp_path):
        rows = [_row(minutes, minutes) for minutes in range(15, 0, -1) if minutes != 8]
        forecasts = load_inferences(_inference_file(tmp_path / "inferences.csv", rows))
        assert len(forecasts[TARGET].minute_predictions) == 14

    def test_prediction_outside_preceding_isp(self, tmp_path):
        path = _inference_file(tmp_path / "inferences.csv", [_row(16, 10.0)])
        with pytest.raises(DataError) as excinfo:
            load_inferences(path)
        assert excinfo.value.details == [TARGET]
        with pytest.raises(DataError):
            load_inferences(_inference_file(tmp_path / "late.csv", [_row(0, 10.0)]))

    def test_too_many_predictions(self, tmp_path):
        rows = [_row(15 - second / 60.0, 1.0) for second in range(0, 16 * 50, 50)]
        with pytest.raises(DataError):
            load_inferences(_inference_file(tmp_path / "inferences.csv", rows))

    def test_naive_timestamps(self, tmp_path):
        path = _inference_file(tmp_path / "inferences.csv", ["2021-03-01T12:00:00,2021-03-01T12:15:00,1.0"])
        with pytest.raises(DataError):
            load_inferences(path)

    def test_missing_file_and_columns(self, tmp_path):
        with pytest.raises(DataError):
            load_inferences(tmp_path / "absent.csv")
        path = tmp_path / "bad.csv"
        path.write_text("prediction_time_iso8601,value\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_inferences(path)


class TestSelectInference:
    @pytest.mark.parametrize("mode, expected", [("first", 10.0), ("last", 30.0), ("average", 20.0)])
    def test_modes(self, mode, expected):
        assert select_inference(IspForecast(TARGET, (10.0, 20.0, 30.0)), mode) == expected

    @pytest.mark.parametrize("mode", ["first", "last", "average"])
    def test_single_prediction(self, mode):
        assert select_inference(IspForecast(TARGET, (7.0,)), mode) == 7.0

    def test_empty_and_unknown(self):
        with pytest.raises(DomainError):
            select_inference(IspForecast(TARGET, ()), "first")
        with pytest.raises(DomainError):
            select_inference(IspForecast(TARGET, (1.0,)), "median")

    def test_forecast_series(self):
        later = TARGET + pd.Timedelta(minutes=15)
        series = forecast_series({later: IspForecast(later, (4.0,)), TARGET: IspForecast(TARGET, (1.0, 3.0))}, "average")
        assert list(series.index) == [TARGET, later]
        assert list(series) == [2.0, 4.0]
        assert forecast_series({}, "first").empty


class TestSynthForecast:
    def test_zero_sigma_is_exact(self):
        actual = np.array([-12.5, 0.0, 48.25, 300.0])
        np.testing.assert_array_equal(synth_forecast(actual, 0.0, 42), actual)

    def test_seeded(self):
        actual = np.linspace(0.0, 100.0, 50)
        np.testing.assert_array_equal(synth_forecast(actual, 25.0, 7), synth_forecast(actual, 25.0, 7))
        assert not np.array_equal(synth_forecast(actual, 25.0, 7), synth_forecast(actual, 25.0, 8))

    def test_noise_scale(self):
        actual = np.full(10_000, 50.0)
        noise = synth_forecast(actual, 100.0, 1) - actual
        assert 97.0 <= noise.std(ddof=1) <= 103.0

    def test_keeps_series_index(self):
        actual = pd.Series([1.0, 2.0], index=pd.date_range(TARGET, periods=2, freq="15min"))
        forecast = synth_forecast(actual, 1.0, 0)
        assert forecast.index.equals(actual.index)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            synth_forecast([1.0], -1.0, 0)

    def test_split_seeds(self):
        seeds = split_seeds(0, 30)
        assert len(set(seeds)) == 30
        assert seeds == split_seeds(0, 30)
        assert split_seeds(0, 5) == seeds[:5]
        assert seeds != split_seeds(1, 30)


class TestAgreementAccuracy:
    def test_perfect_forecast(self):
        p_b = np.array([50.0, -5.0, 0.0, 80.0])
        assert agreement_accuracy(p_b, p_b, np.full(4, 40.0)) == 1.0

    def test_double_disagreement_counts_literally(self):
        assert agreement_accuracy([50.0], [-10.0], [40.0], "literal") == 1.0
        assert agreement_accuracy([50.0], [-10.0], [40.0], "conjunction") == 0.0

    def test_both_bits_agree(self):
        assert agreement_accuracy([50.0], [45.0], [40.0], "literal") == 1.0
        assert agreement_accuracy([50.0], [45.0], [40.0], "conjunction") == 1.0

    def test_single_disagreement(self):
        # same sign, opposite sides of spot
        assert agreement_accuracy([50.0], [30.0], [40.0]) == 0.0

    def test_zero_sign(self):
        assert agreement_accuracy([0.0], [0.0], [0.0]) == 1.0
        assert agreement_accuracy([40.0], [41.0], [40.0], "conjunction") == 0.0

    def test_order_invariant_and_bounded(self):
        generator = np.random.default_rng(9)
        p_b, p_f, p_s = (generator.normal(40.0, 60.0, 500) for _ in range(3))
        score = agreement_accuracy(p_b, p_f, p_s)
        order = generator.permutation(500)
        assert 0.0 <= score <= 1.0
        assert agreement_accuracy(p_b[order], p_f[order], p_s[order]) == score

    def test_errors(self):
        with pytest.raises(DomainError):
            agreement_accuracy([1.0, 2.0], [1.0], [1.0, 2.0])
        with pytest.raises(DomainError):
            agreement_accuracy([], [], [])
        with pytest.raises(DomainError):
            agreement_accuracy([1.0], [1.0], [1.0], "either")


class TestAaSweep:
    @pytest.fixture(scope="class")
    def history(self):
        spot, imbalance = price_history("2021-01-01", days=53, seed=4, shortage_ratio=0.5)
        p_b = imbalance["shortage_eur_mwh"].to_numpy()[:5000]
        p_s = np.repeat(spot["price_eur_mwh"].to_numpy(), 4)[:5000]
        return p_b, p_s

    def test_history_has_prices_between_zero_and_spot(self, history):
        p_b, p_s = history
        assert len(p_b) == 5000
        assert ((0 < p_b) & (p_b < p_s)).all()

    def test_zero_sigma_scores_one(self, history):
        p_b, p_s = history
        rows = aa_sweep(p_b, p_s, [0.0], seeds=30)
        assert rows["mean_aa"].iloc[0] == 1.0
        assert rows["min_aa"].iloc[0] == 1.0

    @pytest.mark.parametrize("mode", ["literal", "conjunction"])
    def test_mean_aa_falls_with_sigma(self, history, mode):
        p_b, p_s = history
        sigmas = np.arange(0.0, 1201.0, 100.0)
        rows = aa_sweep(p_b, p_s, sigmas, seeds=30, base_seed=0, mode=mode)
        assert list(rows.columns) == ["sigma", "mean_aa", "std_aa", "min_aa", "max_aa"]
        assert (np.diff(rows["mean_aa"].to_numpy()) <= 0).all()
        rho, p_value = spearmanr(rows["sigma"], rows["mean_aa"])
        assert rho <= 0
        assert p_value < 0.01

    def test_needs_a_seed(self, history):
        p_b, p_s = history
        with pytest.raises(DomainError):
            aa_sweep(p_b, p_s, [0.0], seeds=0)
