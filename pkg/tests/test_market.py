import logging

import numpy as np
import pandas as pd
import pytest
from powermarket.base import ConfigError, DataError, DomainError
from powermarket.market import (
    balance_gain,
    hourly_to_isp,
    ingest_imbalance,
    ingest_spot,
    load_price_book,
    market_comparison,
    ondemand_cost,
    price_correlation,
    schedule_day_ahead,
    schedule_quantity,
    settle,
    validate_alignment,
)
from powermarket.types import OnDemandTariff, PriceBook, ProcurementStrategy

START = pd.Timestamp("2021-03-01", tz="UTC")


def _book(spot, shortage=None, surplus=None, start=START):
    """Price book with hourly spot and one imbalance row per ISP of those hours."""
    spot = np.asarray(spot, dtype=float)
    hours = pd.date_range(start, periods=len(spot), freq="h")
    isps = pd.date_range(start, periods=4 * len(spot), freq="15min")
    spot_isp = np.repeat(spot, 4)
    shortage = spot_isp * 2 if shortage is None else np.asarray(shortage, dtype=float)
    surplus = spot_isp if surplus is None else np.asarray(surplus, dtype=float)
    imbalance = pd.DataFrame(
        {"shortage": shortage, "surplus": surplus, "regulation_state": np.zeros(len(isps), dtype=int)},
        index=isps,
    )
    return PriceBook(spot=pd.Series(spot, index=hours), imbalance=imbalance)


def _series(values, start=START):
    return pd.Series(np.asarray(values, dtype=float), index=pd.date_range(start, periods=len(values), freq="15min"))


def _write(path, header, rows):
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


class TestIngest:
    def test_spot_day(self, tmp_path):
        rows = [f"2021-03-01T{hour:02d}:00:00+00:00,{40 + hour}" for hour in range(24)]
        spot = ingest_spot(_write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", rows))
        assert len(spot) == 24
        assert spot.iloc[5] == 45.0
        assert str(spot.index.tz) == "UTC"

    def test_offsets_are_converted_to_utc(self, tmp_path):
        rows = ["2021-03-01T00:00:00+01:00,50", "2021-03-01T01:00:00+01:00,51"]
        spot = ingest_spot(_write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", rows))
        assert spot.index[0] == pd.Timestamp("2021-02-28 23:00", tz="UTC")
        assert spot.index[1] == pd.Timestamp("2021-03-01 00:00", tz="UTC")

    def test_zulu_suffix_accepted(self, tmp_path):
        spot = ingest_spot(_write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", ["2021-03-01T00:00:00Z,50"]))
        assert spot.index[0] == START

    def test_naive_timestamps_rejected(self, tmp_path):
        path = _write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", ["2021-03-01T00:00:00,50"])
        with pytest.raises(DataError) as excinfo:
            ingest_spot(path)
        assert "offset" in str(excinfo.value)

    def test_off_grid_hour_rejected(self, tmp_path):
        path = _write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", ["2021-03-01T00:30:00+00:00,50"])
        with pytest.raises(DataError):
            ingest_spot(path)

    def test_duplicates_rejected(self, tmp_path):
        rows = ["2021-03-01T00:00:00+00:00,50", "2021-03-01T01:00:00+01:00,51"]
        with pytest.raises(DataError):
            ingest_spot(_write(tmp_path / "spot.csv", "hour_start_iso8601,price_eur_mwh", rows))

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataError):
            ingest_spot(_write(tmp_path / "spot.csv", "hour_start_iso8601,price", ["2021-03-01T00:00:00Z,50"]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            ingest_spot(tmp_path / "absent.csv")

    def test_imbalance_day(self, tmp_path):
        isps = pd.date_range(START, periods=96, freq="15min")
        rows = [f"{isp.isoformat()},{100 + i},{90 + i},{i % 3 - 1}" for i, isp in enumerate(isps)]
        header = "isp_start_iso8601,shortage_eur_mwh,surplus_eur_mwh,regulation_state"
        imbalance = ingest_imbalance(_write(tmp_path / "imbalance.csv", header, rows))
        assert len(imbalance) == 96
        assert list(imbalance.columns) == ["shortage", "surplus", "regulation_state"]
        assert imbalance["shortage"].iloc[10] == 110.0
        assert imbalance["regulation_state"].iloc[0] == -1

    def test_imbalance_off_grid(self, tmp_path):
        header = "isp_start_iso8601,shortage_eur_mwh,surplus_eur_mwh,regulation_state"
        path = _write(tmp_path / "imbalance.csv", header, ["2021-03-01T00:05:00+00:00,1,1,0"])
        with pytest.raises(DataError):
            ingest_imbalance(path)

    def test_non_numeric_price(self, tmp_path):
        header = "isp_start_iso8601,shortage_eur_mwh,surplus_eur_mwh,regulation_state"
        path = _write(tmp_path / "imbalance.csv", header, ["2021-03-01T00:00:00+00:00,high,1,0"])
        with pytest.raises(DataError):
            ingest_imbalance(path)


class TestAlignment:
    def test_book_from_files(self, tmp_path):
        spot = _write(
            tmp_path / "spot.csv",
            "hour_start_iso8601,price_eur_mwh",
            [f"2021-03-01T{hour:02d}:00:00+00:00,50" for hour in range(24)],
        )
        isps = pd.date_range(START, periods=96, freq="15min")
        imbalance = _write(
            tmp_path / "imbalance.csv",
            "isp_start_iso8601,shortage_eur_mwh,surplus_eur_mwh,regulation_state",
            [f"{isp.isoformat()},80,40,0" for isp in isps],
        )
        book = load_price_book(spot, imbalance)
        assert book.isp_length == 900
        assert len(book.imbalance) == 96

    def test_hour_without_spot(self):
        book = _book([50.0, 51.0])
        book = PriceBook(spot=book.spot.iloc[:1], imbalance=book.imbalance)
        with pytest.raises(DataError) as excinfo:
            validate_alignment(book)
        assert excinfo.value.details == [START + pd.Timedelta(hours=1)]

    def test_incomplete_day_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            validate_alignment(_book([50.0] * 3))
        assert "ISPs" in caplog.text


class TestScheduleQuantity:
    def test_quantile_one_is_the_maximum(self):
        quantities = schedule_quantity([1, 2, 3, 4], ProcurementStrategy(kind="quantile_scalar", q=1.0, s=1.0))
        np.testing.assert_allclose(quantities, [4.0] * 4)

    def test_quantile_zero_matches_base_load(self):
        quantile = schedule_quantity([1, 2, 3, 4], ProcurementStrategy(kind="quantile_scalar", q=0.0, s=1.0))
        base = schedule_quantity([1, 2, 3, 4], ProcurementStrategy(kind="base_load"))
        np.testing.assert_allclose(quantile, [1.0] * 4)
        np.testing.assert_allclose(base, quantile)

    def test_interpolated_median_scaled(self):
        quantities = schedule_quantity([1, 2, 3, 4], ProcurementStrategy(kind="quantile_scalar", q=0.5, s=1.2))
        np.testing.assert_allclose(quantities, [3.0] * 4)

    def test_price_aware(self):
        strategy = ProcurementStrategy(kind="price_aware")
        quantities = schedule_quantity([1, 2, 3, 4], strategy, spot=[40, 90, 40, 90], shortage=[80, 80, 80, 80])
        np.testing.assert_allclose(quantities, [1.0, 1.0, 3.0, 1.0])

    def test_price_aware_needs_prices(self):
        with pytest.raises(DomainError):
            schedule_quantity([1, 2], ProcurementStrategy(kind="price_aware"))
        with pytest.raises(DomainError):
            schedule_quantity([1, 2], ProcurementStrategy(kind="price_aware"), spot=[1.0], shortage=[1.0, 2.0])

    def test_empty_or_negative_forecast(self):
        with pytest.raises(DomainError):
            schedule_quantity([], ProcurementStrategy(kind="base_load"))
        with pytest.raises(DomainError):
            schedule_quantity([1.0, -0.5], ProcurementStrategy(kind="base_load"))

    def test_strategy_ranges(self):
        with pytest.raises(ConfigError):
            ProcurementStrategy(kind="quantile_scalar", q=1.5)
        with pytest.raises(ConfigError):
            ProcurementStrategy(kind="quantile_scalar", s=0.9)
        with pytest.raises(ConfigError):
            ProcurementStrategy(kind="quantile_scalar", s=1.31)

    def test_non_decreasing_in_q_and_s(self):
        generator = np.random.default_rng(11)
        qs = np.linspace(0.0, 1.0, 11)
        ss = np.linspace(0.97, 1.30, 12)
        for _ in range(50):
            forecast = generator.uniform(0.0, 5.0, size=24)
            grid = np.array(
                [[schedule_quantity(forecast, ProcurementStrategy(kind="quantile_scalar", q=q, s=s))[0] for s in ss] for q in qs]
            )
            assert (np.diff(grid, axis=0) >= -1e-12).all()
            assert (np.diff(grid, axis=1) >= -1e-12).all()


class TestScheduleDayAhead:
    def test_each_day_scheduled_separately(self):
        hours = pd.date_range(START, periods=48, freq="h")
        forecast = pd.Series(np.r_[np.full(24, 1.0), np.full(24, 3.0)], index=hours)
        forecast.iloc[5] = 0.5
        scheduled = schedule_day_ahead(forecast, ProcurementStrategy(kind="base_load"))
        assert (scheduled.iloc[:24] == 0.5).all()
        assert (scheduled.iloc[24:] == 3.0).all()

    def test_empty_forecast(self):
        empty = pd.Series(dtype=float, index=pd.DatetimeIndex([], tz="UTC"))
        assert schedule_day_ahead(empty, ProcurementStrategy(kind="base_load")).empty

    def test_price_aware_uses_mean_shortage(self):
        book = _book([40.0, 90.0], shortage=[80.0] * 8)
        forecast = pd.Series([2.0, 3.0], index=book.spot.index)
        scheduled = schedule_day_ahead(forecast, ProcurementStrategy(kind="price_aware"), book)
        assert list(scheduled) == [2.0, 2.0]
        with pytest.raises(DomainError):
            schedule_day_ahead(forecast, ProcurementStrategy(kind="price_aware"))

    def test_hourly_to_isp(self):
        hourly = pd.Series([4.0, 8.0], index=pd.date_range(START, periods=2, freq="h"))
        isp = hourly_to_isp(hourly)
        assert len(isp) == 8
        assert isp.index[1] == START + pd.Timedelta(minutes=15)
        assert list(isp) == [1.0] * 4 + [2.0] * 4
        assert isp.sum() == pytest.approx(hourly.sum())


class TestSettle:
    def test_perfect_dispatch(self):
        book = _book([50.0])
        energy = _series([0.25] * 4)
        result = settle(book, "two", energy, energy.copy())
        assert result.imbalance_cost == 0.0
        assert result.day_ahead_cost == pytest.approx(50.0)
        assert result.total == pytest.approx(50.0)

    def test_shortage_cost(self):
        book = _book([40.0], shortage=[100.0] * 4, surplus=[60.0] * 4)
        result = settle(book, "one", _series([0.25]), _series([0.30]))
        assert result.shortage_cost == pytest.approx(5.0)
        assert result.surplus_refund == 0.0
        line = result.lines[0]
        assert line.shortage == pytest.approx(0.05)
        assert line.surplus == 0.0

    def test_surplus_refund_one_vs_two_price(self):
        book = _book([40.0], shortage=[100.0] * 4, surplus=[60.0] * 4)
        one = settle(book, "one", _series([0.30]), _series([0.25]))
        two = settle(book, "two", _series([0.30]), _series([0.25]))
        assert one.surplus_refund == pytest.approx(3.0)
        assert two.surplus_refund == pytest.approx(2.0)

    def test_negative_prices_keep_sign(self):
        book = _book([-10.0], shortage=[-20.0] * 4, surplus=[-30.0] * 4)
        result = settle(book, "two", _series([0.30, 0.20]), _series([0.25, 0.25]))
        assert result.day_ahead_cost == pytest.approx(-5.0)
        assert result.shortage_cost == pytest.approx(-1.0)
        assert result.surplus_refund == pytest.approx(-0.5)
        assert result.total == pytest.approx(-5.5)

    def test_lines_never_short_and_long(self):
        generator = np.random.default_rng(3)
        book = _book(generator.uniform(10, 90, size=6))
        result = settle(book, "one", _series(generator.uniform(0, 1, 24)), _series(generator.uniform(0, 1, 24)))
        assert all(line.shortage * line.surplus == 0.0 for line in result.lines)
        assert sum(line.cost for line in result.lines) == pytest.approx(result.total)
        assert len(result.to_frame()) == 24

    def test_additive_over_disjoint_isps(self):
        generator = np.random.default_rng(5)
        book = _book(generator.uniform(10, 90, size=4), shortage=generator.uniform(50, 150, 16), surplus=generator.uniform(0, 80, 16))
        scheduled, delivered = _series(generator.uniform(0, 1, 16)), _series(generator.uniform(0, 1, 16))
        whole = settle(book, "one", scheduled, delivered)
        first = settle(book, "one", scheduled.iloc[:7], delivered.iloc[:7])
        rest = settle(book, "one", scheduled.iloc[7:], delivered.iloc[7:])
        assert whole.total == pytest.approx(first.total + rest.total)

    def test_errors(self):
        book = _book([50.0])
        with pytest.raises(DomainError):
            settle(book, "three", _series([0.1]), _series([0.1]))
        with pytest.raises(DomainError):
            settle(book, "one", _series([0.1, 0.1]), _series([0.1]))
        with pytest.raises(DataError) as excinfo:
            settle(book, "one", _series([0.1] * 5), _series([0.1] * 5))
        assert excinfo.value.details == [START + pd.Timedelta(hours=1)]


class TestSettlementProperties:
    CASES = 1000

    @staticmethod
    def _case(generator):
        hours = int(generator.integers(1, 4))
        spot = generator.uniform(-20.0, 120.0, size=hours)
        isps = 4 * hours
        delivered = _series(generator.uniform(0.0, 2.0, isps))
        return spot, isps, delivered

    def test_two_price_over_scheduling_is_neutral(self):
        generator = np.random.default_rng(2024)
        for _ in range(self.CASES):
            spot, isps, delivered = self._case(generator)
            book = _book(spot, shortage=generator.uniform(0, 200, isps), surplus=generator.uniform(-50, 200, isps))
            scheduled = delivered + generator.uniform(0.0, 0.5, isps)
            extra = scheduled + generator.uniform(0.0, 1.0, isps)
            base = settle(book, "two", scheduled, delivered).total
            over = settle(book, "two", extra, delivered).total
            assert over - base == pytest.approx(0.0, abs=1e-9)

    def test_one_price_over_scheduling_profits_when_surplus_beats_spot(self):
        generator = np.random.default_rng(2025)
        for _ in range(self.CASES):
            spot, isps, delivered = self._case(generator)
            spot_isp = np.repeat(spot, 4)
            surplus = spot_isp + generator.uniform(0.0, 30.0, isps)
            surplus[int(generator.integers(0, isps))] += 1.0
            book = _book(spot, shortage=generator.uniform(0, 200, isps), surplus=surplus)
            scheduled = delivered + generator.uniform(0.0, 0.5, isps)
            extra = scheduled + 0.1
            assert settle(book, "one", extra, delivered).total < settle(book, "one", scheduled, delivered).total

    def test_one_and_two_price_agree_when_surplus_is_spot(self):
        generator = np.random.default_rng(2026)
        for _ in range(self.CASES):
            spot, isps, delivered = self._case(generator)
            book = _book(spot, shortage=generator.uniform(0, 200, isps), surplus=np.repeat(spot, 4))
            scheduled = _series(generator.uniform(0.0, 2.0, isps))
            one = settle(book, "one", scheduled, delivered).total
            two = settle(book, "two", scheduled, delivered).total
            assert one == pytest.approx(two, rel=1e-12, abs=1e-12)


class TestTariffsAndComparison:
    def test_ondemand_cost(self):
        assert ondemand_cost(0.0, OnDemandTariff("low", 60.0)) == 0.0
        assert ondemand_cost(10.0, OnDemandTariff("mid", 50.0)) == 500.0
        with pytest.raises(DomainError):
            ondemand_cost(-1.0, OnDemandTariff("low", 60.0))
        with pytest.raises(ConfigError):
            OnDemandTariff("high", 0.0)

    def test_balance_gain(self):
        assert balance_gain(10.0, 10.0, 30.0) == 0.0
        assert balance_gain(12.0, 10.0, 30.0) == 60.0
        assert balance_gain(12.0, 10.0, -30.0) == -60.0

    def test_market_comparison(self):
        book = _book([40.0], shortage=[100.0] * 4)
        tariffs = [OnDemandTariff("low", 60.0), OnDemandTariff("high", 240.0)]
        costs = market_comparison(book, _series([0.25] * 4), tariffs)
        assert costs["day_ahead"] == pytest.approx(40.0)
        assert costs["balancing"] == pytest.approx(100.0)
        assert costs["on_demand_low"] == pytest.approx(60.0)
        assert costs["on_demand_high"] == pytest.approx(240.0)

    def test_price_correlation(self):
        spot = np.linspace(20.0, 80.0, 6)
        book = _book(spot, shortage=2.0 * np.repeat(spot, 4), surplus=np.full(24, 10.0))
        correlation = price_correlation(book)
        assert correlation["spot_shortage"][0] == pytest.approx(1.0)
        assert correlation["spot_shortage"][1] < 0.01
        assert np.isnan(correlation["spot_surplus"][0])
