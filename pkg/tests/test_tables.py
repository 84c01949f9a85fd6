import pytest
from powermarket.base import ConfigError
from powermarket.tables import (
    DEFAULT_LADDER,
    DEFAULT_RUNG,
    ISP_SECONDS,
    ISPS_PER_DAY,
    ISPS_PER_HOUR,
    TITANIUM_EFFICIENCY,
    governor_from_name,
    power_model_from_name,
)


class TestConstants:
    def test_titanium_curve(self):
        assert TITANIUM_EFFICIENCY == ((10.0, 90.0), (20.0, 94.0), (50.0, 96.0), (100.0, 91.0))

    def test_ladder_order(self):
        assert DEFAULT_LADDER == ("performance", "ondemand", "conservative", "powersave")
        assert DEFAULT_RUNG == "ondemand"

    def test_isp_grid(self):
        assert ISP_SECONDS * ISPS_PER_HOUR == 3600
        assert ISPS_PER_DAY == 96


class TestGovernorFromName:
    def test_case_insensitive(self):
        assert governor_from_name("Ondemand") == "ondemand"
        assert governor_from_name(" POWERSAVE ") == "powersave"

    def test_unknown_governor(self):
        with pytest.raises(ConfigError, match="Unknown governor 'schedutil'"):
            governor_from_name("schedutil")


class TestPowerModelFromName:
    def test_aliases(self):
        assert power_model_from_name("AsymptoticDvfs") == "asymptotic_dvfs"
        assert power_model_from_name("asymptotic-dvfs") == "asymptotic_dvfs"
        assert power_model_from_name("Linear") == "linear"

    def test_unknown_model(self):
        with pytest.raises(ConfigError, match="Unknown power model 'quartic'"):
            power_model_from_name("quartic")
