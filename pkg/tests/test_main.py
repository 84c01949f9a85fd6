import json

import pytest
from main import exit_code, main
from powermarket.base import ConfigError, DataError, DomainError, FetchError, SimulationError


def _exit_status(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    directory = tmp_path_factory.mktemp("cli")
    assert _exit_status(["make-scenario", "--out", str(directory), "--seed", "0"]) == 0
    return directory


class TestExitCodes:
    def test_mapping(self):
        assert exit_code(ConfigError("bad key")) == 2
        assert exit_code(DataError("bad row")) == 3
        assert exit_code(DomainError("bad value")) == 3
        assert exit_code(FetchError("offline")) == 1
        assert exit_code(RuntimeError("boom")) == 1

    def test_simulation_errors_follow_their_cause(self):
        for cause, code in ((DataError("gap"), 3), (ConfigError("bad"), 2), (ValueError("odd"), 1)):
            error = SimulationError(str(cause), 4, 1200)
            error.__cause__ = cause
            assert exit_code(error) == code
        assert exit_code(SimulationError("no cause", 0, 0)) == 1

    def test_missing_config(self, tmp_path):
        assert _exit_status(["simulate", "--config", str(tmp_path / "absent.yaml")]) == 2

    def test_broken_trace(self, scenario, tmp_path):
        (tmp_path / "trace.csv").write_text("timestamp,vm_id,cpu_demand_mhz,memory_mb\n300,vm0,-5,10\n", encoding="utf-8")
        config = tmp_path / "scenario.yaml"
        config.write_bytes((scenario / "scenario.yaml").read_bytes())
        for name in ("pstates.csv", "spot.csv", "imbalance.csv", "inferences.csv"):
            (tmp_path / name).write_bytes((scenario / name).read_bytes())
        assert _exit_status(["simulate", "--config", str(config), "--out", str(tmp_path / "out")]) == 3

    def test_bad_range(self, scenario):
        assert _exit_status(["aa-eval", "--config", str(scenario / "scenario.yaml"), "--sigma", "5:1:1"]) == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["forecast-everything"])
        assert excinfo.value.code == 2


class TestCommands:
    def test_simulate_then_settle(self, scenario, capsys):
        out = scenario / "report"
        assert _exit_status(["simulate", "--config", str(scenario / "scenario.yaml"), "--out", str(out)]) == 0
        assert (out / "summary.json").is_file()
        capsys.readouterr()

        assert _exit_status(["settle", "--report", str(out), "--config", str(scenario / "scenario.yaml"), "--system", "one"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["system"] == "one"
        assert summary["total_eur"] == pytest.approx(summary["day_ahead_eur"] + summary["shortage_eur"] - summary["surplus_refund_eur"])
        assert (out / "settlement_one.csv").is_file()

        assert _exit_status(["plot-data", "--report", str(out), "--figure", "costs", "--out", str(out / "costs.csv")]) == 0
        assert (out / "costs.csv").read_text(encoding="utf-8").startswith("x,series,value")

        assert _exit_status(
            ["sweep-procurement", "--report", str(out), "--config", str(scenario / "scenario.yaml"), "--q", "0:1:0.5", "--s", "1", "--out", str(out)]
        ) == 0
        assert (out / "procurement.csv").is_file()

    def test_aa_eval(self, scenario):
        out = scenario / "aa"
        argv = ["aa-eval", "--config", str(scenario / "scenario.yaml"), "--sigma", "0:200:100", "--seeds", "2", "--out", str(out)]
        assert _exit_status(argv) == 0
        assert (out / "aa.csv").read_text(encoding="utf-8").splitlines()[0] == "sigma,mean_aa,std_aa,min_aa,max_aa"

    def test_sweep_damping_needs_the_scheduler(self, scenario):
        assert _exit_status(["sweep-damping", "--config", str(scenario / "scenario.yaml"), "--factors", "0:10:10"]) == 2
