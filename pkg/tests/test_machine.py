import numpy as np
import pytest
from powermarket.base import DataError, DomainError
from powermarket.machine import (
    cpu_load,
    cpu_load_avg,
    cpu_utilization,
    flag_vm_cap,
    load_trace,
    new_host,
    overcommit_percent,
    place_vms,
    size_fleet,
    size_memory,
    step_host,
    trace_from_records,
)
from powermarket.synthetic import contended_trace
from powermarket.types import HostState, MachineSpec, PowerModelSpec, PState, TraceRecord

SPEC = MachineSpec(
    core_count=4,
    max_frequency=2000.0,
    memory_unit_size=1024.0,
    pstates=(PState(0, 2000.0, 1.1, 200.0),),
    power_model=PowerModelSpec(variant="linear", p_idle=50.0, p_max=200.0),
)


def _host(frequency=2000.0, **demands):
    host = new_host(0, SPEC)
    host.current_frequency = frequency
    host.demands = dict(demands)
    return host


class TestSizing:
    def test_double_ceiling(self):
        assert size_fleet(91200.0, 3000.0, 8) == 4
        assert size_fleet(24000.0, 3000.0, 8) == 1
        assert size_fleet(24001.0, 3000.0, 8) == 2

    def test_zero_demand_sizes_to_zero(self):
        assert size_fleet(0.0, 3000.0, 8) == 0

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            size_fleet(100.0, 0.0, 8)
        with pytest.raises(DomainError):
            size_fleet(100.0, 3000.0, 0)
        with pytest.raises(DomainError):
            size_fleet(-1.0, 3000.0, 8)

    def test_matches_smallest_n_search(self):
        generator = np.random.Generator(np.random.PCG64(11))
        for _ in range(10_000):
            psi_d = int(generator.integers(0, 200_000))
            psi_f = int(generator.integers(500, 4_000))
            c = int(generator.integers(1, 65))
            rounded = -(-psi_d // psi_f) * psi_f
            n = 0
            while n * c * psi_f < rounded:
                n += 1
            assert size_fleet(psi_d, psi_f, c) == n

    def test_memory_units(self):
        assert size_memory(32768.0, 4, 4096.0) == 2
        assert size_memory(32769, 4, 4096) == 3
        with pytest.raises(DomainError):
            size_memory(1.0, 0, 4096.0)


class TestTrace:
    def test_zero_order_hold_and_late_vm(self):
        trace = trace_from_records(
            [
                TraceRecord(0, "a", 100.0, 10.0),
                TraceRecord(300, "a", 200.0, 10.0),
                TraceRecord(300, "b", 50.0, 5.0),
                TraceRecord(600, "b", 60.0, 5.0),
            ]
        )
        assert trace.interval == 300
        assert trace.vm_ids == ("a", "b")
        np.testing.assert_array_equal(trace.cpu, [[100.0, 0.0], [200.0, 50.0], [200.0, 60.0]])
        assert trace.psi_d == 260.0
        assert trace.psi_m == 15.0

    def test_negative_demand_names_vm(self):
        with pytest.raises(DataError, match="Negative demand") as excinfo:
            trace_from_records([TraceRecord(0, "a", 1.0, 1.0), TraceRecord(0, "b", -1.0, 1.0)], interval=300)
        assert excinfo.value.details == ["b"]

    def test_duplicate_sample(self):
        with pytest.raises(DataError, match="not strictly increasing"):
            trace_from_records([TraceRecord(0, "a", 1.0, 1.0), TraceRecord(0, "a", 2.0, 1.0)], interval=300)

    def test_unsorted_rows(self):
        with pytest.raises(DataError, match="must be sorted"):
            trace_from_records([TraceRecord(300, "a", 1.0, 1.0), TraceRecord(0, "a", 2.0, 1.0)])

    def test_non_uniform_interval(self):
        records = [TraceRecord(0, "a", 1.0, 1.0), TraceRecord(300, "a", 1.0, 1.0), TraceRecord(900, "a", 1.0, 1.0)]
        with pytest.raises(DataError, match="not uniform"):
            trace_from_records(records)

    def test_configured_interval_must_agree(self):
        with pytest.raises(DataError, match="disagrees"):
            trace_from_records([TraceRecord(0, "a", 1.0, 1.0), TraceRecord(300, "a", 1.0, 1.0)], interval=600)

    def test_empty_trace(self):
        trace = trace_from_records([])
        assert trace.tick_count == 0
        assert trace.psi_d == 0.0

    def test_load_synthetic_csv(self, tmp_path):
        path = tmp_path / "trace.csv"
        contended_trace(seed=1).to_csv(path, index=False)
        trace = load_trace(path)
        assert trace.tick_count == 576
        assert trace.interval == 300
        assert len(trace.vm_ids) == 16
        assert size_fleet(trace.psi_d, 3000.0, 8) == 4

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("timestamp,vm_id\n0,a\n")
        with pytest.raises(DataError, match="missing columns"):
            load_trace(path)

    def test_vm_cap_flags_without_clipping(self):
        trace = trace_from_records([TraceRecord(0, "a", 500.0, 1.0), TraceRecord(0, "b", 50.0, 1.0)], interval=300)
        assert flag_vm_cap(trace, 100.0) == [(0, "a", 500.0)]
        assert trace.cpu[0, 0] == 500.0
        assert flag_vm_cap(trace, None) == []


class TestPlacement:
    def test_round_robin(self):
        assert place_vms(["a", "b", "c", "d", "e"], 2) == {"a": 0, "b": 1, "c": 0, "d": 1, "e": 0}

    def test_no_hosts(self):
        with pytest.raises(DomainError):
            place_vms(["a"], 0)


class TestStepHost:
    def test_within_capacity(self):
        host = _host(a=1000.0, b=3000.0)
        result = step_host(host, 300.0)
        assert result.granted == 4000.0 * 300.0
        assert result.overcommit == 0.0
        assert result.usage == pytest.approx(0.5)
        assert (host.n_run, host.n_queued, host.n_blocked) == (2, 0, 0)

    def test_overcommit_at_low_frequency(self):
        host = _host(frequency=1000.0, a=3000.0, b=3000.0)
        result = step_host(host, 10.0)
        assert result.granted == 4000.0 * 10.0
        assert result.overcommit == 2000.0 * 10.0
        assert result.usage == pytest.approx(0.5)
        assert host.cumulative_overcommit == 20000.0
        assert overcommit_percent([host]) == pytest.approx(100.0 / 3.0)

    def test_queued_tasks(self):
        host = _host(**{f"vm{i}": 10.0 for i in range(6)}, idle=0.0)
        step_host(host, 1.0)
        assert (host.n_run, host.n_queued) == (4, 2)
        assert cpu_load(host.n_run, host.n_queued, host.n_blocked) == 6
        assert cpu_load_avg(6, 4) == 1.5

    def test_accumulators(self):
        host = _host(a=2000.0)
        step_host(host, 100.0)
        step_host(host, 100.0)
        assert host.wall_time == 200.0
        assert host.cpu_time == pytest.approx(50.0)
        assert host.cumulative_idle_time == pytest.approx(150.0)
        assert cpu_utilization(host.cpu_time, host.wall_time) == pytest.approx(0.25)

    def test_negative_demand(self):
        with pytest.raises(DataError, match="Negative CPU demand"):
            step_host(_host(a=-1.0), 1.0)

    def test_non_positive_interval(self):
        with pytest.raises(DomainError):
            step_host(_host(a=1.0), 0.0)


class TestLoadHelpers:
    def test_cpu_load_rejects_negative(self):
        with pytest.raises(DomainError):
            cpu_load(-1, 0, 0)

    def test_cpu_load_avg_zero_cores(self):
        with pytest.raises(DomainError):
            cpu_load_avg(1, 0)

    def test_cpu_utilization_domain(self):
        with pytest.raises(DomainError):
            cpu_utilization(1.0, 0.0)
        with pytest.raises(DomainError):
            cpu_utilization(2.0, 1.0)

    def test_overcommit_percent_without_demand(self):
        assert overcommit_percent([HostState(0, 1, 1.0, 1.0)]) == 0.0
