import math

import pytest

from agdesign.design import Design1
from agdesign.harness import (
    TABLE_COLUMNS,
    SimulationResult,
    empirical_power,
    nominal_power_at,
    reproduce_table,
    resolve_workers,
    table_cases,
)
from agdesign.power import NonInferiority, Superiority
from agdesign.rates import Weibull
from agdesign.variance import TrialScenario

SC = TrialScenario(Design1(1.0), Weibull(1.1, 1.2), 0.6, 0.8, delta0=0.25)


class TestEmpiricalPower:
    def test_invariants(self):
        r = empirical_power(SC, Superiority(), 200, replicates=150, master_seed=3)
        assert r.replicates == 150
        assert r.empirical_power == r.rejections / 150
        assert r.mc_stderr == pytest.approx(math.sqrt(r.empirical_power * (1 - r.empirical_power) / 150))
        assert 0 <= r.coverage <= 1 and r.degenerate_count == 0

    def test_single_replicate(self):
        r = empirical_power(SC, Superiority(), 100, replicates=1, master_seed=1)
        assert r.empirical_power in (0.0, 1.0)

    def test_rejects_zero_replicates(self):
        with pytest.raises(ValueError):
            empirical_power(SC, Superiority(), 100, replicates=0)

    def test_same_seed_same_result(self):
        a = empirical_power(SC, Superiority(), 150, replicates=120, master_seed=42)
        b = empirical_power(SC, Superiority(), 150, replicates=120, master_seed=42)
        assert a.to_dict() == b.to_dict()

    def test_worker_count_does_not_matter(self):
        a = empirical_power(SC, Superiority(), 150, replicates=60, master_seed=42, workers=1)
        b = empirical_power(SC, Superiority(), 150, replicates=60, master_seed=42, workers=3)
        assert a.to_dict() == b.to_dict()

    def test_to_dict_drops_timing(self):
        r = SimulationResult(10, 5, 0.5, 0.1, 0, 0.9, -0.5, wall_time=1.23)
        assert "wall_time" not in r.to_dict()
        assert r.to_dict(timing=True)["wall_time"] == 1.23

    def test_resolve_workers(self, monkeypatch):
        monkeypatch.setenv("AGDESIGN_THREADS", "3")
        assert resolve_workers(None) == 3
        assert resolve_workers(2) == 2
        assert resolve_workers(0) >= 1


class TestTables:
    @pytest.mark.parametrize("table,count", [(1, 48), (2, 48), (3, 8)])
    def test_case_counts(self, table, count):
        assert len(table_cases(table)) == count

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            table_cases(4)

    @pytest.mark.parametrize("table", [1, 3])
    def test_exact_reproduction(self, table):
        for row in reproduce_table(table):
            assert row["total_size"] == row["ref_size"], row
            assert abs(row["nominal_power"] - row["ref_nominal"]) <= 0.0051, row
            assert row["simulated_power"] is None
            assert set(TABLE_COLUMNS) <= set(row)

    def test_first_rows(self):
        rows = reproduce_table(1)
        assert (rows[0]["kappa0"], rows[0]["psi"], rows[0]["nu"], rows[0]["total_size"]) == (0.4, 1.1, 0.9, 289)
        assert round(rows[0]["nominal_power"], 2) == 90.05
        t3 = reproduce_table(3)
        ni = [r for r in t3 if r["hypothesis"] == "noninferiority"]
        assert [r["total_size"] for r in ni] == [547, 1153, 675, 1429]

    def test_simulated_column(self):
        rows = reproduce_table(3, replicates=20, seed=1)
        assert all(0 <= r["simulated_power"] <= 100 for r in rows)

    def test_nominal_power_at(self):
        assert nominal_power_at(SC, Superiority(), 365) == pytest.approx(0.9003, abs=5e-5)
        with pytest.raises(ValueError):
            nominal_power_at(SC, NonInferiority(0.5), 365)
