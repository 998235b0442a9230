"""Acceptance suite: one test (or test group) per acceptance criterion.

Each check records its outcome; the pass/fail line per criterion is printed
in the terminal summary (and inline with ``-s``).
"""
import io
import json
import math
import pathlib
import time

import pytest

from agdesign.agfit import fit, log_partial_likelihood, score
from agdesign.cli import run_cli
from agdesign.design import Design1, Design2, exposure_moments, exposure_moments_quadrature
from agdesign.harness import empirical_power, table_cases
from agdesign.numerics import RngStream
from agdesign.power import NonInferiority, sample_size
from agdesign.rates import Weibull
from agdesign.simulate import simulate_trial
from agdesign.variance import TrialScenario, nb_limit_check, variance_equal_dropout, variance_general

from conftest import PIECEWISE_LONG, record
from test_agfit import _naive

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"
REPS = 5000
SEED = 2024


def _golden(cases, variance_for):
    bad = []
    for case in cases:
        v = variance_for(case)
        res = sample_size(case.scenario, case.hypothesis, case.target_power, v)
        size, nominal, _ = case.reference
        if abs(res.total_n - size) > 1 or abs(100 * res.nominal_power - nominal) > 0.1:
            bad.append((case.label(), res.total_n, size, round(100 * res.nominal_power, 3), nominal))
    return bad


class TestCriterion1:
    def test_table1_sizes(self):
        t0 = time.perf_counter()
        cases = table_cases(1)
        bad = _golden(cases, lambda c: variance_equal_dropout(c.scenario).v_beta)
        elapsed = time.perf_counter() - t0
        ok = not bad and len(cases) == 48 and elapsed < 1.0
        record(1, "", ok, f"{48 - len(bad)}/48 cells within 1 subject and 0.1 pp, {elapsed:.2f} s")
        assert not bad, bad
        assert len(cases) == 48
        assert elapsed < 1.0


class TestCriterion2:
    def test_table2_sizes(self):
        cases = table_cases(2)
        disp = [c for c in cases if c.block == "unequal_dispersion"]
        drop = [c for c in cases if c.block == "unequal_dropout"]
        assert all(c.scenario.kappa0 != c.scenario.kappa1 for c in disp)
        assert all(c.scenario.delta0 == 0.35 and c.scenario.delta1 == 0.15 for c in drop)
        bad = _golden(disp, lambda c: variance_equal_dropout(c.scenario).v_beta)
        bad += _golden(drop, lambda c: variance_general(c.scenario).v_beta)
        record(2, "", not bad, f"{len(cases) - len(bad)}/{len(cases)} cells within 1 subject")
        assert not bad, bad


class TestCriterion3:
    def test_table3_sizes(self):
        cases = table_cases(3)
        bad = _golden(cases, lambda c: variance_equal_dropout(c.scenario).v_beta)
        sizes = [sample_size(c.scenario, c.hypothesis, 0.8).total_n for c in cases]
        record(3, "", not bad, f"sizes {sizes}")
        assert not bad, bad


def _row(table, block, design, pred):
    for c in table_cases(table):
        if c.block == block and c.design == design and pred(c.scenario):
            return c
    raise LookupError


class TestCriterion4:
    CASES = {
        "T1 D1": lambda: _row(1, "balanced", "design1", lambda s: (s.kappa0, s.rate.psi, s.rate.nu) == (0.8, 1.1, 1.2)),
        "T1 D2": lambda: _row(1, "balanced", "design2", lambda s: (s.kappa0, s.rate.psi, s.rate.nu) == (0.8, 1.1, 1.2)),
        "T3 NI": lambda: _row(3, "noninferiority", "design1", lambda s: (s.kappa0, s.rate_ratio) == (0.8, 0.9)),
        "T3 EQ": lambda: _row(3, "equivalence", "design1", lambda s: (s.kappa0, s.rate_ratio) == (0.8, 1.0)),
    }

    @pytest.mark.slow
    @pytest.mark.parametrize("name", list(CASES))
    def test_monte_carlo_calibration(self, name):
        case = self.CASES[name]()
        size = sample_size(case.scenario, case.hypothesis, case.target_power)
        sim = empirical_power(case.scenario, case.hypothesis, size.total_n, REPS, SEED)
        gap = 100 * abs(sim.empirical_power - size.nominal_power)
        record(4, f"[{name}]", gap <= 2.0,
               f"n={size.total_n} empirical {100 * sim.empirical_power:.2f}% vs nominal {100 * size.nominal_power:.2f}%")
        assert gap <= 2.0


class TestCriterion5:
    @pytest.mark.slow
    def test_type_one_error(self):
        case = _row(3, "noninferiority", "design1", lambda s: (s.kappa0, s.rate_ratio) == (0.8, 0.9))
        n = sample_size(case.scenario, case.hypothesis, 0.8).total_n
        null = case.scenario.with_(rate_ratio=1.25)
        sim = empirical_power(null, NonInferiority(1.25), n, REPS, SEED)
        rate = 100 * sim.empirical_power
        ok = 1.6 <= rate <= 3.4
        record(5, "", ok, f"rejection rate {rate:.2f}% at n={n}")
        assert ok


class TestCriterion6:
    DESIGNS = [Design1(1.0), Design2(0.5, 1.0)]
    RATES = [Weibull(1.1, 0.9), PIECEWISE_LONG]
    DELTAS = [0.0, 0.1, 0.25, 0.6]

    def test_a_general_equals_equal_dropout(self):
        worst = 0.0
        for d in self.DESIGNS:
            for rf in self.RATES:
                for delta in self.DELTAS:
                    sc = TrialScenario(d, rf, 0.6, 0.4, 0.8, delta, p1=0.6)
                    a, b = variance_general(sc).v_beta, variance_equal_dropout(sc).v_beta
                    worst = max(worst, abs(a - b) / b)
        record(6, "a", worst <= 1e-8, f"max rel diff {worst:.1e} over 16 cells")
        assert worst <= 1e-8

    def test_b_closed_forms_equal_quadrature(self):
        worst = 0.0
        for d in [*self.DESIGNS, Design2(1.5, 0.75)]:
            for rf in [Weibull(1.1, 0.9), Weibull(1.5, 1.2), Weibull(2.0, 1.0), PIECEWISE_LONG.with_knots([3.0])]:
                for delta in self.DELTAS:
                    a, b = exposure_moments(d, delta, rf), exposure_moments_quadrature(d, delta, rf)
                    assert a.method == "closed_form"
                    worst = max(worst, abs(a.e_moment / b.e_moment - 1), abs(a.f_moment / b.f_moment - 1))
        record(6, "b", worst <= 1e-8, f"max rel diff {worst:.1e}")
        assert worst <= 1e-8

    def test_c_negative_binomial_limit(self):
        worst = 0.0
        for kappa in (0.0, 0.4, 1.2):
            for p1 in (0.5, 2 / 3):
                v, bound = nb_limit_check(TrialScenario(Design1(1.0), Weibull(1.3, 1.0), 0.6, kappa, p1=p1))
                worst = max(worst, abs(v - bound) / bound)
        record(6, "c", worst <= 1e-10, f"max rel diff {worst:.1e}")
        assert worst <= 1e-10

    def test_d_short_accrual_limit(self):
        worst = 0.0
        for rf in (Weibull(1.1, 0.9), Weibull(1.5, 1.2), PIECEWISE_LONG):
            for delta in self.DELTAS:
                a = exposure_moments(Design2(1e-8, 1.0), delta, rf)
                b = exposure_moments(Design1(1.0), delta, rf)
                worst = max(worst, abs(a.e_moment / b.e_moment - 1), abs(a.f_moment / b.f_moment - 1))
        record(6, "d", worst <= 1e-6, f"max rel diff {worst:.1e}")
        assert worst <= 1e-6


class TestCriterion7:
    SC = TrialScenario(Design2(0.5, 1.0), Weibull(1.5, 1.2), 0.7, 0.6, delta0=0.3)

    def test_a_score_finite_difference(self):
        worst = 0.0
        for k in range(20):
            data = simulate_trial(self.SC, 25 + 3 * k, RngStream(300, k))
            b, h = fit(data).beta_hat + 0.1 * (k % 7 - 3), 1e-5
            fd = (log_partial_likelihood(data, b + h) - log_partial_likelihood(data, b - h)) / (2 * h)
            worst = max(worst, abs(score(data, b) - fd) / max(abs(fd), 1.0))
        record(7, "a", worst <= 1e-6, f"max rel diff {worst:.1e} over 20 trials")
        assert worst <= 1e-6

    def test_b_sandwich_against_naive(self):
        worst = 0.0
        for k in range(20):
            data = simulate_trial(self.SC, 6 + k % 15, RngStream(400, k))
            if data.n_events == 0:
                continue
            f = fit(data)
            _, info, meat, _ = _naive(data, f.beta_hat)
            worst = max(worst, abs(f.model_info - info), abs(f.robust_meat - meat))
        record(7, "b", worst <= 1e-10, f"max abs diff {worst:.1e} for n <= 20")
        assert worst <= 1e-10

    def test_c_closed_form_estimate(self):
        sc = TrialScenario(Design1(1.0), Weibull(2.0, 1.1), 0.7, 0.5, p1=0.4)
        worst = 0.0
        for k in range(50):
            data = simulate_trial(sc, 80, RngStream(500, k))
            c, x = data.counts(), data.arm == 1
            ref = math.log((c[x].sum() / x.sum()) / (c[~x].sum() / (~x).sum()))
            worst = max(worst, abs(fit(data).beta_hat - ref))
        record(7, "c", worst <= 1e-10, f"max abs diff {worst:.1e}")
        assert worst <= 1e-10

    @pytest.mark.slow
    def test_d_coverage(self):
        case = _row(1, "balanced", "design1", lambda s: (s.kappa0, s.rate.psi, s.rate.nu) == (0.8, 1.1, 1.2))
        sim = empirical_power(case.scenario, case.hypothesis, 365, 2000, SEED + 1)
        cov = 100 * sim.coverage
        ok = 93.5 <= cov <= 96.5
        record(7, "d", ok, f"coverage {cov:.2f}% over 2000 replicates")
        assert ok


class TestCriterion8:
    @pytest.mark.slow
    def test_thread_count_invariance(self):
        outputs = []
        for threads in ("1", "4", "8"):
            buf = io.StringIO()
            code = run_cli(
                ["simulate", "--config", str(CONFIGS / "table1_row6.json"), "--set", "run.n_total=365",
                 "--reps", "400", "--seed", "7", "--threads", threads, "--out", "json"],
                stdout=buf, stderr=io.StringIO(),
            )
            assert code == 0
            outputs.append(buf.getvalue().encode())
        same = len(set(outputs)) == 1
        reps = json.loads(outputs[0])["result"]["replicates"]
        record(8, "", same, f"{reps} replicates, identical JSON bytes at 1, 4 and 8 threads")
        assert same
