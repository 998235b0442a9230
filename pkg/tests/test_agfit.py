import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agdesign.agfit import (
    AgFit,
    DegenerateFitError,
    breslow,
    decide,
    fit,
    log_partial_likelihood,
    martingale_residuals,
    score,
)
from agdesign.design import Design1, Design2
from agdesign.numerics import RngStream
from agdesign.power import Equivalence, NonInferiority, Superiority
from agdesign.rates import Weibull
from agdesign.simulate import TrialData, simulate_trial
from agdesign.variance import TrialScenario

SMALL = TrialScenario(Design2(0.5, 1.0), Weibull(1.5, 1.2), 0.7, 0.6, delta0=0.3)


def _manual(arm, follow, events):
    """TrialData from a list of (subject, time) events."""
    events = sorted(events)
    return TrialData(
        arm=np.asarray(arm, dtype=np.int8),
        entry=np.zeros(len(arm)),
        follow_up=np.asarray(follow, dtype=float),
        frailty=np.ones(len(arm)),
        event_subject=np.array([s for s, _ in events], dtype=np.int64),
        event_time=np.array([t for _, t in events], dtype=float),
    )


def _naive(data, beta):
    """O(n * events) textbook sandwich pieces: U, I/n and Sigma/n."""
    x = data.arm.astype(float)
    n = data.n
    times = data.event_time
    u = info = 0.0
    xbars, s0s = [], []
    for t, i in zip(times, data.event_subject):
        at_risk = data.follow_up >= t
        w = at_risk * np.exp(beta * x)
        s0 = w.sum()
        s1 = (w * x).sum()
        xb = s1 / s0
        xbars.append(xb)
        s0s.append(s0)
        u += x[i] - xb
        info += xb - xb * xb
    resid = np.zeros(n)
    for k in range(n):
        for (t, i), xb, s0 in zip(zip(times, data.event_subject), xbars, s0s):
            if i == k:
                resid[k] += x[k] - xb
            if data.follow_up[k] >= t:
                resid[k] -= math.exp(beta * x[k]) * (x[k] - xb) / s0
    return u, info / n, float(resid @ resid) / n, resid


class TestScore:
    @pytest.mark.parametrize("k", range(20))
    def test_finite_difference(self, k):
        data = simulate_trial(SMALL, 30 + k, RngStream(100, k))
        b, h = 0.2 * (k % 5) - 0.4, 1e-5
        fd = (log_partial_likelihood(data, b + h) - log_partial_likelihood(data, b - h)) / (2 * h)
        assert score(data, b) == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_score_vanishes_at_estimate(self):
        data = simulate_trial(SMALL, 200, RngStream(7))
        f = fit(data)
        assert f.converged
        assert abs(score(data, f.beta_hat)) < 1e-8


class TestSandwich:
    @pytest.mark.parametrize("k", range(10))
    def test_matches_naive(self, k):
        data = simulate_trial(SMALL, 8 + k, RngStream(200, k))
        if data.n_events == 0:
            pytest.skip("no events")
        f = fit(data)
        u, info, meat, resid = _naive(data, f.beta_hat)
        assert f.model_info == pytest.approx(info, rel=1e-10, abs=1e-14)
        assert f.robust_meat == pytest.approx(meat, rel=1e-10, abs=1e-14)
        np.testing.assert_allclose(f.score_residuals, resid, rtol=1e-10, atol=1e-12)

    def test_ties_across_subjects(self):
        # Breslow: tied event times share one risk set
        data = _manual([1, 1, 0, 0], [1.0, 1.0, 1.0, 0.5], [(0, 0.3), (2, 0.3), (1, 0.7), (3, 0.4), (2, 0.9)])
        f = fit(data)
        u, info, meat, _ = _naive(data, f.beta_hat)
        assert abs(u) < 1e-8
        assert f.model_info == pytest.approx(info, rel=1e-12)
        assert f.robust_meat == pytest.approx(meat, rel=1e-12)

    def test_information_two_forms(self):
        # sum over events of xbar(1 - xbar) equals the integral of
        # sum_i Y_i exp(beta x_i) (x_i - xbar)^2 against the Breslow increments
        data = simulate_trial(SMALL, 70, RngStream(12))
        f = fit(data)
        times, cum = breslow(data, f.beta_hat)
        dlam = np.diff(np.concatenate([[0.0], cum]))
        x = data.arm.astype(float)
        total = 0.0
        for t, dl in zip(times, dlam):
            w = (data.follow_up >= t) * np.exp(f.beta_hat * x)
            xb = (w * x).sum() / w.sum()
            total += (w * (x - xb) ** 2).sum() * dl
        assert f.model_info == pytest.approx(total / data.n, rel=1e-12)

    def test_residuals_sum_to_score(self):
        data = simulate_trial(SMALL, 60, RngStream(3))
        f = fit(data)
        assert f.score_residuals.sum() == pytest.approx(f.score, abs=1e-9)


class TestClosedForm:
    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_common_follow_up(self, seed):
        sc = TrialScenario(Design1(1.0), Weibull(2.0, 1.1), 0.7, 0.5, p1=0.4)
        data = simulate_trial(sc, 60, RngStream(seed))
        c = data.counts()
        x = data.arm == 1
        c1, c0 = c[x].sum(), c[~x].sum()
        if c1 == 0 or c0 == 0:
            return
        ref = math.log((c1 / x.sum()) / (c0 / (~x).sum()))
        assert fit(data).beta_hat == pytest.approx(ref, abs=1e-10)


class TestBreslow:
    def test_martingale_residuals_sum_to_zero(self):
        data = simulate_trial(SMALL, 80, RngStream(4))
        for b in (-0.5, 0.0, 0.3):
            assert martingale_residuals(data, b).sum() == pytest.approx(0.0, abs=1e-9)

    def test_increments(self):
        data = _manual([1, 0], [1.0, 1.0], [(0, 0.2), (1, 0.5)])
        times, cum = breslow(data, 0.0)
        np.testing.assert_allclose(times, [0.2, 0.5])
        np.testing.assert_allclose(cum, [0.5, 1.0])


class TestFit:
    def test_label_swap_negates(self):
        data = simulate_trial(SMALL, 120, RngStream(6))
        flipped = TrialData(1 - data.arm, data.entry, data.follow_up, data.frailty, data.event_subject, data.event_time)
        a, b = fit(data), fit(flipped)
        assert b.beta_hat == pytest.approx(-a.beta_hat, abs=1e-9)
        assert b.robust_var == pytest.approx(a.robust_var, rel=1e-8)

    def test_ci(self):
        data = simulate_trial(SMALL, 120, RngStream(6))
        f = fit(data, alpha=0.1)
        half = 1.6448536269514722 * f.se
        assert f.ci == pytest.approx((f.beta_hat - half, f.beta_hat + half))
        assert f.rate_ratio == pytest.approx(math.exp(f.beta_hat))

    def test_no_events(self):
        data = _manual([1, 0], [1.0, 1.0], [])
        with pytest.raises(DegenerateFitError):
            fit(data)

    def test_events_in_one_arm_only(self):
        data = _manual([1, 0, 0], [1.0, 1.0, 1.0], [(1, 0.2), (2, 0.4)])
        f = fit(data)
        assert f.degenerate
        assert f.beta_hat == -20.0
        assert not decide(f, Superiority())


def _fake(lo, hi, degenerate=False):
    return AgFit(0.5 * (lo + hi), 1.0, 1.0, 1.0, (lo, hi), 0.05, 100, 3, True, degenerate, 0.0)


class TestDecide:
    def test_superiority(self):
        assert decide(_fake(-0.8, -0.1), Superiority())
        assert not decide(_fake(-0.8, 0.0), Superiority())
        assert decide(_fake(0.1, 0.8), Superiority(lower_is_better=False))

    def test_noninferiority(self):
        m = math.log(1.25)
        assert decide(_fake(-0.5, m - 1e-9), NonInferiority(1.25))
        assert not decide(_fake(-0.5, m), NonInferiority(1.25))
        assert decide(_fake(math.log(0.8) + 1e-9, 0.5), NonInferiority(0.8, lower_is_better=False))

    def test_equivalence(self):
        hyp = Equivalence(0.75, 1.25)
        assert decide(_fake(-0.2, 0.2), hyp)
        assert not decide(_fake(math.log(0.75), 0.1), hyp)
        assert not decide(_fake(-0.1, 0.3), hyp)

    def test_degenerate_never_rejects(self):
        assert not decide(_fake(-0.8, -0.1, degenerate=True), Superiority())
