"""Built-in invariant suite behind ``agdesign check``.

Each check recomputes a quantity by two independent routes and compares.
The whole suite runs in a few seconds.
"""
from __future__ import annotations

from dataclasses import dataclass

from .agfit import fit, log_partial_likelihood as lpl, score
from .design import Design1, Design2, exposure_moments, exposure_moments_quadrature
from .harness import reproduce_table
from .numerics import RngStream
from .rates import PiecewiseConstant, Weibull
from .simulate import simulate_trial
from .variance import TrialScenario, nb_limit_check, variance_equal_dropout, variance_general


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# extended to cover calendar time 2, so no extrapolation warnings
_PIECEWISE = PiecewiseConstant([0, 0.4, 0.8, 1.0, 2.0], [1.0, 1.25, 1.5, 1.5])


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _general_vs_equal():
    worst = 0.0
    for design in (Design1(1.0), Design2(0.5, 1.0)):
        for rf in (Weibull(1.1, 1.2), _PIECEWISE):
            sc = TrialScenario(design, rf, 0.7, 0.6, 1.0, 0.25, p1=0.4)
            worst = max(worst, _rel(variance_general(sc).v_beta, variance_equal_dropout(sc).v_beta))
    return worst <= 1e-8, f"max relative difference {worst:.2e}"


def _closed_vs_quadrature():
    worst = 0.0
    for design in (Design1(1.0), Design2(0.5, 1.0), Design2(0.7, 1.3)):
        for rf in (Weibull(1.1, 0.9), Weibull(0.8, 1.5), _PIECEWISE):
            for delta in (0.0, 0.25, 1.0):
                a = exposure_moments(design, delta, rf)
                b = exposure_moments_quadrature(design, delta, rf)
                worst = max(worst, _rel(a.e_moment, b.e_moment), _rel(a.f_moment, b.f_moment))
    return worst <= 1e-8, f"max relative difference {worst:.2e}"


def _nb_limit():
    worst = 0.0
    for kappa in (0.0, 0.4, 1.2):
        v, bound = nb_limit_check(TrialScenario(Design1(1.0), Weibull(1.3, 1.0), 0.6, kappa))
        worst = max(worst, _rel(v, bound))
    return worst <= 1e-10, f"max relative difference {worst:.2e}"


def _accrual_limit():
    worst = 0.0
    for rf in (Weibull(1.1, 0.9), _PIECEWISE):
        a = exposure_moments(Design2(1e-8, 1.0), 0.25, rf)
        b = exposure_moments(Design1(1.0), 0.25, rf)
        worst = max(worst, _rel(a.e_moment, b.e_moment), _rel(a.f_moment, b.f_moment))
    return worst <= 1e-6, f"max relative difference {worst:.2e}"


def _golden_tables():
    bad = []
    total = 0
    for table in (1, 3):
        for row in reproduce_table(table):
            total += 1
            if abs(row["total_size"] - row["ref_size"]) > 1 or abs(row["nominal_power"] - row["ref_nominal"]) > 0.1:
                bad.append((table, row["total_size"], row["ref_size"]))
    return not bad, f"{total - len(bad)}/{total} rows match" + (f"; mismatches {bad}" if bad else "")


def _score_fd():
    worst = 0.0
    sc = TrialScenario(Design2(0.5, 1.0), Weibull(1.5, 1.2), 0.7, 0.5, delta0=0.3)
    for k in range(5):
        data = simulate_trial(sc, 30, RngStream(11, k))
        f = fit(data)
        b, h = f.beta_hat + 0.3, 1e-5
        fd = (lpl(data, b + h) - lpl(data, b - h)) / (2 * h)
        worst = max(worst, _rel(score(data, b), fd))
    return worst <= 1e-6, f"max relative difference {worst:.2e}"


CHECKS = (
    ("general variance equals equal-dropout form", _general_vs_equal),
    ("closed-form exposure moments equal quadrature", _closed_vs_quadrature),
    ("fixed follow-up variance equals negative binomial bound", _nb_limit),
    ("short accrual converges to fixed follow-up", _accrual_limit),
    ("published sizes reproduce", _golden_tables),
    ("score equals finite difference of log partial likelihood", _score_fd),
)


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
