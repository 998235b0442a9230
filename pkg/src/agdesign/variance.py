"""Asymptotic variance of the robust Andersen-Gill Wald statistic.

``V`` is the limit of ``n * Var(beta_hat)`` under a mixed Poisson process
with gamma-free (arbitrary) frailty of mean 1 and variance ``kappa_g`` in arm
``g``.  Two routes:

* :func:`variance_general` -- arm-specific dropout, everything by quadrature.
* :func:`variance_equal_dropout` -- common dropout, closed form in the
  control-arm exposure moments ``E0`` and ``F0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .design import StudyDesign, _retention_scalar, exposure_moments, follow_up_moments
from .numerics import TIGHT_QUADRATURE, Quadrature, integrate
from .rates import PiecewiseConstant, RateFunction, Weibull, warn_if_extrapolating


class DegenerateScenarioError(ArithmeticError):
    """The scenario carries no expected information (no events)."""


@dataclass(frozen=True)
class ArmModel:
    rate: RateFunction
    kappa: float = 0.0
    dropout: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa!r}")
        if self.dropout < 0:
            raise ValueError(f"dropout rate must be non-negative, got {self.dropout!r}")


@dataclass(frozen=True)
class TrialScenario:
    """Design-stage description of a two-arm trial.

    ``rate`` is the control-arm mean function; the treatment arm's is
    ``rate_ratio * rate``.  ``kappa1`` and ``delta1`` default to the control
    values.
    """

    design: StudyDesign
    rate: RateFunction
    rate_ratio: float
    kappa0: float = 0.0
    kappa1: Optional[float] = None
    delta0: float = 0.0
    delta1: Optional[float] = None
    p1: float = 0.5

    def __post_init__(self):
        if self.kappa1 is None:
            object.__setattr__(self, "kappa1", self.kappa0)
        if self.delta1 is None:
            object.__setattr__(self, "delta1", self.delta0)
        if not self.rate_ratio > 0:
            raise ValueError(f"rate_ratio must be positive, got {self.rate_ratio!r}")
        if not 0 < self.p1 < 1:
            raise ValueError(f"p1 must lie in (0, 1), got {self.p1!r}")
        if min(self.kappa0, self.kappa1) < 0:
            raise ValueError("kappa must be non-negative")
        if min(self.delta0, self.delta1) < 0:
            raise ValueError("dropout rates must be non-negative")

    @property
    def beta(self) -> float:
        return math.log(self.rate_ratio)

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @property
    def equal_dropout(self) -> bool:
        return self.delta0 == self.delta1

    @property
    def control(self) -> ArmModel:
        return ArmModel(self.rate, self.kappa0, self.delta0)

    @property
    def treatment(self) -> ArmModel:
        return ArmModel(self.rate.scale(self.rate_ratio), self.kappa1, self.delta1)

    def arm(self, g: int) -> ArmModel:
        return self.treatment if g == 1 else self.control

    def swapped(self) -> "TrialScenario":
        """Same trial with the arm labels exchanged."""
        return TrialScenario(
            design=self.design,
            rate=self.rate.scale(self.rate_ratio),
            rate_ratio=1.0 / self.rate_ratio,
            kappa0=self.kappa1,
            kappa1=self.kappa0,
            delta0=self.delta1,
            delta1=self.delta0,
            p1=self.p0,
        )

    def with_(self, **changes) -> "TrialScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class VarianceReport:
    v_beta: float
    path: str  # "general" or "equal_dropout"
    e_moments: tuple[float, float]  # (E0, E1)
    f_moments: Optional[tuple[float, float]] = None
    a_terms: Optional[tuple[float, float]] = None
    b_terms: Optional[tuple[float, float]] = None
    information: Optional[float] = None
    extra: dict = field(default_factory=dict)


def _grid(design: StudyDesign, rf: RateFunction) -> list[float]:
    pts = {0.0, design.tau, *design.breakpoints, *(k for k in rf.knots if 0 < k < design.tau)}
    pts.update(np.linspace(0.0, design.tau, 33)[1:-1].tolist())
    return sorted(pts)


def variance_general(sc: TrialScenario, q: Quadrature = TIGHT_QUADRATURE) -> VarianceReport:
    """Variance for arbitrary (possibly arm-specific) exponential dropout."""
    design, rf = sc.design, sc.rate
    warn_if_extrapolating(rf, design.tau)
    p0, p1, rr = sc.p0, sc.p1, sc.rate_ratio
    d0, d1 = sc.delta0, sc.delta1
    lam = rf.rate_scalar
    cum = rf.cumulative_scalar
    pts = (*rf.knots, *design.breakpoints)

    def omega0(t):
        # administrative censoring is common to both arms and cancels
        a = p1 * rr * math.exp(-d1 * t)
        return a / (a + p0 * math.exp(-d0 * t))

    def omega(g, t):
        w0 = omega0(t)
        return 1.0 - w0 if g == 1 else w0

    def pi(g, t):
        return _retention_scalar(design, d1 if g == 1 else d0, t)

    mult = (1.0, rr)
    grid = _grid(design, rf)
    a_terms, b_terms, e_terms = [], [], []
    for g in (0, 1):
        m = mult[g]
        inner = lambda s, g=g, m=m: omega(g, s) * m * lam(s)  # noqa: E731
        seg = [0.0] + [integrate(inner, lo, hi, q) for lo, hi in zip(grid[:-1], grid[1:])]
        w_at = np.cumsum(seg)

        def w_of(t, inner=inner, w_at=w_at):
            k = max(np.searchsorted(grid, t, side="right") - 1, 0)
            return float(w_at[k]) + integrate(inner, grid[k], t, q) if t > grid[k] else float(w_at[k])

        a_terms.append(integrate(lambda t: omega(g, t) ** 2 * pi(g, t) * m * lam(t), 0.0, design.tau, q, pts))
        b_terms.append(
            2.0 * integrate(lambda t: w_of(t) * pi(g, t) * omega(g, t) * m * lam(t), 0.0, design.tau, q, grid[1:-1])
        )
        e_terms.append(integrate(lambda t: pi(g, t) * m * lam(t), 0.0, design.tau, q, pts))

    info = integrate(lambda t: p0 * pi(0, t) * omega0(t) * lam(t), 0.0, design.tau, q, pts)
    if not info > 0:
        raise DegenerateScenarioError("no expected events: variance undefined")
    numer = p1 * (a_terms[1] + sc.kappa1 * b_terms[1]) + p0 * (a_terms[0] + sc.kappa0 * b_terms[0])
    f_terms = tuple(
        integrate(lambda t, g=g: pi(g, t) * mult[g] ** 2 * cum(t) * lam(t), 0.0, design.tau, q, pts) for g in (0, 1)
    )
    return VarianceReport(
        v_beta=numer / info**2,
        path="general",
        e_moments=tuple(e_terms),
        f_moments=f_terms,
        a_terms=tuple(a_terms),
        b_terms=tuple(b_terms),
        information=info,
    )


def variance_equal_dropout(sc: TrialScenario) -> VarianceReport:
    """Closed-form variance when both arms share the dropout distribution."""
    if not sc.equal_dropout:
        raise ValueError("variance_equal_dropout needs delta0 == delta1; use variance_general")
    mom = exposure_moments(sc.design, sc.delta0, sc.rate)
    e0, f0 = mom.e_moment, mom.f_moment
    if not e0 > 0:
        raise DegenerateScenarioError("no expected events: variance undefined")
    p0, p1, rr = sc.p0, sc.p1, sc.rate_ratio
    v = (1.0 / (p1 * rr) + 1.0 / p0) / e0 + (sc.kappa1 / p1 + sc.kappa0 / p0) * 2.0 * f0 / e0**2
    treat = exposure_moments(sc.design, sc.delta1, sc.rate.scale(rr))
    d = p0 + p1 * rr
    return VarianceReport(
        v_beta=v,
        path="equal_dropout",
        e_moments=(e0, treat.e_moment),
        f_moments=(f0, treat.f_moment),
        information=p0 * (p1 * rr / d) * e0,
        extra={"method": mom.method},
    )


def variance_separate_moments(sc: TrialScenario) -> float:
    """Shortcut using arm-specific E_g, F_g in the equal-dropout formula.

    Exact under equal dropout, an approximation otherwise.
    """
    p0, p1 = sc.p0, sc.p1
    m0 = exposure_moments(sc.design, sc.delta0, sc.rate)
    m1 = exposure_moments(sc.design, sc.delta1, sc.rate.scale(sc.rate_ratio))
    return (
        1.0 / (p1 * m1.e_moment)
        + 1.0 / (p0 * m0.e_moment)
        + 2.0 * (sc.kappa1 / p1 * m1.f_moment / m1.e_moment**2 + sc.kappa0 / p0 * m0.f_moment / m0.e_moment**2)
    )


def variance(sc: TrialScenario) -> VarianceReport:
    """Closed form under equal dropout, the general route otherwise."""
    return variance_equal_dropout(sc) if sc.equal_dropout else variance_general(sc)


def _constant_rate(rf: RateFunction) -> float:
    if isinstance(rf, Weibull) and rf.nu == 1.0:
        return rf.psi
    if isinstance(rf, PiecewiseConstant) and rf.is_constant:
        return rf.rates[0]
    raise ValueError("nb_limit_check needs a constant event rate")


def nb_limit_check(sc: TrialScenario) -> tuple[float, float]:
    """Equal-dropout variance next to its constant-rate (negative binomial) form.

    Returns ``(V, bound)`` where ``bound`` is built from the follow-up
    moments ``E(T)`` and ``E(T**2)`` only.
    """
    lam0 = _constant_rate(sc.rate)
    if not sc.equal_dropout:
        raise ValueError("nb_limit_check needs equal dropout")
    v = variance_equal_dropout(sc).v_beta
    m1, m2 = follow_up_moments(sc.design, sc.delta0)
    bound = (1.0 / (sc.p1 * sc.rate_ratio) + 1.0 / sc.p0) / (lam0 * m1) + (
        sc.kappa1 / sc.p1 + sc.kappa0 / sc.p0
    ) * m2 / m1**2
    return v, bound


__all__ = [
    "ArmModel",
    "TrialScenario",
    "VarianceReport",
    "DegenerateScenarioError",
    "variance_general",
    "variance_equal_dropout",
    "variance_separate_moments",
    "variance",
    "nb_limit_check",
]
