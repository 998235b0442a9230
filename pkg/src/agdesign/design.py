"""Study designs, retention probability and exposure moments.

Two designs are supported:

* ``Design1`` -- every subject is scheduled for ``tau_c`` years of treatment.
* ``Design2`` -- staggered entry over ``tau_a`` years with administrative
  censoring at calendar time ``tau_a + tau_c``.  Entry times follow a
  truncated exponential density with shape ``eta`` (uniform when ``eta == 0``).

Loss to follow-up is exponential with rate ``delta`` in both designs.

The exposure moments are

    E = int_0^tau pi(t) dLambda(t)
    F = int_0^tau pi(t) Lambda(t) dLambda(t)

and are evaluated in closed form for the Weibull and piecewise-constant
families (Design 2 only when ``eta == 0``), by quadrature otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .numerics import TIGHT_QUADRATURE, inc_gamma_between, inc_gamma_lower, integrate
from .rates import PiecewiseConstant, RateFunction, Weibull, warn_if_extrapolating


@dataclass(frozen=True)
class Design1:
    tau_c: float

    def __post_init__(self):
        if not self.tau_c > 0:
            raise ValueError(f"tau_c must be positive, got {self.tau_c!r}")

    @property
    def tau(self) -> float:
        return self.tau_c

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class Design2:
    tau_a: float
    tau_c: float
    eta: float = 0.0

    def __post_init__(self):
        if not self.tau_c > 0:
            raise ValueError(f"tau_c must be positive, got {self.tau_c!r}")
        if not self.tau_a > 0:
            raise ValueError(f"tau_a must be positive, got {self.tau_a!r}")

    @property
    def tau(self) -> float:
        return self.tau_a + self.tau_c

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.tau_c,)


StudyDesign = Union[Design1, Design2]


@dataclass(frozen=True)
class ExposureMoments:
    e_moment: float
    f_moment: float
    method: str  # "closed_form" or "quadrature"


def annual_dropout(delta: float) -> float:
    """Fraction lost within one year under exponential dropout rate ``delta``."""
    return -math.expm1(-delta)


def dropout_rate(annual_fraction: float) -> float:
    """Inverse of :func:`annual_dropout`."""
    if not 0 <= annual_fraction < 1:
        raise ValueError("annual dropout fraction must lie in [0, 1)")
    return -math.log1p(-annual_fraction)


def _check_delta(delta):
    if delta < 0:
        raise ValueError(f"dropout rate must be non-negative, got {delta!r}")


# ---------------------------------------------------------------------------
# retention and entry

def _admin_fraction(design: Design2, t):
    """P(entry + t <= tau) for Design 2 (the administrative part of retention)."""
    rem = design.tau - np.asarray(t, dtype=float)
    if design.eta == 0:
        return rem / design.tau_a
    return np.expm1(-design.eta * rem) / math.expm1(-design.eta * design.tau_a)


def retention_prob(design: StudyDesign, delta: float, t):
    """Probability that a subject is still followed ``t`` years after randomization."""
    _check_delta(delta)
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0) or np.any(ta > design.tau * (1 + 1e-12)):
        raise ValueError(f"t must lie in [0, {design.tau}]")
    surv = np.exp(-delta * ta)
    if isinstance(design, Design2):
        surv = np.where(ta > design.tau_c, surv * np.clip(_admin_fraction(design, ta), 0.0, 1.0), surv)
    return surv[()]


def _retention_scalar(design: StudyDesign, delta: float, t: float) -> float:
    # quadrature hot path; no validation
    s = math.exp(-delta * t)
    if isinstance(design, Design2) and t > design.tau_c:
        rem = design.tau - t
        if design.eta == 0:
            s *= rem / design.tau_a
        else:
            s *= math.expm1(-design.eta * rem) / math.expm1(-design.eta * design.tau_a)
    return s


def entry_density(design: Design2, e):
    """Density of the entry time on ``[0, tau_a]``."""
    ea = np.asarray(e, dtype=float)
    if np.any(ea < 0) or np.any(ea > design.tau_a):
        raise ValueError(f"entry time must lie in [0, {design.tau_a}]")
    eta = design.eta
    if eta == 0:
        return (np.ones_like(ea) / design.tau_a)[()]
    return (eta * np.exp(-eta * ea) / -math.expm1(-eta * design.tau_a))[()]


def entry_quantile(design: Design2, u):
    """Inverse CDF of the entry distribution, for ``u`` in ``[0, 1]``."""
    u = np.asarray(u, dtype=float)
    eta = design.eta
    if eta == 0:
        return u * design.tau_a
    return -np.log1p(u * math.expm1(-eta * design.tau_a)) / eta


# ---------------------------------------------------------------------------
# G functions: int_0^width exp(-delta t) t**m dt, m = 0, 1, 2

def g_moments(delta: float, width: float) -> tuple[float, float, float]:
    x = delta * width
    if delta == 0:
        return width, width**2 / 2, width**3 / 3
    if x < 1e-4:
        # direct formulas cancel catastrophically here
        out = []
        for m in range(3):
            acc = 0.0
            for j in range(4):
                acc += (-delta) ** j * width ** (m + j + 1) / (math.factorial(j) * (m + j + 1))
            out.append(acc)
        return tuple(out)
    ex = math.exp(-x)
    g0 = -math.expm1(-x) / delta
    g1 = (1 - (1 + x) * ex) / delta**2
    g2 = (2 - (x * x + 2 * x + 2) * ex) / delta**3
    return g0, g1, g2


# ---------------------------------------------------------------------------
# closed forms

def _power_exp_integral(p: float, delta: float, lo: float, hi: float) -> float:
    """``int_lo^hi t**(p-1) exp(-delta t) dt``."""
    if delta * hi < 1e-3:
        # series in delta; the incomplete-gamma form under/overflows as delta -> 0
        acc, coef = 0.0, 1.0
        for j in range(10):
            acc += coef * (hi ** (p + j) - lo ** (p + j)) / (p + j)
            coef *= -delta / (j + 1)
        return acc
    if lo == 0:
        return inc_gamma_lower(p, delta * hi) / delta**p
    return inc_gamma_between(p, delta * hi, delta * lo) / delta**p


def _weibull_head(rf: Weibull, delta: float, tau_c: float):
    psi, nu = rf.psi, rf.nu
    e = psi * nu * _power_exp_integral(nu, delta, 0.0, tau_c)
    f = psi**2 * nu * _power_exp_integral(2 * nu, delta, 0.0, tau_c)
    return e, f


def _weibull_tail(rf: Weibull, delta: float, design: Design2):
    # eta == 0 only: retention is exp(-delta t) (tau - t) / tau_a on [tau_c, tau]
    psi, nu = rf.psi, rf.nu
    tau, tc, ta = design.tau, design.tau_c, design.tau_a

    def moment(p):
        return tau * _power_exp_integral(p, delta, tc, tau) - _power_exp_integral(p + 1, delta, tc, tau)

    return psi * nu / ta * moment(nu), psi**2 * nu / ta * moment(2 * nu)


def _piecewise_pieces(rf: PiecewiseConstant, lo: float, hi: float):
    """Yield (start, width, rate, Lambda(start)) for the pieces covering [lo, hi]."""
    aug = rf.with_knots([lo, hi])
    cum = aug.cumulative_at_knots
    for k, (a, b) in enumerate(zip(aug.knots[:-1], aug.knots[1:])):
        if a >= lo and b <= hi:
            yield a, b - a, aug.rates[k], cum[k]


def _piecewise_head(rf: PiecewiseConstant, delta: float, tau_c: float):
    e = f = 0.0
    for start, width, lam, cum in _piecewise_pieces(rf, 0.0, tau_c):
        g0, g1, _ = g_moments(delta, width)
        w = lam * math.exp(-delta * start)
        e += w * g0
        f += w * (cum * g0 + lam * g1)
    return e, f


def _piecewise_tail(rf: PiecewiseConstant, delta: float, design: Design2):
    tau, ta = design.tau, design.tau_a
    e = f = 0.0
    for start, width, lam, cum in _piecewise_pieces(rf, design.tau_c, tau):
        g0, g1, g2 = g_moments(delta, width)
        w = lam / ta * math.exp(-delta * start)
        rem = tau - start
        e += w * (rem * g0 - g1)
        f += w * (cum * (rem * g0 - g1) + lam * (rem * g1 - g2))
    return e, f


def _tail_quadrature(rf: RateFunction, delta: float, design: Design2):
    pts = rf.knots
    e = integrate(lambda t: _retention_scalar(design, delta, t) * rf.rate_scalar(t),
                  design.tau_c, design.tau, TIGHT_QUADRATURE, pts)
    f = integrate(lambda t: _retention_scalar(design, delta, t) * rf.cumulative_scalar(t) * rf.rate_scalar(t),
                  design.tau_c, design.tau, TIGHT_QUADRATURE, pts)
    return e, f


def exposure_moments(design: StudyDesign, delta: float, rf: RateFunction) -> ExposureMoments:
    """Expected exposure moments ``E`` and ``F`` for one arm.

    Closed forms are used wherever they exist; Design 2 with ``eta != 0``
    falls back to adaptive quadrature over ``[tau_c, tau]``.
    """
    _check_delta(delta)
    warn_if_extrapolating(rf, design.tau)
    if isinstance(rf, Weibull):
        e, f = _weibull_head(rf, delta, design.tau_c)
    else:
        e, f = _piecewise_head(rf, delta, design.tau_c)
    method = "closed_form"
    if isinstance(design, Design2):
        if design.eta == 0:
            te, tf = _weibull_tail(rf, delta, design) if isinstance(rf, Weibull) else _piecewise_tail(rf, delta, design)
        else:
            te, tf = _tail_quadrature(rf, delta, design)
            method = "quadrature"
        e += te
        f += tf
    return ExposureMoments(e, f, method)


def exposure_moments_quadrature(design: StudyDesign, delta: float, rf: RateFunction) -> ExposureMoments:
    """Both moments by direct quadrature over ``[0, tau]``; the cross-check route."""
    _check_delta(delta)
    pts = tuple(rf.knots) + design.breakpoints

    def pi(t):
        return _retention_scalar(design, delta, t)

    e = integrate(lambda t: pi(t) * rf.rate_scalar(t), 0.0, design.tau, TIGHT_QUADRATURE, pts)
    f = integrate(lambda t: pi(t) * rf.cumulative_scalar(t) * rf.rate_scalar(t), 0.0, design.tau, TIGHT_QUADRATURE, pts)
    return ExposureMoments(e, f, "quadrature")


def follow_up_moments(design: StudyDesign, delta: float) -> tuple[float, float]:
    """``E(T)`` and ``E(T**2)`` of the follow-up time, via ``P(T > t) = pi(t)``."""
    _check_delta(delta)
    pts = design.breakpoints
    m1 = integrate(lambda t: _retention_scalar(design, delta, t), 0.0, design.tau, TIGHT_QUADRATURE, pts)
    m2 = integrate(lambda t: 2 * t * _retention_scalar(design, delta, t), 0.0, design.tau, TIGHT_QUADRATURE, pts)
    return m1, m2
