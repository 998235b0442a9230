"""Andersen-Gill fit for a single binary treatment indicator.

With one 0/1 covariate the risk-set sums at an event time ``t`` reduce to
the at-risk counts ``r0(t)`` and ``r1(t)`` of the two arms, so every
quantity below is an event-sorted sweep:

    D(t)    = r0 + r1 * exp(b)                 (= n * S0)
    xbar(t) = r1 * exp(b) / D(t)
    U(b)    = sum_events (x_i - xbar)
    I(b)    = n^-1 sum_events xbar (1 - xbar)
    dLambda0 at each event = 1 / D(t)          (Breslow)

The robust (sandwich) variance is ``Sigma / I**2`` where ``Sigma`` is the
mean squared score residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import norm_quantile
from .power import Equivalence, Hypothesis
from .simulate import TrialData

BETA_CAP = 20.0


class DegenerateFitError(ArithmeticError):
    """No events in the pooled data."""


@dataclass
class AgFit:
    beta_hat: float
    model_info: float  # I, per subject
    robust_meat: float  # Sigma, per subject
    robust_var: float  # V = Sigma / I**2, so Var(beta_hat) ~ V / n
    ci: tuple[float, float]
    alpha: float
    n: int
    iterations: int
    converged: bool
    degenerate: bool
    score: float
    score_residuals: Optional[np.ndarray] = None

    @property
    def se(self) -> float:
        return math.sqrt(self.robust_var / self.n)

    @property
    def rate_ratio(self) -> float:
        return math.exp(self.beta_hat)


class _RiskSets:
    """At-risk counts per arm at every event time (``Y_i(t) = 1{T_i >= t}``)."""

    def __init__(self, data: TrialData):
        x = data.arm.astype(bool)
        self.n = data.n
        self.n1 = int(x.sum())
        self.n0 = self.n - self.n1
        order = np.argsort(data.event_time, kind="stable")
        self.times = data.event_time[order]
        self.subject = data.event_subject[order]
        self.x_ev = x[self.subject].astype(float)
        t1 = np.sort(data.follow_up[x])
        t0 = np.sort(data.follow_up[~x])
        self.r1 = (self.n1 - np.searchsorted(t1, self.times, side="left")).astype(float)
        self.r0 = (self.n0 - np.searchsorted(t0, self.times, side="left")).astype(float)
        self.c1 = float(self.x_ev.sum())

    def xbar(self, beta: float) -> np.ndarray:
        w = self.r1 * math.exp(beta)
        return w / (self.r0 + w)

    def score_info(self, beta: float) -> tuple[float, float]:
        xb = self.xbar(beta)
        return self.c1 - float(xb.sum()), float((xb * (1.0 - xb)).sum())


def log_partial_likelihood(data: TrialData, beta: float) -> float:
    rs = _RiskSets(data)
    return float(beta * rs.c1 - np.log(rs.r0 + rs.r1 * math.exp(beta)).sum())


def score(data: TrialData, beta: float) -> float:
    return _RiskSets(data).score_info(beta)[0]


def _newton(rs: _RiskSets, max_iter: int, step_tol: float):
    """Newton-Raphson from 0 with step halving; stops once the Newton step is
    below ``step_tol`` (after taking it, so the last iterate is polished)."""
    beta = 0.0
    u, info = rs.score_info(beta)
    for it in range(1, max_iter + 1):
        if info <= 0:
            return beta, u, it, False
        step = u / info
        new = max(min(beta + step, BETA_CAP), -BETA_CAP)
        nu, ninfo = rs.score_info(new)
        halvings = 0
        while abs(nu) > abs(u) and halvings < 30:
            step /= 2
            new = beta + step
            nu, ninfo = rs.score_info(new)
            halvings += 1
        beta, u, info = new, nu, ninfo
        if abs(step) < step_tol * (1.0 + abs(beta)) and halvings == 0:
            return beta, u, it, True
        if abs(beta) >= BETA_CAP:
            return beta, u, it, False
    return beta, u, max_iter, False


def fit(data: TrialData, alpha: float = 0.05, max_iter: int = 50, tol: float = 1e-12) -> AgFit:
    """Partial-likelihood estimate with Breslow ties and sandwich variance.

    ``tol`` is the relative Newton step size at which iteration stops.
    """
    if data.n_events == 0:
        raise DegenerateFitError("no events: the treatment effect is not estimable")
    rs = _RiskSets(data)
    n = data.n
    total = rs.times.size
    # all events in one arm: the estimate runs off to +-infinity
    degenerate = rs.c1 == 0 or rs.c1 == total
    beta, u, iters, converged = _newton(rs, max_iter, tol)
    if abs(beta) >= BETA_CAP:
        degenerate = True
        beta = math.copysign(BETA_CAP, beta)

    eb = math.exp(beta)
    d = rs.r0 + rs.r1 * eb
    xb = rs.r1 * eb / d
    info = float((xb * (1.0 - xb)).sum()) / n

    # score residuals: observed part minus compensator up to each T_i
    observed = np.bincount(rs.subject, weights=rs.x_ev - xb, minlength=n)
    cum0 = np.concatenate([[0.0], np.cumsum(xb / d)])
    cum1 = np.concatenate([[0.0], np.cumsum((1.0 - xb) / d)])
    k = np.searchsorted(rs.times, data.follow_up, side="right")
    x = data.arm.astype(bool)
    comp = np.where(x, eb * cum1[k], -cum0[k])
    resid = observed - comp
    meat = float(np.dot(resid, resid)) / n

    if info > 0:
        var = meat / info**2
    else:
        var = math.inf
        degenerate = True
    if not var > 0:
        degenerate = True
    half = norm_quantile(1 - alpha / 2) * math.sqrt(var / n)
    return AgFit(beta, info, meat, var, (beta - half, beta + half), alpha, n, iters, converged,
                 degenerate, u, resid)


def breslow(data: TrialData, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Event times and the cumulative baseline mean function just after each."""
    rs = _RiskSets(data)
    return rs.times, np.cumsum(1.0 / (rs.r0 + rs.r1 * math.exp(beta)))


def martingale_residuals(data: TrialData, beta: float) -> np.ndarray:
    """``N_i(T_i) - exp(beta x_i) Lambda0_hat(T_i)``."""
    times, cum = breslow(data, beta)
    cum = np.concatenate([[0.0], cum])
    k = np.searchsorted(times, data.follow_up, side="right")
    return data.counts() - np.exp(beta * data.arm) * cum[k]


def decide(fit: AgFit, hyp: Hypothesis) -> bool:
    """Whether the fitted CI rejects the null of ``hyp``; degenerate fits never do."""
    if fit.degenerate or not math.isfinite(fit.robust_var):
        return False
    lo, hi = fit.ci
    if isinstance(hyp, Equivalence):
        return math.log(hyp.ml) < lo and hi < math.log(hyp.mu)
    if hyp.lower_is_better:
        return hi < math.log(hyp.m0)
    return lo > math.log(hyp.m0)
