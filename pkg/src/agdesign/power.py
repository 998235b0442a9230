"""Nominal power and sample size for the robust Wald test.

Superiority and non-inferiority share one one-sided formula with margin
``m0`` (``m0 = 1`` for superiority); equivalence uses two one-sided tests
against ``(ml, mu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .numerics import BracketError, invert_monotone, norm_cdf, norm_quantile
from .variance import TrialScenario, variance


class DirectionError(ValueError):
    """The assumed true effect lies on the null side of the hypothesis."""


@dataclass(frozen=True)
class NonInferiority:
    """``H0: exp(beta) >= m0`` (or ``<= m0`` when higher rates are better)."""

    m0: float
    alpha: float = 0.05
    lower_is_better: bool = True

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError(f"margin must be positive, got {self.m0!r}")
        _check_alpha(self.alpha)

    @property
    def kind(self) -> str:
        return "noninferiority"


@dataclass(frozen=True)
class Superiority(NonInferiority):
    m0: float = 1.0

    @property
    def kind(self) -> str:
        return "superiority"


@dataclass(frozen=True)
class Equivalence:
    ml: float
    mu: float
    alpha: float = 0.05

    def __post_init__(self):
        if not 0 < self.ml < 1 < self.mu:
            raise ValueError(f"need 0 < ml < 1 < mu, got ml={self.ml!r}, mu={self.mu!r}")
        _check_alpha(self.alpha)

    @property
    def kind(self) -> str:
        return "equivalence"

    @property
    def half_width(self) -> float:
        return math.log(self.mu / self.ml) / 2


Hypothesis = Union[NonInferiority, Superiority, Equivalence]


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


@dataclass(frozen=True)
class SizeResult:
    total_n: int
    n_per_arm: tuple[int, int]  # (treatment, control)
    raw_n: float
    nominal_power: float
    v_beta: float
    method: str = "closed_form"


def split_arms(total_n: int, p1: float) -> tuple[int, int]:
    """Treatment gets ``round(total_n * p1)``, control the rest."""
    n1 = int(math.floor(total_n * p1 + 0.5))
    return n1, total_n - n1


def _v(sc: TrialScenario, v_beta: Optional[float]) -> float:
    return variance(sc).v_beta if v_beta is None else v_beta


def _effect_distance(beta: float, hyp: NonInferiority) -> float:
    gap = math.log(hyp.m0) - beta
    if hyp.lower_is_better and gap < 0 or not hyp.lower_is_better and gap > 0:
        raise DirectionError(
            f"true log rate ratio {beta:.4g} is on the null side of margin {hyp.m0}"
        )
    return abs(gap)


def _check_equiv(beta: float, hyp: Equivalence):
    if not math.log(hyp.ml) < beta < math.log(hyp.mu):
        raise DirectionError(f"true rate ratio {math.exp(beta):.4g} outside ({hyp.ml}, {hyp.mu})")


def power_sup_ni(sc: TrialScenario, hyp: NonInferiority, n: float, v_beta: Optional[float] = None) -> float:
    if not n > 0:
        raise ValueError("sample size must be positive")
    dist = _effect_distance(sc.beta, hyp)
    v = _v(sc, v_beta)
    return norm_cdf(math.sqrt(n) * dist / math.sqrt(v) - norm_quantile(1 - hyp.alpha / 2))


def size_sup_ni(sc: TrialScenario, hyp: NonInferiority, target_power: float, v_beta: Optional[float] = None) -> SizeResult:
    _check_target(target_power)
    dist = _effect_distance(sc.beta, hyp)
    if dist == 0:
        raise DirectionError("no effect relative to the margin; sample size is infinite")
    v = _v(sc, v_beta)
    raw = (norm_quantile(1 - hyp.alpha / 2) + norm_quantile(target_power)) ** 2 * v / dist**2
    total = math.ceil(raw)
    return SizeResult(total, split_arms(total, sc.p1), raw, power_sup_ni(sc, hyp, total, v), v)


def _equiv_raw(beta, hyp, n, v):
    z = norm_quantile(1 - hyp.alpha / 2)
    s = math.sqrt(n / v)
    return norm_cdf(s * (math.log(hyp.mu) - beta) - z) - norm_cdf(s * (math.log(hyp.ml) - beta) + z)


def equiv_premise_holds(hyp: Equivalence, n: float, v_beta: float) -> bool:
    """Whether the CI can fit inside the margins: ``2 z sqrt(V/n) < log(mu/ml)``."""
    return 2 * norm_quantile(1 - hyp.alpha / 2) * math.sqrt(v_beta / n) < math.log(hyp.mu / hyp.ml)


def power_equiv(sc: TrialScenario, hyp: Equivalence, n: float, v_beta: Optional[float] = None) -> float:
    """Two one-sided tests power; 0 where the CI cannot fit in the margins."""
    if not n > 0:
        raise ValueError("sample size must be positive")
    _check_equiv(sc.beta, hyp)
    v = _v(sc, v_beta)
    if not equiv_premise_holds(hyp, n, v):
        return 0.0
    return min(max(_equiv_raw(sc.beta, hyp, n, v), 0.0), 1.0)


def is_symmetric(beta: float, hyp: Equivalence, tol: float = 1e-12) -> bool:
    return abs((math.log(hyp.mu) - beta) - (beta - math.log(hyp.ml))) <= tol


def size_equiv(sc: TrialScenario, hyp: Equivalence, target_power: float, v_beta: Optional[float] = None) -> SizeResult:
    _check_target(target_power)
    _check_equiv(sc.beta, hyp)
    v = _v(sc, v_beta)
    z = norm_quantile(1 - hyp.alpha / 2)
    if is_symmetric(sc.beta, hyp):
        raw = (z + norm_quantile((1 + target_power) / 2)) ** 2 * v / hyp.half_width**2
        method = "closed_form"
    else:
        raw = size_equiv_numeric(sc, hyp, target_power, v)
        method = "inversion"
    total = math.ceil(raw)
    return SizeResult(total, split_arms(total, sc.p1), raw, power_equiv(sc, hyp, total, v), v, method)


def size_equiv_numeric(sc: TrialScenario, hyp: Equivalence, target_power: float, v_beta: float,
                       lo: float = 4.0, hi: float = 1e7) -> float:
    """Real-valued ``n`` at which the equivalence power reaches the target."""
    try:
        return invert_monotone(lambda n: power_equiv(sc, hyp, n, v_beta), target_power, lo, hi, rtol=1e-14)
    except BracketError as exc:
        raise ArithmeticError(f"equivalence size not bracketed in [{lo}, {hi}]") from exc


def _check_target(p):
    if not 0 < p < 1:
        raise ValueError(f"target power must lie in (0, 1), got {p!r}")


def power(sc: TrialScenario, hyp: Hypothesis, n: float, v_beta: Optional[float] = None) -> float:
    if isinstance(hyp, Equivalence):
        return power_equiv(sc, hyp, n, v_beta)
    return power_sup_ni(sc, hyp, n, v_beta)


def sample_size(sc: TrialScenario, hyp: Hypothesis, target_power: float, v_beta: Optional[float] = None) -> SizeResult:
    if isinstance(hyp, Equivalence):
        return size_equiv(sc, hyp, target_power, v_beta)
    return size_sup_ni(sc, hyp, target_power, v_beta)
