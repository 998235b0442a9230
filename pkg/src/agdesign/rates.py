"""Baseline event-rate functions: Weibull and piecewise constant."""
from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


class RateExtrapolationWarning(UserWarning):
    """A piecewise rate was evaluated past its last knot."""


@dataclass(frozen=True)
class Weibull:
    """Mean function ``psi * t**nu``; rate ``psi * nu * t**(nu - 1)``."""

    psi: float
    nu: float

    def __post_init__(self):
        if not (self.psi > 0 and self.nu > 0):
            raise ValueError(f"Weibull needs psi > 0 and nu > 0, got psi={self.psi}, nu={self.nu}")

    @property
    def knots(self) -> tuple[float, ...]:
        return ()

    @property
    def is_constant(self) -> bool:
        return self.nu == 1.0

    def cumulative(self, t):
        _check_time(t)
        return self.psi * np.power(t, self.nu)

    def rate(self, t):
        _check_time(t)
        if self.nu == 1.0:
            return self.psi * np.ones_like(np.asarray(t, dtype=float))[()]
        with np.errstate(divide="ignore"):
            return self.psi * self.nu * np.power(t, self.nu - 1.0)

    def inverse_cumulative(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise ValueError("cumulative value must be non-negative")
        return np.power(u / self.psi, 1.0 / self.nu)[()]

    def scale(self, c: float) -> "Weibull":
        _check_scale(c)
        return Weibull(self.psi * c, self.nu)

    # unchecked float versions for quadrature integrands
    def rate_scalar(self, t: float) -> float:
        return self.psi * self.nu * t ** (self.nu - 1.0) if t > 0 or self.nu >= 1 else math.inf

    def cumulative_scalar(self, t: float) -> float:
        return self.psi * t**self.nu


@dataclass(frozen=True)
class PiecewiseConstant:
    """Rate ``rates[k]`` on ``[knots[k], knots[k+1])`` with ``knots[0] == 0``.

    Past the last knot the last rate is carried forward; callers that care
    can check :meth:`extrapolates`.
    """

    knots: tuple[float, ...]
    rates: tuple[float, ...]

    def __init__(self, knots: Sequence[float], rates: Sequence[float]):
        knots = tuple(float(k) for k in knots)
        rates = tuple(float(r) for r in rates)
        if len(knots) != len(rates) + 1:
            raise ValueError("need exactly one more knot than rates")
        if knots[0] != 0.0:
            raise ValueError("first knot must be 0")
        if any(b <= a for a, b in zip(knots[:-1], knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if any(r < 0 for r in rates) or not any(r > 0 for r in rates):
            raise ValueError("rates must be non-negative with at least one positive")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "rates", rates)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(knots) * np.array(rates))])
        object.__setattr__(self, "_cum", cum)

    @property
    def is_constant(self) -> bool:
        return len(set(self.rates)) == 1

    @property
    def horizon(self) -> float:
        return self.knots[-1]

    @property
    def cumulative_at_knots(self) -> np.ndarray:
        return self._cum.copy()

    def extrapolates(self, t) -> bool:
        return bool(np.any(np.asarray(t) > self.horizon))

    def _index(self, t):
        k = np.searchsorted(self.knots, t, side="right") - 1
        return np.clip(k, 0, len(self.rates) - 1)

    def cumulative(self, t):
        _check_time(t)
        t = np.asarray(t, dtype=float)
        k = self._index(t)
        return (self._cum[k] + np.asarray(self.rates)[k] * (t - np.asarray(self.knots)[k]))[()]

    def rate(self, t):
        _check_time(t)
        return np.asarray(self.rates)[self._index(np.asarray(t, dtype=float))][()]

    def inverse_cumulative(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise ValueError("cumulative value must be non-negative")
        cum = self._cum
        last = self.rates[-1]
        if last == 0 and np.any(u > cum[-1]):
            raise ValueError("cumulative value beyond the range of the rate function")
        # first knot interval whose right end reaches u; flat stretches resolve to their left end
        k = np.searchsorted(cum, u, side="left") - 1
        k = np.clip(k, 0, len(self.rates) - 1)
        rates = np.asarray(self.rates)[k]
        knots = np.asarray(self.knots)[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rates > 0, knots + (u - cum[k]) / np.where(rates > 0, rates, 1.0), knots)
        return np.where(u == 0, 0.0, t)[()]

    def scale(self, c: float) -> "PiecewiseConstant":
        _check_scale(c)
        return PiecewiseConstant(self.knots, [r * c for r in self.rates])

    def rate_scalar(self, t: float) -> float:
        k = min(max(bisect.bisect_right(self.knots, t) - 1, 0), len(self.rates) - 1)
        return self.rates[k]

    def cumulative_scalar(self, t: float) -> float:
        k = min(max(bisect.bisect_right(self.knots, t) - 1, 0), len(self.rates) - 1)
        return float(self._cum[k]) + self.rates[k] * (t - self.knots[k])

    def with_knots(self, extra: Sequence[float]) -> "PiecewiseConstant":
        """Same function with additional knots inserted (and extended to cover them)."""
        new = sorted(set(self.knots) | {float(x) for x in extra if x > 0})
        rates = [float(self.rate(0.5 * (a + b))) for a, b in zip(new[:-1], new[1:])]
        return PiecewiseConstant(new, rates)


RateFunction = Union[Weibull, PiecewiseConstant]


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")


def _check_scale(c):
    if not c > 0:
        raise ValueError(f"scale factor must be positive, got {c!r}")


def cumulative(rf: RateFunction, t):
    return rf.cumulative(t)


def rate(rf: RateFunction, t):
    return rf.rate(t)


def inverse_cumulative(rf: RateFunction, u):
    return rf.inverse_cumulative(u)


def scale(rf: RateFunction, c: float) -> RateFunction:
    return rf.scale(c)


def warn_if_extrapolating(rf: RateFunction, horizon: float) -> bool:
    if isinstance(rf, PiecewiseConstant) and rf.extrapolates(horizon):
        warnings.warn(
            f"piecewise rate defined up to {rf.horizon}; last rate carried to {horizon}",
            RateExtrapolationWarning,
            stacklevel=3,
        )
        return True
    return False
