"""Special functions, quadrature, root finding and seeded random streams.

Thin, contract-checked wrappers around scipy/numpy so the rest of the
package has one place to go for the numerical primitives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy import special as _special


class IntegrationError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``estimate`` and ``error`` carry the best result scipy produced.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(ValueError):
    """Target value is not enclosed by ``[f(lo), f(hi)]``."""


# ---------------------------------------------------------------------------
# normal distribution

def norm_cdf(x: float) -> float:
    """Standard normal CDF."""
    if not math.isfinite(x):
        raise ValueError(f"norm_cdf needs a finite argument, got {x!r}")
    return float(_special.ndtr(x))


def norm_quantile(p: float) -> float:
    """Inverse of :func:`norm_cdf` on the open unit interval."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    return float(_special.ndtri(p))


# ---------------------------------------------------------------------------
# incomplete gamma (non-regularized)

def inc_gamma_lower(nu: float, a: float) -> float:
    """``int_0^a t**(nu-1) exp(-t) dt``."""
    if nu <= 0:
        raise ValueError(f"shape must be positive, got {nu!r}")
    if a < 0:
        raise ValueError(f"upper limit must be non-negative, got {a!r}")
    if a == 0:
        return 0.0
    return float(_special.gammainc(nu, a) * _special.gamma(nu))


def inc_gamma_between(nu: float, a: float, b: float) -> float:
    """``int_b^a t**(nu-1) exp(-t) dt`` for ``0 <= b <= a``.

    Argument order follows the convention used in the exposure formulas:
    the first limit is the upper one.
    """
    if nu <= 0:
        raise ValueError(f"shape must be positive, got {nu!r}")
    if b < 0 or b > a:
        raise ValueError(f"need 0 <= b <= a, got a={a!r}, b={b!r}")
    if a == b:
        return 0.0
    if b > 0 and a - b < 0.125 * a:
        # narrow window: a difference of regularized values would cancel
        val, _ = _integrate.quad(lambda t: t ** (nu - 1.0) * math.exp(-t), b, a, epsabs=0.0, epsrel=2e-14)
        return float(val)
    g = _special.gamma(nu)
    if b > nu + 1.0:
        # both limits in the tail; difference of upper functions is better conditioned
        return float(g * (_special.gammaincc(nu, b) - _special.gammaincc(nu, a)))
    return float(g * (_special.gammainc(nu, a) - _special.gammainc(nu, b)))


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class Quadrature:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = Quadrature()
TIGHT_QUADRATURE = Quadrature(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=500)


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    q: Quadrature = DEFAULT_QUADRATURE,
    points: Iterable[float] = (),
) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[lo, hi]``.

    Interior ``points`` (kinks, knots, discontinuities) are honoured as
    forced subdivision boundaries.
    """
    if lo > hi:
        raise ValueError(f"need lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return 0.0
    pts = sorted({float(p) for p in points if lo < p < hi})
    total = 0.0
    err_total = 0.0
    edges = [lo, *pts, hi]
    for a, b in zip(edges[:-1], edges[1:]):
        val, err, info = _quad(f, a, b, q)
        total += val
        err_total += err
        if info:
            raise IntegrationError(f"quadrature did not converge on [{a}, {b}]: {info}", total, err_total)
    return total


def _quad(f, a, b, q):
    with np.errstate(all="ignore"):
        out = _integrate.quad(
            f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions, full_output=1
        )
    val, err = out[0], out[1]
    msg = out[3] if len(out) > 3 else None
    # roundoff warnings at near-machine tolerances still carry a usable estimate
    if msg and "roundoff" in msg and err <= max(1e3 * q.abs_tol, 1e3 * q.rel_tol * abs(val)):
        msg = None
    return val, err, msg


# ---------------------------------------------------------------------------
# root finding

def invert_monotone(
    f: Callable[[float], float], target: float, lo: float, hi: float, rtol: float = 1e-10
) -> float:
    """Solve ``f(x) = target`` for nondecreasing ``f`` on ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if not flo <= target <= fhi:
        raise BracketError(f"target {target!r} outside [{flo!r}, {fhi!r}] on [{lo}, {hi}]")
    if flo == target:
        return lo
    if fhi == target:
        return hi
    xtol = rtol * (hi - lo)
    return float(_optimize.brentq(lambda x: f(x) - target, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


# ---------------------------------------------------------------------------
# random streams

class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    Streams with different indices are statistically independent and can be
    created in any order, so replicate ``k`` draws the same numbers no matter
    which worker runs it.
    """

    def __init__(self, master_seed: int, stream_index: int = 0):
        if master_seed < 0 or master_seed >= 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if stream_index < 0:
            raise ValueError("stream_index must be non-negative")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"

    def child(self, index: int) -> "RngStream":
        """Sub-stream; derived from this stream's key, not from its state."""
        out = RngStream.__new__(RngStream)
        out.master_seed = self.master_seed
        out.stream_index = self.stream_index
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, int(index)))
        out.generator = np.random.Generator(np.random.Philox(ss))
        return out

    def uniform(self, size=None):
        return self.generator.random(size)

    def exponential(self, rate: float, size=None):
        if rate <= 0:
            raise ValueError(f"rate must be positive, got {rate!r}")
        return self.generator.exponential(1.0 / rate, size)

    def gamma(self, shape: float, scale: float, size=None):
        if shape <= 0 or scale <= 0:
            raise ValueError(f"gamma needs shape, scale > 0, got {shape!r}, {scale!r}")
        return self.generator.gamma(shape, scale, size)

    def poisson(self, mean, size=None):
        if np.any(np.asarray(mean) < 0):
            raise ValueError("poisson mean must be non-negative")
        return self.generator.poisson(mean, size)


def breakpoints(*groups: Sequence[float]) -> list[float]:
    """Merge several break-point lists into one sorted, de-duplicated list."""
    return sorted({float(x) for g in groups for x in g})
