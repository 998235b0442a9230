"""JSON scenario configuration: validation, defaults and object construction."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Optional

from .design import Design1, Design2
from .power import Equivalence, Hypothesis, NonInferiority, Superiority
from .rates import PiecewiseConstant, Weibull
from .variance import TrialScenario


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


SECTIONS = {
    "design": ("type", "tau_c", "tau_a", "eta"),
    "control": ("rate", "kappa", "dropout_delta"),
    "treatment": ("rate_ratio", "kappa", "dropout_delta"),
    "allocation": ("p1",),
    "hypothesis": ("type", "m0", "ml", "mu", "alpha", "lower_is_better"),
    "run": ("target_power", "n_total", "replicates", "seed"),
}
RATE_KEYS = {"weibull": ("psi", "nu"), "piecewise": ("knots", "rates")}


@dataclass
class Resolved:
    config: dict
    scenario: TrialScenario
    hypothesis: Hypothesis
    target_power: float
    n_total: Optional[int]
    replicates: int
    seed: int


def _check_keys(obj: Any, allowed, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0],
                          f"unknown field; valid keys are {', '.join(allowed)}")


def _num(obj: dict, key: str, path: str, default: Any = ..., positive=False, nonneg=False):
    if key not in obj or obj[key] is None:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "required field missing")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    if nonneg and val < 0:
        raise ConfigError(f"{path}.{key}", "must be non-negative")
    return float(val)


def _int(obj: dict, key: str, path: str, default: Any = ..., minimum: int = 0):
    if key not in obj or obj[key] is None:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "required field missing")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, int) and not (isinstance(val, float) and val.is_integer()):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {val!r}")
    if val < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}")
    return int(val)


def _rate(obj: Any, path: str):
    if not isinstance(obj, dict) or len(obj) != 1 or next(iter(obj)) not in RATE_KEYS:
        raise ConfigError(path, "expected exactly one of: weibull, piecewise")
    kind, body = next(iter(obj.items()))
    sub = f"{path}.{kind}"
    _check_keys(body, RATE_KEYS[kind], sub)
    if kind == "weibull":
        psi = _num(body, "psi", sub, positive=True)
        nu = _num(body, "nu", sub, positive=True)
        return Weibull(psi, nu), {"weibull": {"psi": psi, "nu": nu}}
    knots, rates = body.get("knots"), body.get("rates")
    if not isinstance(knots, list) or not isinstance(rates, list):
        raise ConfigError(sub, "knots and rates must be lists")
    try:
        rf = PiecewiseConstant(knots, rates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(sub, str(exc)) from None
    return rf, {"piecewise": {"knots": list(rf.knots), "rates": list(rf.rates)}}


def resolve(raw: dict) -> Resolved:
    """Validate ``raw`` and fill defaults; the returned ``config`` is complete."""
    _check_keys(raw, tuple(SECTIONS), "")
    for sec, keys in SECTIONS.items():
        if sec in raw:
            _check_keys(raw[sec], keys, sec)
    d = raw.get("design")
    if d is None:
        raise ConfigError("design", "required section missing")
    dtype = d.get("type")
    tau_c = _num(d, "tau_c", "design", positive=True)
    if dtype == "design1":
        if d.get("tau_a") not in (None,) or d.get("eta") not in (None,):
            raise ConfigError("design", "design1 takes only tau_c")
        design = Design1(tau_c)
        dconf = {"type": "design1", "tau_c": tau_c}
    elif dtype == "design2":
        tau_a = _num(d, "tau_a", "design", positive=True)
        eta = _num(d, "eta", "design", 0.0)
        design = Design2(tau_a, tau_c, eta)
        dconf = {"type": "design2", "tau_c": tau_c, "tau_a": tau_a, "eta": eta}
    else:
        raise ConfigError("design.type", "must be 'design1' or 'design2'")

    c = raw.get("control")
    if c is None:
        raise ConfigError("control", "required section missing")
    if "rate" not in c:
        raise ConfigError("control.rate", "required field missing")
    rf, rconf = _rate(c["rate"], "control.rate")
    k0 = _num(c, "kappa", "control", 0.0, nonneg=True)
    d0 = _num(c, "dropout_delta", "control", 0.0, nonneg=True)

    t = raw.get("treatment")
    if t is None:
        raise ConfigError("treatment", "required section missing")
    rr = _num(t, "rate_ratio", "treatment", positive=True)
    k1 = _num(t, "kappa", "treatment", k0, nonneg=True)
    d1 = _num(t, "dropout_delta", "treatment", d0, nonneg=True)

    a = raw.get("allocation", {})
    p1 = _num(a, "p1", "allocation", 0.5)
    if not 0 < p1 < 1:
        raise ConfigError("allocation.p1", "must lie in (0, 1)")

    h = raw.get("hypothesis", {})
    htype = h.get("type", "superiority")
    alpha = _num(h, "alpha", "hypothesis", 0.05)
    if not 0 < alpha < 1:
        raise ConfigError("hypothesis.alpha", "must lie in (0, 1)")
    lib = h.get("lower_is_better", True)
    if not isinstance(lib, bool):
        raise ConfigError("hypothesis.lower_is_better", "expected true or false")
    try:
        if htype == "superiority":
            hyp = Superiority(alpha=alpha, lower_is_better=lib)
            hconf = {"type": htype, "alpha": alpha, "lower_is_better": lib}
        elif htype == "noninferiority":
            hyp = NonInferiority(_num(h, "m0", "hypothesis", positive=True), alpha, lib)
            hconf = {"type": htype, "m0": hyp.m0, "alpha": alpha, "lower_is_better": lib}
        elif htype == "equivalence":
            hyp = Equivalence(_num(h, "ml", "hypothesis"), _num(h, "mu", "hypothesis"), alpha)
            hconf = {"type": htype, "ml": hyp.ml, "mu": hyp.mu, "alpha": alpha}
        else:
            raise ConfigError("hypothesis.type", "must be superiority, noninferiority or equivalence")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("hypothesis", str(exc)) from None

    r = raw.get("run", {})
    target = _num(r, "target_power", "run", 0.9)
    if not 0 < target < 1:
        raise ConfigError("run.target_power", "must lie in (0, 1)")
    n_total = _int(r, "n_total", "run", None, minimum=2)
    reps = _int(r, "replicates", "run", 5000, minimum=1)
    seed = _int(r, "seed", "run", 20190101, minimum=0)
    if seed >= 2**64:
        raise ConfigError("run.seed", "must fit in 64 bits")

    sc = TrialScenario(design, rf, rr, k0, k1, d0, d1, p1)
    config = {
        "design": dconf,
        "control": {"rate": rconf, "kappa": k0, "dropout_delta": d0},
        "treatment": {"rate_ratio": rr, "kappa": k1, "dropout_delta": d1},
        "allocation": {"p1": p1},
        "hypothesis": hconf,
        "run": {"target_power": target, "n_total": n_total, "replicates": reps, "seed": seed},
    }
    return Resolved(config, sc, hyp, target, n_total, reps, seed)


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override; value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, _, text = assignment.partition("=")
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(key, "empty key")
    if parts[0] not in SECTIONS:
        raise ConfigError(parts[0], f"unknown section; valid keys are {', '.join(SECTIONS)}")
    if len(parts) > 1 and parts[1] not in SECTIONS[parts[0]]:
        raise ConfigError(".".join(parts[:2]), f"unknown field; valid keys are {', '.join(SECTIONS[parts[0]])}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    out = copy.deepcopy(raw)
    node = out
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            node[p] = nxt
        node = nxt
    node[parts[-1]] = value
    return out


def load(path: str, overrides=()) -> Resolved:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError(path, str(exc)) from None
    for o in overrides:
        raw = apply_override(raw, o)
    return resolve(raw)
