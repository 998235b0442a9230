"""Monte Carlo power estimation and reproduction of the published design tables."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .agfit import DegenerateFitError, decide, fit
from .design import Design1, Design2
from .numerics import RngStream
from .power import Equivalence, Hypothesis, NonInferiority, Superiority, power, sample_size
from .rates import PiecewiseConstant, Weibull
from .simulate import simulate_trial
from .variance import TrialScenario, variance

DEFAULT_REPLICATES = 5000


@dataclass
class SimulationResult:
    replicates: int
    rejections: int
    empirical_power: float
    mc_stderr: float
    degenerate_count: int
    coverage: float
    mean_beta_hat: float
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = asdict(self)
        if not timing:
            out.pop("wall_time")
        return out


def _run_block(args):
    sc, hyp, n_total, seed, start, stop = args
    beta = sc.beta
    rejections = degenerate = covered = 0
    betas = []
    for rep in range(start, stop):
        data = simulate_trial(sc, n_total, RngStream(seed, rep))
        try:
            f = fit(data, hyp.alpha)
        except DegenerateFitError:
            degenerate += 1
            betas.append(math.nan)
            continue
        degenerate += f.degenerate
        rejections += decide(f, hyp)
        covered += (not f.degenerate) and f.ci[0] < beta < f.ci[1]
        betas.append(f.beta_hat)
    return rejections, degenerate, covered, betas


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get("AGDESIGN_THREADS", "1"))
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def empirical_power(
    sc: TrialScenario,
    hyp: Hypothesis,
    n_total: int,
    replicates: int = DEFAULT_REPLICATES,
    master_seed: int = 20190101,
    workers: Optional[int] = 1,
) -> SimulationResult:
    """Fraction of simulated trials whose robust CI rejects the null.

    Replicate ``k`` always uses stream ``(master_seed, k)``; blocks of
    replicates are reduced with integer sums and an exact float sum, so the
    result does not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    workers = resolve_workers(workers)
    t0 = time.perf_counter()
    nblocks = min(replicates, max(1, workers * 4))
    edges = np.linspace(0, replicates, nblocks + 1).round().astype(int)
    jobs = [(sc, hyp, n_total, master_seed, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers == 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    rej = sum(p[0] for p in parts)
    deg = sum(p[1] for p in parts)
    cov = sum(p[2] for p in parts)
    betas = [b for p in parts for b in p[3] if not math.isnan(b)]
    p = rej / replicates
    return SimulationResult(
        replicates=replicates,
        rejections=rej,
        empirical_power=p,
        mc_stderr=math.sqrt(p * (1 - p) / replicates),
        degenerate_count=deg,
        coverage=cov / replicates,
        mean_beta_hat=math.fsum(betas) / len(betas) if betas else math.nan,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# published tables (design-2 entries are the corrected values)

TAU_C, TAU_A, DELTA = 1.0, 0.5, 0.25
DESIGNS = {"design1": Design1(TAU_C), "design2": Design2(TAU_A, TAU_C, 0.0)}
EXAMPLE3_RATE = PiecewiseConstant([0.0, 0.4, 0.8, 1.0], [1.0, 1.25, 1.5])

# (kappa, psi, nu) -> {(design, allocation): (size, nominal %, SIM %)}
_T1 = [
    (0.4, 1.1, 0.9, (289, 90.05, 91.03), (304, 90.00, 89.05), (256, 90.01, 90.67), (271, 90.04, 89.38)),
    (0.4, 1.1, 1.2, (294, 90.01, 90.68), (310, 90.03, 89.33), (251, 90.10, 90.75), (265, 90.02, 89.34)),
    (0.4, 1.5, 0.9, (231, 90.12, 90.78), (244, 90.03, 89.13), (207, 90.05, 90.63), (220, 90.03, 89.11)),
    (0.4, 1.5, 1.2, (235, 90.07, 90.45), (249, 90.07, 88.90), (204, 90.13, 90.54), (217, 90.09, 89.30)),
    (0.8, 1.1, 0.9, (358, 90.02, 90.77), (382, 90.01, 89.15), (328, 90.08, 90.67), (351, 90.03, 89.35)),
    (0.8, 1.1, 1.2, (365, 90.03, 90.77), (390, 90.05, 89.23), (324, 90.03, 90.48), (348, 90.03, 89.34)),
    (0.8, 1.5, 0.9, (300, 90.07, 90.39), (322, 90.03, 89.05), (278, 90.02, 90.52), (300, 90.02, 89.59)),
    (0.8, 1.5, 1.2, (306, 90.08, 90.74), (328, 90.01, 89.34), (277, 90.04, 90.60), (300, 90.09, 89.42)),
    (1.2, 1.1, 0.9, (428, 90.06, 90.74), (460, 90.01, 89.49), (399, 90.05, 90.38), (431, 90.02, 88.97)),
    (1.2, 1.1, 1.2, (436, 90.04, 90.59), (469, 90.01, 89.55), (398, 90.06, 90.24), (431, 90.05, 89.38)),
    (1.2, 1.5, 0.9, (369, 90.03, 90.13), (400, 90.03, 89.17), (349, 90.00, 90.56), (380, 90.01, 89.51)),
    (1.2, 1.5, 1.2, (376, 90.02, 90.24), (408, 90.04, 89.28), (351, 90.07, 90.32), (382, 90.02, 89.31)),
]

# (psi, nu, kappa0, kappa1, design1 ref, design2 ref)
_T2_DISPERSION = [
    (1.1, 0.9, 0.4, 0.8, (324, 90.08, 91.12), (292, 90.05, 90.95)),
    (1.1, 0.9, 0.4, 1.2, (358, 90.02, 91.07), (328, 90.08, 91.10)),
    (1.1, 0.9, 0.8, 1.2, (393, 90.04, 90.84), (363, 90.03, 90.80)),
    (1.1, 1.2, 0.4, 0.8, (330, 90.06, 90.79), (287, 90.01, 90.69)),
    (1.1, 1.2, 0.4, 1.2, (365, 90.03, 91.02), (324, 90.03, 90.99)),
    (1.1, 1.2, 0.8, 1.2, (400, 90.00, 90.75), (361, 90.04, 90.69)),
    (1.5, 0.9, 0.4, 0.8, (265, 90.04, 90.82), (243, 90.09, 90.94)),
    (1.5, 0.9, 0.4, 1.2, (300, 90.07, 91.26), (278, 90.02, 91.12)),
    (1.5, 0.9, 0.8, 1.2, (334, 90.00, 90.70), (314, 90.06, 90.89)),
    (1.5, 1.2, 0.4, 0.8, (270, 90.03, 90.63), (240, 90.02, 90.62)),
    (1.5, 1.2, 0.4, 1.2, (306, 90.08, 91.13), (277, 90.04, 90.72)),
    (1.5, 1.2, 0.8, 1.2, (341, 90.05, 90.67), (314, 90.06, 90.79)),
]

# (psi, nu, kappa, design1 ref, design2 ref); delta1 = 0.15, delta0 = 0.35
_T2_DROPOUT = [
    (1.1, 0.9, 0.4, (287, 90.06, 90.89), (254, 90.01, 90.57)),
    (1.1, 0.9, 0.8, (356, 90.02, 90.55), (326, 90.07, 90.65)),
    (1.1, 0.9, 1.2, (426, 90.06, 90.46), (397, 90.04, 90.26)),
    (1.1, 1.2, 0.4, (292, 90.05, 90.37), (248, 90.01, 90.36)),
    (1.1, 1.2, 0.8, (363, 90.06, 90.58), (322, 90.03, 90.66)),
    (1.1, 1.2, 1.2, (434, 90.06, 90.29), (396, 90.04, 90.33)),
    (1.5, 0.9, 0.4, (229, 90.06, 90.55), (206, 90.11, 90.59)),
    (1.5, 0.9, 0.8, (298, 90.01, 90.36), (277, 90.05, 90.47)),
    (1.5, 0.9, 1.2, (368, 90.06, 90.33), (348, 90.02, 90.26)),
    (1.5, 1.2, 0.4, (233, 90.05, 90.51), (202, 90.08, 90.07)),
    (1.5, 1.2, 0.8, (304, 90.05, 90.63), (276, 90.08, 90.48)),
    (1.5, 1.2, 1.2, (375, 90.06, 90.37), (349, 90.01, 90.45)),
]
T2_DELTA1, T2_DELTA0 = 0.15, 0.35

# (kappa, rate ratio, NI ref, equivalence ref)
_T3 = [
    (0.8, 0.9, (547, 80.00, 80.26), (1781, 80.02, 79.49)),
    (0.8, 1.0, (1153, 80.03, 79.96), (1262, 80.02, 79.58)),
    (1.2, 0.9, (675, 80.04, 80.32), (2195, 80.01, 81.20)),
    (1.2, 1.0, (1429, 80.02, 80.31), (1564, 80.01, 80.47)),
]
NI_MARGIN = 1.25
EQUIV_MARGINS = (0.75, 1.25)


@dataclass(frozen=True)
class TableCase:
    table: int
    block: str
    design: str
    scenario: TrialScenario
    hypothesis: Hypothesis
    target_power: float
    reference: tuple[int, float, float]  # size, nominal %, SIM %

    def label(self) -> dict:
        sc = self.scenario
        rate = sc.rate
        out = {"table": self.table, "block": self.block, "design": self.design, "p1": round(sc.p1, 6)}
        if isinstance(rate, Weibull):
            out.update(psi=rate.psi, nu=rate.nu)
        else:
            out.update(psi=None, nu=None)
        out.update(
            kappa0=sc.kappa0,
            kappa1=sc.kappa1,
            delta0=sc.delta0,
            delta1=sc.delta1,
            rate_ratio=sc.rate_ratio,
            hypothesis=self.hypothesis.kind,
            target_power=self.target_power,
        )
        return out


def table_cases(table_id: int) -> list[TableCase]:
    cases = []
    if table_id == 1:
        sup = Superiority(alpha=0.05)
        for kappa, psi, nu, *refs in _T1:
            for (design, p1), ref in zip(
                [("design1", 0.5), ("design1", 2 / 3), ("design2", 0.5), ("design2", 2 / 3)], refs
            ):
                sc = TrialScenario(DESIGNS[design], Weibull(psi, nu), 0.6, kappa, delta0=DELTA, p1=p1)
                block = "balanced" if p1 == 0.5 else "unbalanced"
                cases.append(TableCase(1, block, design, sc, sup, 0.9, ref))
    elif table_id == 2:
        sup = Superiority(alpha=0.05)
        for psi, nu, k0, k1, *refs in _T2_DISPERSION:
            for design, ref in zip(("design1", "design2"), refs):
                sc = TrialScenario(DESIGNS[design], Weibull(psi, nu), 0.6, k0, k1, delta0=DELTA)
                cases.append(TableCase(2, "unequal_dispersion", design, sc, sup, 0.9, ref))
        for psi, nu, k, *refs in _T2_DROPOUT:
            for design, ref in zip(("design1", "design2"), refs):
                sc = TrialScenario(DESIGNS[design], Weibull(psi, nu), 0.6, k, delta0=T2_DELTA0, delta1=T2_DELTA1)
                cases.append(TableCase(2, "unequal_dropout", design, sc, sup, 0.9, ref))
    elif table_id == 3:
        for kappa, rr, ni_ref, eq_ref in _T3:
            sc = TrialScenario(DESIGNS["design1"], EXAMPLE3_RATE, rr, kappa, delta0=DELTA)
            cases.append(TableCase(3, "noninferiority", "design1", sc, NonInferiority(NI_MARGIN), 0.8, ni_ref))
        for kappa, rr, ni_ref, eq_ref in _T3:
            sc = TrialScenario(DESIGNS["design1"], EXAMPLE3_RATE, rr, kappa, delta0=DELTA)
            cases.append(TableCase(3, "equivalence", "design1", sc, Equivalence(*EQUIV_MARGINS), 0.8, eq_ref))
    else:
        raise ValueError(f"unknown table {table_id!r}; choose 1, 2 or 3")
    return cases


def reproduce_table(
    table_id: int, replicates: int = 0, seed: int = 20190101, workers: Optional[int] = 1
) -> list[dict]:
    """Recompute every cell of a published table.

    ``replicates == 0`` skips the Monte Carlo column.
    """
    rows = []
    for case in table_cases(table_id):
        v = variance(case.scenario).v_beta
        size = sample_size(case.scenario, case.hypothesis, case.target_power, v)
        row = case.label()
        row.update(
            v_beta=v,
            total_size=size.total_n,
            nominal_power=100 * size.nominal_power,
            simulated_power=None,
            ref_size=case.reference[0],
            ref_nominal=case.reference[1],
            ref_sim=case.reference[2],
        )
        if replicates:
            sim = empirical_power(case.scenario, case.hypothesis, size.total_n, replicates, seed, workers)
            row["simulated_power"] = 100 * sim.empirical_power
        rows.append(row)
    return rows


TABLE_COLUMNS = (
    "table", "block", "design", "p1", "psi", "nu", "kappa0", "kappa1", "delta0", "delta1", "rate_ratio",
    "hypothesis", "target_power", "v_beta", "total_size", "nominal_power", "simulated_power",
    "ref_size", "ref_nominal", "ref_sim",
)


def nominal_power_at(sc: TrialScenario, hyp: Hypothesis, n: int) -> float:
    return power(sc, hyp, n)
