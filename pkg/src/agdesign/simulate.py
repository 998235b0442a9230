"""Simulation of recurrent-event trials from a gamma-frailty mixed Poisson process.

Given a frailty ``eps`` (gamma with mean 1, variance ``kappa``; ``eps = 1``
when ``kappa == 0``) and follow-up ``T``, a subject's event count is
``Poisson(eps * Lambda(T))`` and, conditionally on the count, the event times
are iid with CDF ``Lambda(t) / Lambda(T)`` on ``(0, T]``.  Event times are
therefore drawn by inverting the mean function at scaled uniforms.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from typing import Iterator, Optional, TextIO

import numpy as np

from .design import Design2, StudyDesign, entry_quantile
from .numerics import RngStream
from .power import split_arms
from .variance import ArmModel, TrialScenario

CSV_COLUMNS = ("subject_id", "arm", "entry", "follow_up", "event_time")


@dataclass(frozen=True)
class SubjectRecord:
    arm: int
    entry: float
    follow_up: float
    frailty: float
    event_times: tuple[float, ...]


@dataclass
class TrialData:
    """Column-oriented trial data.

    Subject arrays are indexed by subject id; event arrays are sorted by
    subject and then by time.
    """

    arm: np.ndarray
    entry: np.ndarray
    follow_up: np.ndarray
    frailty: np.ndarray
    event_subject: np.ndarray
    event_time: np.ndarray
    fingerprint: str = ""
    master_seed: Optional[int] = None
    replicate: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.arm)

    @property
    def n_events(self) -> int:
        return len(self.event_time)

    def counts(self) -> np.ndarray:
        return np.bincount(self.event_subject, minlength=self.n)

    def records(self) -> Iterator[SubjectRecord]:
        bounds = np.searchsorted(self.event_subject, np.arange(self.n + 1))
        for i in range(self.n):
            yield SubjectRecord(
                int(self.arm[i]),
                float(self.entry[i]),
                float(self.follow_up[i]),
                float(self.frailty[i]),
                tuple(self.event_time[bounds[i]:bounds[i + 1]].tolist()),
            )

    def to_csv(self, fh: TextIO) -> None:
        """Counting-process layout: one row per event plus a closing censor
        row (blank ``event_time``) per subject."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        bounds = np.searchsorted(self.event_subject, np.arange(self.n + 1))
        for i in range(self.n):
            head = (i, int(self.arm[i]), repr(float(self.entry[i])), repr(float(self.follow_up[i])))
            for t in self.event_time[bounds[i]:bounds[i + 1]]:
                w.writerow((*head, repr(float(t))))
            w.writerow((*head, ""))

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fh: TextIO) -> "TrialData":
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"CSV is missing columns: {sorted(missing)}")
        subjects: dict[str, list] = {}
        events: list[tuple[str, float]] = []
        for row in reader:
            sid = row["subject_id"]
            if sid not in subjects:
                subjects[sid] = [int(row["arm"]), float(row["entry"] or 0.0), float(row["follow_up"])]
            if row["event_time"] not in ("", None):
                events.append((sid, float(row["event_time"])))
        ids = {sid: k for k, sid in enumerate(subjects)}
        info = np.array(list(subjects.values()), dtype=float).reshape(-1, 3)
        arm = info[:, 0].astype(np.int8)
        if not np.all((arm == 0) | (arm == 1)):
            raise ValueError("arm must be 0 or 1")
        es = np.array([ids[s] for s, _ in events], dtype=np.int64)
        et = np.array([t for _, t in events], dtype=float)
        order = np.lexsort((et, es))
        follow = info[:, 2]
        if len(et) and np.any(et[order] > follow[es[order]]):
            raise ValueError("event after the end of follow-up")
        return cls(arm, info[:, 1], follow, np.full(len(arm), np.nan), es[order], et[order])


def _draw_arm(rng: RngStream, n: int, rate, kappa: float, delta: float, design: StudyDesign):
    """Vectorized draws for ``n`` subjects sharing one arm model.

    Draw order (frailty, entry, censoring, counts, event uniforms) is part of
    the reproducibility contract.
    """
    if kappa > 0:
        frailty = rng.gamma(1.0 / kappa, kappa, n)
    else:
        frailty = np.ones(n)
    if isinstance(design, Design2):
        entry = entry_quantile(design, rng.uniform(n))
        admin = design.tau - entry
    else:
        entry = np.zeros(n)
        admin = np.full(n, design.tau_c)
    if delta > 0:
        follow = np.minimum(rng.exponential(delta, n), admin)
    else:
        follow = admin
    cum_t = np.asarray(rate.cumulative(follow), dtype=float)
    counts = rng.poisson(frailty * cum_t)
    subj = np.repeat(np.arange(n), counts)
    u = 1.0 - rng.uniform(subj.size)  # (0, 1]
    times = np.minimum(np.asarray(rate.inverse_cumulative(u * cum_t[subj]), dtype=float), follow[subj])
    order = np.lexsort((times, subj))
    times = _break_ties(subj, times[order])
    return frailty, entry, follow, subj, times


def _break_ties(subj, times):
    dup = (np.diff(times) <= 0) & (subj[1:] == subj[:-1])
    while np.any(dup):
        idx = np.flatnonzero(dup) + 1
        times[idx] = np.nextafter(times[idx - 1], np.inf)
        dup = (np.diff(times) <= 0) & (subj[1:] == subj[:-1])
    return times


def simulate_subject(arm: ArmModel, design: StudyDesign, stream: RngStream, label: int = 0) -> SubjectRecord:
    """One subject; ``arm.rate`` must already include any treatment scaling."""
    frailty, entry, follow, _, times = _draw_arm(stream, 1, arm.rate, arm.kappa, arm.dropout, design)
    return SubjectRecord(label, float(entry[0]), float(follow[0]), float(frailty[0]), tuple(times.tolist()))


def scenario_fingerprint(sc: TrialScenario) -> str:
    return hashlib.sha256(repr(sc).encode()).hexdigest()[:16]


def simulate_trial(sc: TrialScenario, n_total: int, stream: RngStream) -> TrialData:
    """Treatment subjects get ids ``0..n1-1``, control the rest."""
    if n_total < 2:
        raise ValueError("need at least two subjects")
    n1, n0 = split_arms(n_total, sc.p1)
    parts = []
    for n, arm in ((n1, sc.treatment), (n0, sc.control)):
        parts.append(_draw_arm(stream, n, arm.rate, arm.kappa, arm.dropout, sc.design))
    (f1, e1, t1, s1, x1), (f0, e0, t0, s0, x0) = parts
    return TrialData(
        arm=np.concatenate([np.ones(n1, dtype=np.int8), np.zeros(n0, dtype=np.int8)]),
        entry=np.concatenate([e1, e0]),
        follow_up=np.concatenate([t1, t0]),
        frailty=np.concatenate([f1, f0]),
        event_subject=np.concatenate([s1, s0 + n1]),
        event_time=np.concatenate([x1, x0]),
        fingerprint=scenario_fingerprint(sc),
        master_seed=stream.master_seed,
        replicate=stream.stream_index,
    )


def empirical_retention(follow_up: np.ndarray, t) -> np.ndarray:
    """Fraction of subjects with follow-up beyond each ``t``."""
    s = np.sort(follow_up)
    return 1.0 - np.searchsorted(s, np.asarray(t), side="right") / len(s)


__all__ = [
    "SubjectRecord",
    "TrialData",
    "simulate_subject",
    "simulate_trial",
    "scenario_fingerprint",
    "empirical_retention",
]
