"""Accelerated state preparation by segmented optical pumping.

The pump time ``T_P`` is split into ``N`` segments of ``t_P = T_P / N``, each
followed by a readout of duration ``t_R``. The protocol stops at the first
readout that finds the atom in the target state, or after segment ``N``.
State vectors are ``(p_initial, p_target)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import run_partitioned


@dataclass(frozen=True)
class PumpModel:
    """Exponential pumping with 1/e time `tau` and residual population `r`."""

    tau: float
    r: float = 0.0

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"r must lie in [0, 1), got {self.r!r}")

    @classmethod
    def for_residual(cls, total_pump_time: float, residual: float = 1e-3, r: float = 0.0):
        """Pump whose residual population after `total_pump_time` is `residual` (r = 0).

        The default gives ``tau = T_P / ln(1000)``, i.e. pumping for about seven
        1/e times.
        """
        return cls(total_pump_time / math.log(1.0 / residual), r)


@dataclass(frozen=True)
class ProtocolConfig:
    total_pump_time: float
    n_segments: int
    readout_time: float
    initial_state: tuple = (1.0, 0.0)

    def __post_init__(self):
        if int(self.n_segments) != self.n_segments or self.n_segments < 1:
            raise ValueError(f"n_segments must be an integer >= 1, got {self.n_segments!r}")
        if not (self.total_pump_time > 0 and math.isfinite(self.total_pump_time)):
            raise ValueError("total_pump_time must be positive")
        if not (self.readout_time >= 0 and math.isfinite(self.readout_time)):
            raise ValueError("readout_time must be >= 0")
        s = np.asarray(self.initial_state, dtype=float)
        if s.shape != (2,) or np.any(s < 0) or abs(s.sum() - 1.0) > 1e-12:
            raise ValueError(f"initial_state must be a probability 2-vector, got {self.initial_state!r}")
        object.__setattr__(self, "initial_state", (float(s[0]), float(s[1])))

    @property
    def segment_time(self) -> float:
        return self.total_pump_time / self.n_segments

    @property
    def cycle_time(self) -> float:
        return self.segment_time + self.readout_time


@dataclass(frozen=True, eq=False)
class ProtocolReport:
    """Termination distribution over segments 1..N and derived figures.

    ``p_end[i - 1]`` is the probability that the protocol ends after segment i.
    `mean_time_stderr` is only nonzero for Monte Carlo estimates.
    """

    p_end: np.ndarray
    mean_time: float
    failure_prob: float
    mean_time_stderr: float = 0.0

    @property
    def n_segments(self) -> int:
        return len(self.p_end)


def transfer_matrix(pump: PumpModel, t: float) -> np.ndarray:
    """Column-stochastic 2x2 matrix mapping ``(p_i, p_t)`` through pumping time `t`.

    Both columns relax to the steady state ``(r, 1 - r)`` with time constant
    ``tau``, so the matrix is the identity at ``t = 0``. For ``r = 0`` the
    target state is absorbing.
    """
    if t < 0:
        raise ValueError("pumping time must be >= 0")
    e = math.exp(-t / pump.tau)
    r = pump.r
    return np.array([
        [r + (1 - r) * e, r * (1 - e)],
        [(1 - r) * (1 - e), 1 - r * (1 - e)],
    ])


def protocol_report(pump: PumpModel, config: ProtocolConfig) -> ProtocolReport:
    """Closed-form termination probabilities and mean protocol length.

    Ending at segment ``i < N`` requires a target readout at i after initial
    readouts at every earlier segment, so ``P_end(i)`` is the target component
    after segment i times the initial components of the earlier segments. A
    readout that finds the initial state leaves the atom there, so segments
    after the first start from ``(1, 0)``. Segment N absorbs the rest
    (cutoff), and its initial-state part is reported as `failure_prob`.
    """
    n = config.n_segments
    m = transfer_matrix(pump, config.segment_time)
    s = np.asarray(config.initial_state)
    p_end = np.empty(n)
    survive = 1.0  # probability that every readout so far found the initial state
    for i in range(n):
        s1 = m @ s
        if i < n - 1:
            p_end[i] = survive * s1[1]
            survive *= s1[0]
        else:
            p_end[i] = survive
            failure = survive * s1[0]
        s = np.array([1.0, 0.0])
    idx = np.arange(1, n + 1)
    mean_time = float(np.dot(p_end, idx)) * config.cycle_time
    return ProtocolReport(p_end, mean_time, float(failure))


def segment_sweep(pump: PumpModel, total_pump_time: float, readout_time: float, n_max: int,
                  initial_state=(1.0, 0.0)) -> list[ProtocolReport]:
    """Closed-form reports for N = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [protocol_report(pump, ProtocolConfig(total_pump_time, n, readout_time, initial_state))
            for n in range(1, n_max + 1)]


def optimize_segments(pump: PumpModel, total_pump_time: float, readout_time: float, n_max: int,
                      initial_state=(1.0, 0.0)):
    """Segment count in 1..n_max with the shortest mean protocol time.

    Returns
    -------
    best_n : int
    report : ProtocolReport
    """
    reports = segment_sweep(pump, total_pump_time, readout_time, n_max, initial_state)
    times = np.array([rep.mean_time for rep in reports])
    i = int(np.argmin(times))  # first minimum, so ties go to the smaller N
    return i + 1, reports[i]


def sweep_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_segments", "mean_time_us", "failure_prob"])
    for rep in reports:
        w.writerow([rep.n_segments, f"{rep.mean_time * 1e6:.8e}", f"{rep.failure_prob:.8e}"])
    return buf.getvalue()


def simulate_protocol(pump: PumpModel, config: ProtocolConfig, n_trials: int, seed,
                      workers: int = 1) -> ProtocolReport:
    """Monte Carlo run of the segmented protocol as a two-state Markov chain."""
    n = config.n_segments
    m = transfer_matrix(pump, config.segment_time)

    def work(k, rng):
        state = (rng.random(k) < config.initial_state[1]).astype(np.int8)  # 1 = target
        end = np.full(k, n, dtype=np.int64)
        failed = np.zeros(k, dtype=bool)
        active = np.arange(k)
        for i in range(1, n + 1):
            u = rng.random(active.size)
            cur = state[active]
            to_target = np.where(cur == 0, u < m[1, 0], u >= m[0, 1])
            state[active] = to_target.astype(np.int8)
            if i == n:
                failed[active] = ~to_target
                break
            done = active[to_target]
            end[done] = i
            active = active[~to_target]
            if active.size == 0:
                break
        return end, failed

    parts = run_partitioned(work, n_trials, seed, workers)
    end = np.concatenate([p[0] for p in parts])
    failed = np.concatenate([p[1] for p in parts])
    p_end = np.bincount(end - 1, minlength=n)[:n] / n_trials
    # moments of the integer segment index, so a constant index gives an exact zero spread
    spread = float(end.std(ddof=1)) if n_trials > 1 else 0.0
    stderr = spread * config.cycle_time / math.sqrt(n_trials)
    return ProtocolReport(p_end, float(end.mean()) * config.cycle_time, float(failed.mean()), stderr)
