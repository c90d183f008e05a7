"""Photon-counting readout: detector model, Monte Carlo histograms and
threshold discrimination between bright and dark atomic states.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from ._parallel import as_seed_sequence, run_partitioned

N_MAX_DEFAULT = 64


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon counter with non-paralyzable dead time.

    `efficiency` is the overall probability that a photon emitted into the
    cavity is registered; `background_rate` (counts/s) lumps all noise
    sources, e.g. fiber Raman plus stray probe light.
    """

    efficiency: float = 1.0
    dead_time: float = 0.0
    background_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")
        if not (self.dead_time >= 0 and math.isfinite(self.dead_time)):
            raise ValueError(f"dead_time must be finite and >= 0, got {self.dead_time!r}")
        if not (self.background_rate >= 0 and math.isfinite(self.background_rate)):
            raise ValueError(f"background_rate must be finite and >= 0, got {self.background_rate!r}")


@dataclass(frozen=True)
class ReadoutConfig:
    """One readout window.

    Rates are detected-side arrival rates before dead time: `bright_rate`
    includes background, `dark_rate` is background only. `depump_rate` lets
    a bright atom leak to the dark state during the window. `survival` is the
    measured atom survival probability, carried through unchanged.
    """

    duration: float
    bright_rate: float
    dark_rate: float
    depump_rate: float = 0.0
    survival: float | None = None

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        for name in ("bright_rate", "dark_rate", "depump_rate"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.depump_rate > 0 and self.bright_rate < self.dark_rate:
            raise ValueError("bright_rate must include the background when depumping is modeled")


@dataclass(frozen=True, eq=False)
class CountHistogram:
    """Distribution of detected photon number; ``probs[N]`` is P(N).

    The last bin holds the folded tail ``P(N >= n_max)``. `n_trials` is 0 for
    analytic distributions.
    """

    probs: np.ndarray
    n_trials: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, counts, n_max: int = N_MAX_DEFAULT) -> "CountHistogram":
        counts = np.asarray(counts, dtype=np.int64)
        binned = np.bincount(np.minimum(counts, n_max), minlength=n_max + 1)
        return cls(binned / counts.size, int(counts.size))

    @property
    def counts(self) -> dict:
        return {int(n): float(p) for n, p in enumerate(self.probs) if p > 0}

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def trial_counts(self) -> np.ndarray:
        return np.rint(self.probs * self.n_trials).astype(np.int64)

    def to_csv(self) -> str:
        """CSV text with columns ``N, probability, trials`` (trials observed at N)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "probability", "trials"])
        for n, (p, c) in enumerate(zip(self.probs, self.trial_counts())):
            w.writerow([n, f"{p:.8e}", int(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountHistogram":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or list(rows[0]) != ["N", "probability", "trials"]:
            raise ValueError("expected columns N, probability, trials")
        ns = [int(r["N"]) for r in rows]
        if ns != list(range(len(ns))):
            raise ValueError("N column must run 0, 1, 2, ... without gaps")
        probs = np.array([float(r["probability"]) for r in rows])
        trials = sum(int(r["trials"]) for r in rows)
        return cls(probs, trials)


@dataclass(frozen=True)
class DiscriminationResult:
    threshold: int
    infidelity: float
    dark_error: float
    bright_error: float
    survival: float | None = None

    def standard_error(self, n_bright: int, n_dark: int) -> float:
        """Binomial standard error of the infidelity estimate."""
        vb = self.bright_error * (1 - self.bright_error) / n_bright
        vd = self.dark_error * (1 - self.dark_error) / n_dark
        return 0.5 * math.sqrt(vb + vd)


def dead_time_correct(measured_rate, dead_time):
    """True input rate from a measured rate: ``R / (1 - R * t_dead)``."""
    r = np.asarray(measured_rate, dtype=float)
    if np.any(r < 0) or dead_time < 0:
        raise ValueError("measured_rate and dead_time must be >= 0")
    load = r * dead_time
    if np.any(load >= 1):
        raise ValueError("measured_rate * dead_time >= 1: detector saturated")
    out = r / (1.0 - load)
    return float(out) if out.ndim == 0 else out


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Accepted-count mask for rows of sorted arrival times (``inf`` = padding).

    An accepted count blinds the detector for `dead_time`; arrivals inside
    that window are dropped and do not extend it.
    """
    n, width = times.shape
    accepted = np.zeros((n, width), dtype=bool)
    last = np.full(n, -np.inf)
    for j in range(width):
        tj = times[:, j]
        ok = np.isfinite(tj) & (tj >= last + dead_time)
        accepted[:, j] = ok
        last = np.where(ok, tj, last)
    return accepted


def _arrival_times(rng, n, rate_main, span_main, rate_extra, duration):
    """Sorted, inf-padded Poisson arrival times for `n` trials.

    The main stream has rate `rate_main` over ``[0, span_main[i]]`` for trial i;
    the optional extra stream has rate `rate_extra` over ``[0, duration]``.
    """
    k_main = rng.poisson(rate_main * span_main)
    k_extra = rng.poisson(rate_extra * duration, size=n) if rate_extra > 0 else np.zeros(n, np.int64)
    total = k_main + k_extra
    width = int(total.max()) if n else 0
    if width == 0:
        return np.zeros((n, 0)), total
    col = np.arange(width)
    u = rng.random((n, width))
    in_main = col < k_main[:, None]
    in_extra = (col >= k_main[:, None]) & (col < total[:, None])
    span = np.asarray(span_main, dtype=float)[:, None]
    times = np.where(in_main, u * span, np.where(in_extra, u * duration, np.inf))
    times.sort(axis=1)
    return times, total


def _input_rate(config: ReadoutConfig, state: str):
    if state == "bright":
        return config.bright_rate
    if state == "dark":
        return config.dark_rate
    raise ValueError(f"state must be 'bright' or 'dark', got {state!r}")


def simulate_trials(config: ReadoutConfig, detector: DetectorModel, state: str, n: int, rng):
    """Arrival and accepted counts for `n` independent readout windows.

    Returns
    -------
    arrivals, accepted : ndarray of int
    """
    rate = _input_rate(config, state)
    t = config.duration
    lam = rate * t
    chunk = max(1024, int(4_000_000 // (lam + 6 * math.sqrt(lam) + 16)))
    arrivals = np.empty(n, dtype=np.int64)
    accepted = np.empty(n, dtype=np.int64)
    depump = state == "bright" and config.depump_rate > 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        if depump:
            signal = config.bright_rate - config.dark_rate
            t_leak = np.minimum(rng.exponential(1.0 / config.depump_rate, size=m), t)
            times, total = _arrival_times(rng, m, signal, t_leak, config.dark_rate, t)
        else:
            times, total = _arrival_times(rng, m, rate, np.full(m, t), 0.0, t)
        arrivals[start:start + m] = total
        if times.shape[1] == 0:
            accepted[start:start + m] = 0
        elif detector.dead_time > 0:
            accepted[start:start + m] = apply_dead_time(times, detector.dead_time).sum(axis=1)
        else:
            accepted[start:start + m] = total
    return arrivals, accepted


def simulate_counts(config: ReadoutConfig, detector: DetectorModel, state: str,
                    n_trials: int, seed, workers: int = 1,
                    n_max: int = N_MAX_DEFAULT) -> CountHistogram:
    """Monte Carlo histogram of detected photon numbers for one prepared state.

    Deterministic for a given ``(seed, workers)``. Partial histograms from the
    workers are merged by adding counts.
    """
    _input_rate(config, state)

    def work(n, rng):
        _, acc = simulate_trials(config, detector, state, n, rng)
        return np.bincount(np.minimum(acc, n_max), minlength=n_max + 1)

    parts = run_partitioned(work, n_trials, seed, workers)
    total = np.sum(parts, axis=0)
    return CountHistogram(total / n_trials, n_trials)


def analytic_dark_histogram(config: ReadoutConfig, detector: DetectorModel,
                            n_max: int = N_MAX_DEFAULT) -> CountHistogram:
    """Poisson background distribution, valid when dead time is negligible.

    Raises ValueError when ``dark_rate * dead_time > 0.01``; use
    :func:`simulate_counts` in that regime.
    """
    occupancy = config.dark_rate * detector.dead_time
    if occupancy > 0.01:
        raise ValueError(
            f"dead-time occupancy {occupancy:.3g} too high for the Poisson form; use simulate_counts")
    lam = config.dark_rate * config.duration
    probs = stats.poisson.pmf(np.arange(n_max + 1), lam)
    probs[n_max] = stats.poisson.sf(n_max - 1, lam)
    return CountHistogram(probs / probs.sum(), 0)


def threshold_errors(bright: CountHistogram, dark: CountHistogram):
    """Candidate thresholds with their dark and bright error probabilities.

    Thresholds run from 1 to one past the largest count with nonzero mass.
    """
    size = max(bright.probs.size, dark.probs.size)
    pb = np.zeros(size)
    pd = np.zeros(size)
    pb[:bright.probs.size] = bright.probs
    pd[:dark.probs.size] = dark.probs
    nz = np.flatnonzero((pb > 0) | (pd > 0))
    top = int(nz[-1]) if nz.size else 0
    thresholds = np.arange(1, top + 2)
    below_bright = np.concatenate([[0.0], np.cumsum(pb)])  # P(N < k | bright)
    at_or_above_dark = np.concatenate([np.cumsum(pd[::-1])[::-1], [0.0]])  # P(N >= k | dark)
    idx = np.minimum(thresholds, size)
    return thresholds, at_or_above_dark[idx], np.minimum(below_bright[idx], 1.0)


def optimize_threshold(bright: CountHistogram, dark: CountHistogram) -> DiscriminationResult:
    """Threshold minimizing ``[P(N >= k | dark) + P(N < k | bright)] / 2``.

    Ties go to the smallest threshold.
    """
    ks, dark_err, bright_err = threshold_errors(bright, dark)
    eps = 0.5 * (dark_err + bright_err)
    i = int(np.flatnonzero(eps <= eps.min() + 1e-15)[0])
    return DiscriminationResult(
        threshold=int(ks[i]),
        infidelity=0.5 * (float(dark_err[i]) + float(bright_err[i])),
        dark_error=float(dark_err[i]),
        bright_error=float(bright_err[i]),
    )


def readout_histograms(config: ReadoutConfig, detector: DetectorModel, n_trials: int, seed,
                       workers: int = 1, n_max: int = N_MAX_DEFAULT):
    """Bright and dark histograms drawn from independent children of `seed`."""
    seed_bright, seed_dark = as_seed_sequence(seed).spawn(2)
    bright = simulate_counts(config, detector, "bright", n_trials, seed_bright, workers, n_max)
    dark = simulate_counts(config, detector, "dark", n_trials, seed_dark, workers, n_max)
    return bright, dark


def readout_fidelity(config: ReadoutConfig, detector: DetectorModel, n_trials: int, seed,
                     workers: int = 1, n_max: int = N_MAX_DEFAULT) -> DiscriminationResult:
    """Simulate both states and discriminate them at the optimal threshold."""
    res = optimize_threshold(*readout_histograms(config, detector, n_trials, seed, workers, n_max))
    if config.survival is not None:
        res = replace(res, survival=config.survival)
    return res
