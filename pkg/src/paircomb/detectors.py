"""
Detection chain: optical loss ledgers, single-photon detector model and
time-tag streams.

``detect`` turns ideal photon arrival times into realistic detector
output: quantum-efficiency thinning, dark counts, Gaussian timing
jitter, a non-paralyzable dead time and time-to-digital quantization.
The output is a :class:`TimeTagStream` of strictly increasing integer
timestamps, the common currency of the analysis layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

FREE_RUNNING = "free_running"
GATED = "gated"


@dataclass(frozen=True)
class OpticalPath:
    """
    Itemized dB loss ledger of one collection arm.

    The total transmission is 10^(-total_dB/10); each arrival survives
    independently with that probability.
    """

    ledger: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        for label, loss_db in self.ledger:
            if loss_db < 0:
                raise ValueError(f"negative loss entry {label!r}: {loss_db} dB")

    @property
    def total_db(self) -> float:
        return float(sum(loss for _, loss in self.ledger))

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.total_db / 10.0)


def reference_signal_arm() -> OpticalPath:
    """Full itemized signal-arm ledger of the reference setup (10.9 dB)."""
    return OpticalPath(
        ledger=(
            ("single_port_collection", 6.0),
            ("facet_coupling", 1.5),
            ("dwdm_pump_reflect", 0.4),
            ("notch_filter", 2.0),
            ("channel_filter", 1.0),
        )
    )


def reference_idler_arm() -> OpticalPath:
    """Full itemized idler-arm ledger (10.5 dB; quoted arm total 10.4 dB)."""
    return OpticalPath(
        ledger=(
            ("single_port_collection", 6.0),
            ("facet_coupling", 1.5),
            ("dwdm_pump_reflect", 0.4),
            ("notch_filter", 2.0),
            ("channel_filter", 0.6),
        )
    )


def detection_signal_path() -> OpticalPath:
    """
    Detection-system part of the signal arm (3.4 dB): everything after
    the fiber-coupled drop port, excluding port collection and facet
    coupling. This is the reference plane at which the per-channel pair
    rate is quoted.
    """
    return OpticalPath(
        ledger=(
            ("dwdm_pump_reflect", 0.4),
            ("notch_filter", 2.0),
            ("channel_filter", 1.0),
        )
    )


def detection_idler_path() -> OpticalPath:
    """Detection-system part of the idler arm (3.0 dB)."""
    return OpticalPath(
        ledger=(
            ("dwdm_pump_reflect", 0.4),
            ("notch_filter", 2.0),
            ("channel_filter", 0.6),
        )
    )


@dataclass(frozen=True)
class DetectorSpec:
    """
    Single-photon detector and TDC settings.

    Defaults are the free-running InGaAs settings used throughout:
    5% quantum efficiency, 25 us dead time (suppresses afterpulsing,
    which is therefore not modeled), 81 ps TDC bins. The per-detector
    jitter default of 243.9 ps Gaussian sigma corresponds to an 810 ps
    FWHM of the two-detector coincidence response (810 / (2.355 sqrt 2)).
    """

    quantum_efficiency: float = 0.05
    dead_time_s: float = 25e-6
    dark_rate_hz: float = 1300.0
    jitter_sigma_s: float = 243.9e-12
    mode: str = FREE_RUNNING
    gate_length_s: float = 100e-9
    tick_s: float = 81e-12

    def __post_init__(self) -> None:
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError(f"quantum efficiency outside [0, 1]: {self.quantum_efficiency}")
        if self.dead_time_s < 0 or self.dark_rate_hz < 0 or self.jitter_sigma_s < 0:
            raise ValueError("dead time, dark rate and jitter must be non-negative")
        if self.tick_s <= 0:
            raise ValueError(f"tick must be positive, got {self.tick_s}")
        if self.mode not in (FREE_RUNNING, GATED):
            raise ValueError(f"unknown detector mode {self.mode!r}")


@dataclass(frozen=True)
class TimeTagStream:
    """
    Ordered detector clicks of one channel: integer timestamps in TDC
    ticks, strictly increasing.
    """

    channel_id: int
    ticks: np.ndarray  # int64, sorted strictly increasing
    tick_s: float
    duration_s: float

    def __post_init__(self) -> None:
        ticks = np.asarray(self.ticks, dtype=np.int64)
        object.__setattr__(self, "ticks", ticks)
        if self.tick_s <= 0:
            raise ValueError(f"tick must be positive, got {self.tick_s}")
        if ticks.size and np.any(np.diff(ticks) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if ticks.size and ticks[0] < 0:
            raise ValueError("timestamps must be non-negative")

    @property
    def n(self) -> int:
        return int(self.ticks.size)

    @property
    def times_s(self) -> np.ndarray:
        return self.ticks * self.tick_s

    @property
    def rate_hz(self) -> float:
        return self.n / self.duration_s if self.duration_s > 0 else math.nan


def apply_loss(arrivals: np.ndarray, path: OpticalPath, rng: np.random.Generator) -> np.ndarray:
    """Thin arrival times through a loss ledger (independent survival)."""
    arrivals = np.asarray(arrivals, dtype=np.float64)
    p = path.transmission
    if p >= 1.0:
        return arrivals.copy()
    return arrivals[rng.random(arrivals.size) < p]


def beam_splitter(
    arrivals: np.ndarray, ratio: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """
    Route each arrival to output A with probability ``ratio``, else B.
    The outputs are disjoint and partition the input.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"splitting ratio outside [0, 1]: {ratio}")
    arrivals = np.asarray(arrivals, dtype=np.float64)
    to_a = rng.random(arrivals.size) < ratio
    return arrivals[to_a], arrivals[~to_a]


@njit(cache=True)
def _dead_time_scan(times: np.ndarray, dead: float, t_last: float) -> tuple[np.ndarray, float]:
    """Non-paralyzable dead time: a kept click at t blocks (t, t + dead)."""
    keep = np.empty(times.size, dtype=np.bool_)
    for i in range(times.size):
        if times[i] - t_last >= dead:
            keep[i] = True
            t_last = times[i]
        else:
            keep[i] = False
    return keep, t_last


def dead_time_filter(times: np.ndarray, dead_time_s: float, t_last: float = -np.inf) -> np.ndarray:
    """Apply a non-paralyzable dead time to sorted click times [s]."""
    times = np.ascontiguousarray(times, dtype=np.float64)
    if dead_time_s <= 0 or times.size == 0:
        return times
    keep, _ = _dead_time_scan(times, dead_time_s, t_last)
    return times[keep]


def quantize(times_s: np.ndarray, tick_s: float) -> np.ndarray:
    """
    Quantize times [s] to integer TDC ticks, floor semantics.

    Monotone and idempotent at tick resolution; negative times are a
    domain error (the TDC clock starts at zero).
    """
    if tick_s <= 0:
        raise ValueError(f"tick must be positive, got {tick_s}")
    times_s = np.asarray(times_s, dtype=np.float64)
    if times_s.size and float(times_s.min()) < 0:
        raise ValueError("cannot quantize negative times")
    return np.floor(times_s / tick_s).astype(np.int64)


def _detect_times(
    arrivals: np.ndarray,
    spec: DetectorSpec,
    duration_s: float,
    rng: np.random.Generator,
    t_last: float,
) -> tuple[np.ndarray, float]:
    """Detection pipeline up to (and including) the dead-time filter."""
    arrivals = np.asarray(arrivals, dtype=np.float64)
    if spec.quantum_efficiency < 1.0:
        arrivals = arrivals[rng.random(arrivals.size) < spec.quantum_efficiency]
    n_dark = rng.poisson(spec.dark_rate_hz * duration_s)
    if n_dark:
        darks = rng.uniform(0.0, duration_s, n_dark)
        arrivals = np.concatenate([arrivals, darks])
    if spec.jitter_sigma_s > 0 and arrivals.size:
        arrivals = arrivals + rng.normal(0.0, spec.jitter_sigma_s, arrivals.size)
    arrivals = arrivals[(arrivals >= 0.0) & (arrivals < duration_s)]
    arrivals.sort(kind="stable")
    if spec.dead_time_s > 0 and arrivals.size:
        keep, t_last = _dead_time_scan(np.ascontiguousarray(arrivals), spec.dead_time_s, t_last)
        arrivals = arrivals[keep]
    elif arrivals.size:
        t_last = float(arrivals[-1])
    return arrivals, t_last


def detect(
    arrivals: np.ndarray,
    spec: DetectorSpec,
    duration_s: float,
    rng: np.random.Generator,
    channel_id: int = 0,
) -> TimeTagStream:
    """
    Detect photon arrivals [s] and return the TDC tag stream.

    Pipeline order: QE thinning, dark-count merge, per-click Gaussian
    jitter, re-sort, non-paralyzable dead time, quantization to ticks.
    Dark counts are merged before the dead-time filter so they block the
    detector like real clicks do. Clicks landing in the same TDC bin
    collapse to one tag (timestamps are strictly increasing).
    """
    if duration_s <= 0:
        return TimeTagStream(channel_id, np.empty(0, dtype=np.int64), spec.tick_s, max(duration_s, 0.0))
    arrivals = np.asarray(arrivals, dtype=np.float64)
    if arrivals.size and np.any(np.diff(arrivals) < 0):
        raise ValueError("arrival times must be sorted")
    times, _ = _detect_times(arrivals, spec, duration_s, rng, -np.inf)
    ticks = quantize(times, spec.tick_s)
    if ticks.size:
        ticks = np.unique(ticks)
    return TimeTagStream(channel_id, ticks, spec.tick_s, duration_s)


def gate(tags: TimeTagStream, triggers: TimeTagStream, window_s: float) -> TimeTagStream:
    """
    Keep only tags falling in [t_trig, t_trig + window) for some trigger
    (closed-open interval; a zero window keeps nothing).
    """
    if tags.tick_s != triggers.tick_s:
        raise ValueError("tag and trigger streams must share one tick")
    window_ticks = int(math.floor(window_s / tags.tick_s))
    if window_ticks <= 0 or tags.n == 0 or triggers.n == 0:
        return TimeTagStream(tags.channel_id, np.empty(0, dtype=np.int64), tags.tick_s, tags.duration_s)
    # index of the latest trigger at or before each tag
    idx = np.searchsorted(triggers.ticks, tags.ticks, side="right") - 1
    valid = idx >= 0
    offsets = np.full(tags.n, np.iinfo(np.int64).max, dtype=np.int64)
    offsets[valid] = tags.ticks[valid] - triggers.ticks[idx[valid]]
    keep = offsets < window_ticks
    return TimeTagStream(tags.channel_id, tags.ticks[keep], tags.tick_s, tags.duration_s)
