"""
Stochastic photon-pair emission model.

Pairs are created per channel as a point process; each photon then
leaves the cavity after an independent exponential dwell time with rate
gamma = 2 pi Delta-nu. The signal-idler delay of one pair is therefore
Laplace distributed with decay gamma, which reproduces the measured
signal/idler cross-correlation of a cavity source in closed form:

    g2(tau) = 1 + (gamma / 2R) exp(-gamma |tau|)

Thermal (bunched) emission is generated as a cluster process: bursts of
geometrically distributed size, all pairs of a burst sharing one
creation instant. With burst rate R gamma / (gamma + R) and geometric
parameter R / (gamma + R), the exit streams of a single mode carry the
chaotic-light autocorrelation g2(tau) = 1 + exp(-gamma |tau|) exactly,
and a mixture of K modes with weights p_k gives g2(0) = 1 + sum p_k^2.
A burst size M means M pairs created together, i.e. multi-pair emission
within one coherence cell, so heralded statistics come out right too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .rng import substream

DROP = 0
THROUGH = 1

# calibration: 3.0e5 pairs/s per channel at 30 mW pump (quadratic law)
RATE_COEFF_DEFAULT = 3.0e5 / 0.030**2


def rate_from_power(coefficient_hz_per_w2: float, power_w: float) -> float:
    """Per-channel pair rate [Hz] = coefficient * power^2 (two pump photons per pair)."""
    if coefficient_hz_per_w2 < 0 or power_w < 0:
        raise ValueError("coefficient and power must be non-negative")
    return coefficient_hz_per_w2 * power_w**2


def total_comb_rate(pair_rate_hz: float, n_channels: int) -> float:
    """Multiplexed pair rate over ``n_channels`` at a nearly constant per-channel rate."""
    if n_channels < 1:
        raise ValueError(f"need at least one channel, got {n_channels}")
    return pair_rate_hz * n_channels


@dataclass(frozen=True)
class SourceSpec:
    """
    Generative parameters of the pair source.

    ``linewidth_hz`` is the biphoton linewidth driving the correlation
    decay (the measured 110 MHz value by default, distinct from the
    140 MHz device linewidth). The per-channel pair rate refers to the
    fiber-coupled collection plane and is derived from the pump power
    unless set explicitly. ``mode_weights`` are the relative weights of
    the independent thermal modes per channel; (0.637, 0.363) reproduces
    the measured 1.86 effective modes via sum(p^2) = 1/N.
    """

    rng_seed: int
    linewidth_hz: float = 110e6
    pump_power_w: float = 0.030
    rate_coefficient_hz_per_w2: float = RATE_COEFF_DEFAULT
    pair_rate_hz: float | None = None
    mode_weights: tuple[float, ...] = (0.637, 0.363)
    duration_s: float = 60.0
    port_split: float = 0.5

    def __post_init__(self) -> None:
        if self.linewidth_hz <= 0:
            raise ValueError(f"linewidth must be positive, got {self.linewidth_hz}")
        if self.pump_power_w < 0 or self.rate_coefficient_hz_per_w2 < 0:
            raise ValueError("pump power and rate coefficient must be non-negative")
        if not 0.0 <= self.port_split <= 1.0:
            raise ValueError(f"port split outside [0, 1]: {self.port_split}")
        if not self.mode_weights:
            raise ValueError("mode_weights must not be empty")
        weights = np.asarray(self.mode_weights, dtype=np.float64)
        if np.any(weights < 0):
            raise ValueError(f"mode weights must be non-negative: {self.mode_weights}")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError(f"mode weights must sum to 1, got {weights.sum()!r}")
        if self.pair_rate_hz is not None:
            if self.pair_rate_hz < 0:
                raise ValueError(f"pair rate must be non-negative, got {self.pair_rate_hz}")
            derived = rate_from_power(self.rate_coefficient_hz_per_w2, self.pump_power_w)
            if derived > 0 and abs(self.pair_rate_hz - derived) > 1e-6 * derived:
                raise ValueError(
                    f"pair_rate_hz {self.pair_rate_hz:.6g} contradicts "
                    f"coefficient * power^2 = {derived:.6g}"
                )

    @property
    def resolved_pair_rate_hz(self) -> float:
        if self.pair_rate_hz is not None:
            return self.pair_rate_hz
        return rate_from_power(self.rate_coefficient_hz_per_w2, self.pump_power_w)

    @property
    def gamma(self) -> float:
        """Exit-delay rate 2 pi Delta-nu [1/s]."""
        return 2.0 * math.pi * self.linewidth_hz

    def with_power(self, power_w: float) -> "SourceSpec":
        return replace(self, pump_power_w=power_w, pair_rate_hz=None)


@dataclass(frozen=True)
class PairEvents:
    """
    A block of generated pair events as parallel arrays, sorted by
    creation time. Ports default to the drop port until assigned.
    """

    channel: np.ndarray  # int16 channel-pair index
    t_create: np.ndarray  # float64 [s]
    t_signal: np.ndarray  # float64 exit time [s]
    t_idler: np.ndarray
    signal_port: np.ndarray  # uint8, DROP or THROUGH
    idler_port: np.ndarray
    mode_index: np.ndarray  # int16 thermal mode of origin

    def __post_init__(self) -> None:
        n = self.t_create.size
        for name in ("channel", "t_signal", "t_idler", "signal_port", "idler_port", "mode_index"):
            if getattr(self, name).size != n:
                raise ValueError(f"field {name} has size {getattr(self, name).size}, expected {n}")

    @property
    def n(self) -> int:
        return int(self.t_create.size)

    @classmethod
    def empty(cls) -> "PairEvents":
        return cls(
            channel=np.empty(0, np.int16),
            t_create=np.empty(0, np.float64),
            t_signal=np.empty(0, np.float64),
            t_idler=np.empty(0, np.float64),
            signal_port=np.empty(0, np.uint8),
            idler_port=np.empty(0, np.uint8),
            mode_index=np.empty(0, np.int16),
        )

    @classmethod
    def concat(cls, blocks: list["PairEvents"]) -> "PairEvents":
        if not blocks:
            return cls.empty()
        return cls(
            channel=np.concatenate([b.channel for b in blocks]),
            t_create=np.concatenate([b.t_create for b in blocks]),
            t_signal=np.concatenate([b.t_signal for b in blocks]),
            t_idler=np.concatenate([b.t_idler for b in blocks]),
            signal_port=np.concatenate([b.signal_port for b in blocks]),
            idler_port=np.concatenate([b.idler_port for b in blocks]),
            mode_index=np.concatenate([b.mode_index for b in blocks]),
        )

    def take(self, index: np.ndarray) -> "PairEvents":
        return PairEvents(
            channel=self.channel[index],
            t_create=self.t_create[index],
            t_signal=self.t_signal[index],
            t_idler=self.t_idler[index],
            signal_port=self.signal_port[index],
            idler_port=self.idler_port[index],
            mode_index=self.mode_index[index],
        )

    def sorted_by_create(self) -> "PairEvents":
        return self.take(np.argsort(self.t_create, kind="stable"))


def _assemble(
    t_create: np.ndarray,
    mode_index: np.ndarray,
    channel: int,
    gamma: float,
    rng: np.random.Generator,
) -> PairEvents:
    """Attach exit times and default ports to creation events, sorted."""
    order = np.argsort(t_create, kind="stable")
    t_create = t_create[order]
    mode_index = mode_index[order]
    n = t_create.size
    scale = 1.0 / gamma
    t_signal = t_create + rng.exponential(scale, n)
    t_idler = t_create + rng.exponential(scale, n)
    return PairEvents(
        channel=np.full(n, channel, np.int16),
        t_create=t_create,
        t_signal=t_signal,
        t_idler=t_idler,
        signal_port=np.zeros(n, np.uint8),
        idler_port=np.zeros(n, np.uint8),
        mode_index=mode_index,
    )


def generate_pairs(
    spec: SourceSpec,
    channel: int = 0,
    t_start: float = 0.0,
    duration_s: float | None = None,
    chunk: int = 0,
) -> PairEvents:
    """
    Poissonian pair creation (no thermal bunching) on one channel.

    The stream is a deterministic function of (spec.rng_seed, channel,
    chunk); distinct channels and chunks use independent substreams.
    A non-positive duration yields an empty stream.
    """
    duration = spec.duration_s if duration_s is None else duration_s
    if duration <= 0:
        return PairEvents.empty()
    rate = spec.resolved_pair_rate_hz
    if rate < 0:
        raise ValueError(f"negative pair rate: {rate}")
    rng = substream(spec.rng_seed, rngmod.PAIRS, channel, chunk)
    n = rng.poisson(rate * duration)
    t_create = t_start + rng.uniform(0.0, duration, n)
    return _assemble(t_create, np.zeros(n, np.int16), channel, spec.gamma, rng)


def _thermal_burst_params(rate: float, gamma: float) -> tuple[float, float]:
    """Burst rate nu and geometric parameter theta for one thermal mode."""
    theta = rate / (gamma + rate)
    nu = rate * gamma / (gamma + rate)
    return nu, theta


def generate_multimode(
    spec: SourceSpec,
    channel: int = 0,
    t_start: float = 0.0,
    duration_s: float | None = None,
    chunk: int = 0,
) -> PairEvents:
    """
    Thermal multimode pair creation on one channel.

    Each mode k emits bursts at rate R_k gamma / (gamma + R_k) with
    geometric sizes (parameter R_k / (gamma + R_k)); all pairs of a
    burst share the creation instant. After the exponential exit
    delays, each mode's arm stream carries the single-mode chaotic
    autocorrelation 1 + exp(-gamma |tau|) and the superposition gives
    the measured bunching 1 + sum(p_k^2).
    """
    duration = spec.duration_s if duration_s is None else duration_s
    if duration <= 0:
        return PairEvents.empty()
    rate = spec.resolved_pair_rate_hz
    gamma = spec.gamma
    rng = substream(spec.rng_seed, rngmod.PAIRS, channel, chunk)
    creates = []
    modes = []
    for k, weight in enumerate(spec.mode_weights):
        mode_rate = weight * rate
        if mode_rate <= 0:
            continue
        nu, theta = _thermal_burst_params(mode_rate, gamma)
        n_bursts = rng.poisson(nu * duration)
        t_bursts = t_start + rng.uniform(0.0, duration, n_bursts)
        sizes = rng.geometric(1.0 - theta, n_bursts)
        creates.append(np.repeat(t_bursts, sizes))
        modes.append(np.full(int(sizes.sum()), k, np.int16))
    if not creates:
        return PairEvents.empty()
    t_create = np.concatenate(creates)
    mode_index = np.concatenate(modes)
    return _assemble(t_create, mode_index, channel, gamma, rng)


def generate_surviving_multimode(
    spec: SourceSpec,
    p_signal: float,
    p_idler: float,
    channel: int = 0,
    t_start: float = 0.0,
    duration_s: float | None = None,
    chunk: int = 0,
) -> tuple[PairEvents, np.ndarray, np.ndarray]:
    """
    Thermal generation fused with per-photon survival thinning.

    Statistically equivalent to ``generate_multimode`` followed by
    independent Bernoulli survival of each photon (probability
    ``p_signal`` for signal photons, ``p_idler`` for idlers), but only
    pairs with at least one surviving photon are materialized. Long
    lossy runs then cost O(detected) instead of O(generated).

    Returns (events, signal_survived, idler_survived). Uses its own
    substream, so results differ stream-wise from generate_multimode;
    equivalence is distributional.
    """
    duration = spec.duration_s if duration_s is None else duration_s
    if duration <= 0:
        empty = PairEvents.empty()
        return empty, np.empty(0, np.bool_), np.empty(0, np.bool_)
    if not (0.0 <= p_signal <= 1.0 and 0.0 <= p_idler <= 1.0):
        raise ValueError("survival probabilities must be in [0, 1]")
    rate = spec.resolved_pair_rate_hz
    gamma = spec.gamma
    rng = substream(spec.rng_seed, rngmod.THINNING, channel, chunk)
    p_keep = 1.0 - (1.0 - p_signal) * (1.0 - p_idler)
    creates = []
    modes = []
    sig_flags = []
    idl_flags = []
    # conditional survival-pattern probabilities given >= 1 survivor
    p_both = p_signal * p_idler / p_keep if p_keep > 0 else 0.0
    p_sig_only = p_signal * (1.0 - p_idler) / p_keep if p_keep > 0 else 0.0
    for k, weight in enumerate(spec.mode_weights):
        mode_rate = weight * rate
        if mode_rate <= 0 or p_keep <= 0:
            continue
        nu, theta = _thermal_burst_params(mode_rate, gamma)
        # singleton bursts: Poisson, thinned analytically
        n_single = rng.poisson(nu * (1.0 - theta) * p_keep * duration)
        t_single = t_start + rng.uniform(0.0, duration, n_single)
        u = rng.random(n_single)
        s_single = u < p_both + p_sig_only
        i_single = (u < p_both) | (u >= p_both + p_sig_only)
        # multi-pair bursts (rare): expand fully, then thin per photon
        n_multi = rng.poisson(nu * theta * duration)
        t_multi = t_start + rng.uniform(0.0, duration, n_multi)
        sizes = 1 + rng.geometric(1.0 - theta, n_multi)  # size given >= 2
        t_pairs = np.repeat(t_multi, sizes)
        s_multi = rng.random(t_pairs.size) < p_signal
        i_multi = rng.random(t_pairs.size) < p_idler
        kept = s_multi | i_multi
        creates.append(np.concatenate([t_single, t_pairs[kept]]))
        sig_flags.append(np.concatenate([s_single, s_multi[kept]]))
        idl_flags.append(np.concatenate([i_single, i_multi[kept]]))
        modes.append(np.full(creates[-1].size, k, np.int16))
    if not creates:
        empty = PairEvents.empty()
        return empty, np.empty(0, np.bool_), np.empty(0, np.bool_)
    t_create = np.concatenate(creates)
    order = np.argsort(t_create, kind="stable")
    events = _assemble(
        t_create, np.concatenate(modes), channel, gamma, rng
    )
    # _assemble sorted identically (stable argsort of the same keys)
    sig = np.concatenate(sig_flags)[order]
    idl = np.concatenate(idl_flags)[order]
    return events, sig, idl


def assign_ports(events: PairEvents, port_split: float, rng: np.random.Generator) -> PairEvents:
    """
    Draw the exit port of every photon independently: drop with
    probability ``port_split``, through otherwise. Pair-level outcomes
    {different ports, both drop, both through} then occur with
    frequencies {2q(1-q), q^2, (1-q)^2}.
    """
    if not 0.0 <= port_split <= 1.0:
        raise ValueError(f"port split outside [0, 1]: {port_split}")
    n = events.n
    signal_port = np.where(rng.random(n) < port_split, DROP, THROUGH).astype(np.uint8)
    idler_port = np.where(rng.random(n) < port_split, DROP, THROUGH).astype(np.uint8)
    return PairEvents(
        channel=events.channel,
        t_create=events.t_create,
        t_signal=events.t_signal,
        t_idler=events.t_idler,
        signal_port=signal_port,
        idler_port=idler_port,
        mode_index=events.mode_index,
    )
