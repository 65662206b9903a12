"""
Microring device calculator.

Pure functions tying the resonator parameters (Q factor, free spectral
range, field enhancement, thermal tuning coefficient) to the quantities
the pair-source simulator and the correlation analysis consume: photon
linewidth, coherence time, the DWDM channel grid, and relative pair-rate
scaling.

All frequency/wavelength conversions use the vacuum speed of light. The
channel grid is anchored in frequency (the telecom grid is defined in
frequency) and converted to wavelength only for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

C_VACUUM = 299792458.0  # speed of light [m/s]

# 100 GHz telecom grid, H-numbered channels: f(Hn) = 190.05 THz + n * 100 GHz.
# A 200 GHz comb occupies every second channel.
ITU_H_ANCHOR_HZ = 190.05e12
ITU_H_STEP_HZ = 100e9


def itu_channel_frequency(channel: int) -> float:
    """Center frequency [Hz] of H-band DWDM channel ``Hn``."""
    return ITU_H_ANCHOR_HZ + channel * ITU_H_STEP_HZ


def frequency_to_wavelength_nm(frequency_hz: float) -> float:
    """Vacuum wavelength [nm] for a frequency [Hz]."""
    if frequency_hz <= 0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    return C_VACUUM / frequency_hz * 1e9


def wavelength_nm_to_frequency(wavelength_nm: float) -> float:
    """Frequency [Hz] for a vacuum wavelength [nm]."""
    if wavelength_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return C_VACUUM / (wavelength_nm * 1e-9)


def linewidth_from_q(wavelength_nm: float, q_factor: float) -> float:
    """
    Resonance linewidth [Hz] from the loaded Q factor.

    Parameters
    ----------
    wavelength_nm : float
        Resonance wavelength [nm].
    q_factor : float
        Loaded quality factor (resonance frequency over linewidth).

    Returns
    -------
    float
        Full linewidth Delta-nu = (c / lambda) / Q [Hz].
    """
    if wavelength_nm <= 0 or q_factor <= 0:
        raise ValueError(
            f"wavelength and Q must be positive, got {wavelength_nm}, {q_factor}"
        )
    return wavelength_nm_to_frequency(wavelength_nm) / q_factor


def coherence_time(linewidth_hz: float) -> float:
    """
    Photon coherence time [s] for a Lorentzian line of full width
    ``linewidth_hz``: tau_coh = 1 / (pi * Delta-nu).
    """
    if linewidth_hz <= 0:
        raise ValueError(f"linewidth must be positive, got {linewidth_hz}")
    return 1.0 / (math.pi * linewidth_hz)


def thermal_shift(delta_t_c: float, coeff_hz_per_c: float) -> float:
    """Linear resonance shift [Hz] for a temperature change [degC]."""
    return coeff_hz_per_c * delta_t_c


def relative_pair_rate(enhancement: float) -> float:
    """
    Relative pair-generation rate for a triply resonant cavity,
    scaling as the sixth power of the field-enhancement factor.

    Dimensionless: used for what-if comparisons between devices, never
    to set absolute rates.
    """
    if enhancement <= 0:
        raise ValueError(f"enhancement must be positive, got {enhancement}")
    return enhancement**6


def fsr_from_geometry(radius_m: float, group_index: float) -> float:
    """
    Free spectral range [Hz] of a ring of radius ``radius_m`` [m] with
    the given group index: FSR = c / (2 pi R n_g).
    """
    if radius_m <= 0 or group_index <= 0:
        raise ValueError(
            f"radius and group index must be positive, got {radius_m}, {group_index}"
        )
    return C_VACUUM / (2.0 * math.pi * radius_m * group_index)


@dataclass(frozen=True)
class RingSpec:
    """
    Cavity and comb parameters of the four-port microring.

    Defaults describe the reference device: Q = 1.375e6 (17.9 field
    enhancement), 140 MHz device linewidth, 200 GHz FSR at 135 um radius,
    -2 GHz/degC thermal tuning, pumped at 1556.15 nm (channel H26).

    Cross-checks enforced on construction (1% tolerance):
      * linewidth   == (c / pump_wavelength) / q_factor
      * fsr         == c / (2 pi radius group_index)
    """

    pump_wavelength_nm: float = 1556.15
    q_factor: float = 1.375e6
    linewidth_hz: float = 140.1e6
    fsr_hz: float = 200e9
    radius_m: float = 135e-6
    group_index: float = 1.7672
    enhancement: float = 17.9
    thermal_coeff_hz_per_c: float = -2e9

    def __post_init__(self) -> None:
        for name in (
            "pump_wavelength_nm",
            "q_factor",
            "linewidth_hz",
            "fsr_hz",
            "radius_m",
            "group_index",
            "enhancement",
        ):
            value = getattr(self, name)
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        lw = linewidth_from_q(self.pump_wavelength_nm, self.q_factor)
        if abs(lw - self.linewidth_hz) > 0.01 * lw:
            raise ValueError(
                f"linewidth {self.linewidth_hz:.4g} Hz inconsistent with "
                f"(c/lambda)/Q = {lw:.4g} Hz (1% tolerance)"
            )
        fsr = fsr_from_geometry(self.radius_m, self.group_index)
        if abs(fsr - self.fsr_hz) > 0.01 * fsr:
            raise ValueError(
                f"fsr {self.fsr_hz:.4g} Hz inconsistent with geometry "
                f"value {fsr:.4g} Hz (1% tolerance)"
            )

    @property
    def pump_frequency_hz(self) -> float:
        return wavelength_nm_to_frequency(self.pump_wavelength_nm)

    @property
    def coherence_time_s(self) -> float:
        return coherence_time(self.linewidth_hz)


@dataclass(frozen=True)
class ChannelPair:
    """One signal/idler channel pair, symmetric about the pump."""

    index: int  # comb line offset m (signal at +m FSR, idler at -m)
    signal_channel: int  # ITU H-band label
    idler_channel: int
    signal_frequency_hz: float
    idler_frequency_hz: float

    @property
    def signal_wavelength_nm(self) -> float:
        return frequency_to_wavelength_nm(self.signal_frequency_hz)

    @property
    def idler_wavelength_nm(self) -> float:
        return frequency_to_wavelength_nm(self.idler_frequency_hz)


@dataclass(frozen=True)
class ChannelGrid:
    """
    Frequency comb channel assignment around the pump.

    Signal m sits ``m * spacing`` above the pump frequency, idler m the
    same amount below, so every pair satisfies f_s + f_i = 2 f_pump
    exactly (energy conservation on the grid).
    """

    pump_channel: int = 26
    spacing_hz: float = 200e9
    pairs: tuple[ChannelPair, ...] = field(default=())

    @property
    def pump_frequency_hz(self) -> float:
        return itu_channel_frequency(self.pump_channel)

    @property
    def pump_wavelength_nm(self) -> float:
        return frequency_to_wavelength_nm(self.pump_frequency_hz)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


def build_channel_grid(
    pump_channel: int = 26, spacing_hz: float = 200e9, n_pairs: int = 5
) -> ChannelGrid:
    """
    Build the symmetric signal/idler channel grid.

    Parameters
    ----------
    pump_channel : int
        ITU H-band label of the pump (H26 = 1556.15 nm).
    spacing_hz : float
        Comb spacing [Hz]; 200 GHz covers every second 100 GHz channel.
    n_pairs : int
        Number of signal/idler pairs; 0 gives a pump-only grid.

    Returns
    -------
    ChannelGrid
    """
    if n_pairs < 0:
        raise ValueError(f"n_pairs must be non-negative, got {n_pairs}")
    if spacing_hz <= 0:
        raise ValueError(f"spacing must be positive, got {spacing_hz}")
    f_pump = itu_channel_frequency(pump_channel)
    label_step = spacing_hz / ITU_H_STEP_HZ
    pairs = []
    for m in range(1, n_pairs + 1):
        pairs.append(
            ChannelPair(
                index=m,
                signal_channel=pump_channel + round(m * label_step),
                idler_channel=pump_channel - round(m * label_step),
                signal_frequency_hz=f_pump + m * spacing_hz,
                idler_frequency_hz=f_pump - m * spacing_hz,
            )
        )
    return ChannelGrid(pump_channel=pump_channel, spacing_hz=spacing_hz, pairs=tuple(pairs))
