"""
Time-tag correlation analysis.

Everything here is a pure function of immutable tag streams: coincidence
histograms, fits of the cavity cross-correlation (a two-sided
exponential, optionally convolved with the Gaussian detector response),
coincidence-to-accidental ratios, heralded efficiency, single-arm
bunching and effective mode number, heralded autocorrelation, the
channel multiplexing matrix, and the loss-corrected pair-rate back-out.

Delays follow the start/stop convention tau = t_stop - t_start, counted
multi-stop (every stop within the window pairs with every start).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, least_squares
from scipy.special import erfcx

from .detectors import OpticalPath, TimeTagStream

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class CoincidenceHistogram:
    """
    Start-stop delay histogram on a symmetric bin axis centered on
    tau = 0. ``bin_ticks`` must be odd so that mirrored delays fall in
    mirrored bins exactly.
    """

    bin_ticks: int
    range_ticks: int
    counts: np.ndarray  # int64, length 2 * (range_ticks // bin_ticks) + 1
    tick_s: float
    n_start: int
    n_stop: int
    duration_s: float

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def half_bins(self) -> int:
        return self.range_ticks // self.bin_ticks

    @property
    def bin_width_s(self) -> float:
        return self.bin_ticks * self.tick_s

    @property
    def tau_s(self) -> np.ndarray:
        """Bin centers [s]."""
        k = np.arange(-self.half_bins, self.half_bins + 1)
        return k * self.bin_width_s

    def mirrored(self) -> "CoincidenceHistogram":
        """The histogram with the delay axis reversed (start/stop swap)."""
        return CoincidenceHistogram(
            bin_ticks=self.bin_ticks,
            range_ticks=self.range_ticks,
            counts=self.counts[::-1].copy(),
            tick_s=self.tick_s,
            n_start=self.n_stop,
            n_stop=self.n_start,
            duration_s=self.duration_s,
        )


def cross_histogram(
    start: TimeTagStream,
    stop: TimeTagStream,
    bin_ticks: int = 1,
    range_ticks: int = 1235,
    exclude_zero_lag: bool = False,
) -> CoincidenceHistogram:
    """
    Multi-stop coincidence histogram of tau = t_stop - t_start.

    Every stop tag within ``range_ticks`` of a start tag contributes;
    there is no pairing exclusivity. ``exclude_zero_lag`` drops
    exact-zero delays, for autocorrelating a stream against itself
    (self-pairing); it is implied when both arguments are the same
    object.

    Parameters
    ----------
    bin_ticks : int
        Bin width in TDC ticks, odd (keeps the axis mirror-symmetric).
    range_ticks : int
        Histogram half-range in ticks.
    """
    if start.tick_s != stop.tick_s:
        raise ValueError("start and stop streams must share one tick")
    if bin_ticks < 1 or bin_ticks % 2 == 0:
        raise ValueError(f"bin_ticks must be odd and positive, got {bin_ticks}")
    if range_ticks < bin_ticks:
        raise ValueError("range_ticks must be at least one bin")
    if start is stop:
        exclude_zero_lag = True
    half_bins = range_ticks // bin_ticks
    n_bins = 2 * half_bins + 1
    counts = np.zeros(n_bins, dtype=np.int64)
    s = start.ticks
    t = stop.ticks
    reach = half_bins * bin_ticks + bin_ticks // 2  # covers every bin fully
    chunk = 1_000_000
    for i0 in range(0, s.size, chunk):
        block = s[i0 : i0 + chunk]
        lo = np.searchsorted(t, block - reach, side="left")
        hi = np.searchsorted(t, block + reach, side="right")
        m = hi - lo
        total = int(m.sum())
        if total == 0:
            continue
        # expand [lo_i, hi_i) index ranges into one flat index array
        starts_rep = np.repeat(block, m)
        first = np.repeat(lo, m)
        offsets = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
        deltas = t[first + offsets] - starts_rep
        if exclude_zero_lag:
            deltas = deltas[deltas != 0]
        k = np.floor_divide(deltas + bin_ticks // 2, bin_ticks)
        k = k[(k >= -half_bins) & (k <= half_bins)]
        counts += np.bincount((k + half_bins).astype(np.int64), minlength=n_bins)
    return CoincidenceHistogram(
        bin_ticks=bin_ticks,
        range_ticks=range_ticks,
        counts=counts,
        tick_s=start.tick_s,
        n_start=start.n,
        n_stop=stop.n,
        duration_s=start.duration_s,
    )


# ---------------------------------------------------------------------------
# peak model: two-sided exponential, optionally convolved with a Gaussian


def laplace_gauss_pdf(tau, gamma: float, sigma: float):
    """
    Density of L + G where L is Laplace with decay ``gamma`` (the
    signal-idler delay of one pair) and G is a centered Gaussian of
    standard deviation ``sigma`` (combined two-detector jitter).

    Evaluated in closed form with scaled complementary error functions;
    stable over the full tail range.
    """
    if gamma <= 0 or sigma < 0:
        raise ValueError("gamma must be positive and sigma non-negative")
    tau = np.asarray(tau, dtype=np.float64)
    if sigma == 0.0:
        return 0.5 * gamma * np.exp(-gamma * np.abs(tau))
    a = np.abs(tau) / sigma
    u = gamma * sigma
    x_minus = (u - a) / _SQRT2
    x_plus = (u + a) / _SQRT2
    out = np.empty_like(a)
    safe = x_minus > -25.0  # erfcx(-x) ~ 2 exp(x^2) overflows past ~27
    if np.any(safe):
        a_s = a[safe]
        out[safe] = 0.25 * gamma * np.exp(-0.5 * a_s * a_s) * (
            erfcx(x_minus[safe]) + erfcx(x_plus[safe])
        )
    if np.any(~safe):
        # far tail: dominant Laplace term plus a vanishing correction
        a_f = a[~safe]
        tail = 2.0 * np.exp(0.5 * u * u - u * a_f)
        residual = np.exp(-0.5 * a_f * a_f) * (erfcx((a_f - u) / _SQRT2) - erfcx(x_plus[~safe]))
        out[~safe] = 0.25 * gamma * (tail - residual)
    return out if out.shape else float(out)


def laplace_gauss_mass(half_width_s: float, gamma: float, sigma: float) -> float:
    """Probability mass of the peak kernel inside |tau| <= half_width."""
    if half_width_s <= 0:
        return 0.0
    if sigma == 0.0:
        return 1.0 - math.exp(-gamma * half_width_s)
    val, _ = quad(
        lambda x: laplace_gauss_pdf(x, gamma, sigma),
        -half_width_s,
        half_width_s,
        points=[0.0],
        limit=200,
    )
    return float(val)


@dataclass(frozen=True)
class G2FitResult:
    """
    Least-squares fit of a coincidence peak on a flat accidental floor.

    ``delta_nu_fit`` comes from the bare two-sided exponential kernel;
    ``delta_nu_corr`` from the jitter-convolved kernel and recovers the
    underlying linewidth when the peak is broadened (so it is never
    below ``delta_nu_fit`` for positive jitter). ``gamma`` is
    2 pi delta_nu_fit. ``amplitude`` is the fitted peak height above
    the floor [counts/bin] of the jitter-corrected curve; ``fwhm_s``
    its full width at half maximum.
    """

    floor: float
    amplitude: float
    gamma: float
    delta_nu_fit: float
    delta_nu_corr: float
    fwhm_s: float
    residual_norm: float
    mass: float  # fitted true-coincidence counts under the peak
    jitter_sigma_s: float
    success: bool
    message: str = ""

    @property
    def coherence_time_s(self) -> float:
        return 1.0 / (math.pi * self.delta_nu_fit)


def _fit_peak(tau, counts, sigma, x0, bounds):
    bin_width = tau[1] - tau[0]
    positive = counts > 0
    y_log_y = np.zeros_like(counts)
    y_log_y[positive] = counts[positive] * np.log(counts[positive])

    def residual(params):
        floor, mass, gamma = params
        model = floor + mass * laplace_gauss_pdf(tau, gamma, sigma) * bin_width
        model = np.maximum(model, 1e-12)
        # signed Poisson deviance residuals: sum of squares is the deviance,
        # so the minimum is the Poisson maximum likelihood
        dev = 2.0 * (model - counts + y_log_y - counts * np.log(model))
        return np.sign(counts - model) * np.sqrt(np.maximum(dev, 0.0))

    return least_squares(residual, x0=x0, bounds=bounds, method="trf", x_scale=list(x0))


def fit_g2(hist: CoincidenceHistogram, jitter_sigma_s: float = 0.0) -> G2FitResult:
    """
    Fit ``floor + mass * K(tau)`` to a coincidence histogram, where K is
    the exponential peak kernel convolved with a Gaussian of width
    ``jitter_sigma_s`` (the combined jitter of both detectors; 0 for an
    ideal chain).

    Two fits run: the bare kernel gives ``delta_nu_fit`` (what a
    jitter-blind analysis reports), the convolved kernel gives the
    corrected ``delta_nu_corr``. Returns a failure result with
    diagnostics when no significant peak is present.
    """
    tau = hist.tau_s
    counts = hist.counts.astype(np.float64)
    bw = hist.bin_width_s
    far = np.abs(tau) > 0.8 * tau[-1]
    floor0 = float(np.median(counts[far])) if far.any() else float(np.median(counts))
    amp0 = float(counts.max()) - floor0
    if amp0 <= 5.0 * math.sqrt(max(floor0, 1.0)):
        return G2FitResult(
            floor=floor0,
            amplitude=math.nan,
            gamma=math.nan,
            delta_nu_fit=math.nan,
            delta_nu_corr=math.nan,
            fwhm_s=math.nan,
            residual_norm=math.nan,
            mass=math.nan,
            jitter_sigma_s=jitter_sigma_s,
            success=False,
            message=f"no significant peak: amplitude {amp0:.3g} over floor {floor0:.3g}",
        )
    above = counts > floor0 + 0.5 * amp0
    width0 = max(float(above.sum()) * bw, bw)
    gamma0 = 2.0 * math.log(2.0) / width0
    mass0 = max(float((counts - floor0).sum()), amp0)
    x0 = (max(floor0, 1e-12), mass0, gamma0)
    bounds = ([0.0, 0.0, gamma0 / 100.0], [np.inf, np.inf, gamma0 * 100.0])

    raw = _fit_peak(tau, counts, 0.0, x0, bounds)
    floor_r, mass_r, gamma_raw = raw.x
    if jitter_sigma_s > 0.0:
        corr = _fit_peak(tau, counts, jitter_sigma_s, (floor_r, mass_r, gamma_raw), bounds)
        floor_c, mass_c, gamma_corr = corr.x
        res = corr
    else:
        floor_c, mass_c, gamma_corr = floor_r, mass_r, gamma_raw
        res = raw

    amplitude = mass_c * float(laplace_gauss_pdf(0.0, gamma_corr, jitter_sigma_s)) * bw
    peak0 = float(laplace_gauss_pdf(0.0, gamma_corr, jitter_sigma_s))
    half = brentq(
        lambda x: float(laplace_gauss_pdf(x, gamma_corr, jitter_sigma_s)) - 0.5 * peak0,
        0.0,
        100.0 / gamma_corr,
    )
    residual_norm = float(np.sqrt(np.mean(res.fun**2)) / max(amplitude, 1e-30))
    return G2FitResult(
        floor=float(floor_c),
        amplitude=float(amplitude),
        gamma=float(gamma_raw),
        delta_nu_fit=float(gamma_raw / (2.0 * math.pi)),
        delta_nu_corr=float(gamma_corr / (2.0 * math.pi)),
        fwhm_s=float(2.0 * half),
        residual_norm=residual_norm,
        mass=float(mass_c),
        jitter_sigma_s=float(jitter_sigma_s),
        success=True,
    )


def rate_from_g2_peak(fit: G2FitResult) -> float:
    """
    Pair rate implied by the peak-to-floor excess on a lossless chain,
    where g2(0) - 1 = gamma / (2 R): R = gamma * floor / (2 amplitude).
    """
    if not fit.success:
        raise ValueError("cannot extract a rate from a failed fit")
    gamma_corr = 2.0 * math.pi * fit.delta_nu_corr
    peak_excess = fit.amplitude / fit.floor
    return gamma_corr / (2.0 * peak_excess)


# ---------------------------------------------------------------------------
# coincidence-to-accidental ratio


@dataclass(frozen=True)
class CarReport:
    """
    Coincidence-to-accidental ratio following the window procedure:
    CC sums the histogram inside the FWHM of the fitted peak, AC is the
    mean count of equal-width windows far outside the peak, CAR = CC/AC.

    ``coincidence_rate_hz`` is the raw in-window rate CC/T.
    ``window_mass`` is the fitted-kernel probability mass inside the CC
    window, for extrapolating windowed counts to the full peak.
    """

    cc: float
    ac: float
    car: float
    window_width_s: float
    singles_hz: tuple[float, float]
    coincidence_rate_hz: float
    window_mass: float
    far_offset_s: float
    duration_s: float
    ac_zero: bool = False

    @property
    def true_rate_hz(self) -> float:
        """Background-subtracted in-window coincidence rate."""
        return (self.cc - self.ac) / self.duration_s


def compute_car(
    hist: CoincidenceHistogram, fit: G2FitResult, far_offset_s: float
) -> CarReport:
    """
    Evaluate the CAR of a coincidence histogram.

    The accidental level is the mean over all complete same-width
    windows beyond ``far_offset_s`` on both sides, which tightens the
    AC estimate without changing its expectation.
    """
    if not fit.success:
        raise ValueError("compute_car requires a successful peak fit")
    tau = hist.tau_s
    counts = hist.counts
    half = fit.fwhm_s / 2.0
    if far_offset_s <= half:
        raise ValueError("far_offset must lie outside the peak window")
    in_window = np.abs(tau) <= half
    n_window_bins = int(in_window.sum())
    cc = float(counts[in_window].sum())
    far = np.abs(tau) >= far_offset_s
    if far.sum() == 0:
        raise ValueError("histogram range too small for the accidental window")
    ac = float(counts[far].mean()) * n_window_bins
    ac_zero = ac == 0.0
    car = math.inf if ac_zero else cc / ac
    gamma_corr = 2.0 * math.pi * fit.delta_nu_corr
    mass = laplace_gauss_mass(half, gamma_corr, fit.jitter_sigma_s)
    return CarReport(
        cc=cc,
        ac=ac,
        car=car,
        window_width_s=fit.fwhm_s,
        singles_hz=(hist.n_start / hist.duration_s, hist.n_stop / hist.duration_s),
        coincidence_rate_hz=cc / hist.duration_s,
        window_mass=mass,
        far_offset_s=far_offset_s,
        duration_s=hist.duration_s,
        ac_zero=ac_zero,
    )


def heralded_efficiency(cc_rate_hz: float, c_signal_hz: float, eta_det: float) -> float:
    """
    Heralded efficiency: probability of detecting the idler twin given a
    signal detection, with the idler detector efficiency divided out:
    eta_h = cc / (c_signal * eta_det).
    """
    if c_signal_hz <= 0:
        raise ValueError(f"signal rate must be positive, got {c_signal_hz}")
    if not 0.0 < eta_det <= 1.0:
        raise ValueError(f"detector efficiency must be in (0, 1], got {eta_det}")
    if cc_rate_hz < 0:
        raise ValueError(f"coincidence rate must be non-negative, got {cc_rate_hz}")
    return cc_rate_hz / (c_signal_hz * eta_det)


def backout_pair_rate(
    report: CarReport,
    path_start: OpticalPath,
    path_stop: OpticalPath,
    eta_det: tuple[float, float],
    dead_times_s: tuple[float, float] | None = None,
    correct_window: bool = False,
) -> float:
    """
    Invert the detection chain to estimate the pair rate at the
    collection reference plane.

    The base convention divides the reported coincidence rate by the
    two arm transmissions and detector efficiencies. With
    ``correct_window`` the background-subtracted in-window rate is
    first extrapolated to the full peak via the fitted window mass, and
    with ``dead_times_s`` the detector live-time fractions
    (1 - measured_singles * dead_time) are divided out as well; both
    are needed to recover the generated rate from a windowed CAR
    measurement.
    """
    t1, t2 = path_start.transmission, path_stop.transmission
    e1, e2 = eta_det
    if t1 <= 0 or t2 <= 0 or e1 <= 0 or e2 <= 0:
        raise ValueError("transmissions and efficiencies must be positive")
    rate = report.coincidence_rate_hz
    if correct_window:
        if report.window_mass <= 0:
            raise ValueError("window mass must be positive to extrapolate")
        rate = report.true_rate_hz / report.window_mass
    rate /= t1 * e1 * t2 * e2
    if dead_times_s is not None:
        for singles, dead in zip(report.singles_hz, dead_times_s):
            alive = 1.0 - singles * dead
            if alive <= 0:
                raise ValueError("detector saturated: live-time fraction <= 0")
            rate /= alive
    return rate


# ---------------------------------------------------------------------------
# single-arm bunching / effective modes


@dataclass(frozen=True)
class HbtResult:
    """Split-arm autocorrelation: bunching amplitude and mode number."""

    histogram: CoincidenceHistogram
    fit: G2FitResult
    g2_zero: float
    g2_zero_err: float
    n_modes: float | None
    n_modes_err: float | None
    floor_rate_per_bin: float

    @property
    def g2_curve(self) -> np.ndarray:
        """Floor-normalized histogram, an estimate of g2(tau)."""
        return self.histogram.counts / self.fit.floor


def hbt_autocorrelation(
    arm_a: TimeTagStream,
    arm_b: TimeTagStream,
    bin_ticks: int = 1,
    range_ticks: int = 864,
    jitter_sigma_s: float = 0.0,
) -> HbtResult:
    """
    Cross-correlate the two outputs of a balanced splitter on one
    channel and extract the zero-delay bunching and the effective mode
    number N = 1 / (g2(0) - 1).

    g2(0) is taken from the fitted peak (floor + amplitude) rather than
    a single bin, after deconvolving the detector jitter; N is flagged
    None when no bunching above the floor is resolved.
    """
    hist = cross_histogram(arm_a, arm_b, bin_ticks=bin_ticks, range_ticks=range_ticks)
    fit = fit_g2(hist, jitter_sigma_s=jitter_sigma_s)
    if not fit.success:
        return HbtResult(
            histogram=hist,
            fit=fit,
            g2_zero=math.nan,
            g2_zero_err=math.nan,
            n_modes=None,
            n_modes_err=None,
            floor_rate_per_bin=fit.floor / hist.duration_s,
        )
    gamma_corr = 2.0 * math.pi * fit.delta_nu_corr
    # deconvolved zero-delay excess: mass * laplace(0) / floor
    excess = fit.mass * 0.5 * gamma_corr * hist.bin_width_s / fit.floor
    g2_zero = 1.0 + excess
    # statistical error of the excess from the peak-region counts
    peak_region = np.abs(hist.tau_s) <= 2.0 / gamma_corr
    n_peak = float(hist.counts[peak_region].sum())
    g2_zero_err = excess / math.sqrt(max(n_peak - fit.floor * peak_region.sum(), 1.0))
    if excess <= 0:
        return HbtResult(hist, fit, g2_zero, g2_zero_err, None, None, fit.floor / hist.duration_s)
    n_modes = 1.0 / excess
    n_modes_err = g2_zero_err / excess**2
    return HbtResult(
        histogram=hist,
        fit=fit,
        g2_zero=g2_zero,
        g2_zero_err=g2_zero_err,
        n_modes=n_modes,
        n_modes_err=n_modes_err,
        floor_rate_per_bin=fit.floor / hist.duration_s,
    )


# ---------------------------------------------------------------------------
# heralded autocorrelation


@dataclass(frozen=True)
class HeraldedReport:
    """
    Heralded split-arm autocorrelation within a +-T_h window around each
    herald.

    ``g_h`` is the normalized two-fold histogram versus
    tau = t_a - t_b (binned on the heralding-window offset grid);
    ``g_h_zero`` its central-bin value. The normalization divides the
    observed pair counts by the factorized product of the measured
    heralded-singles offset densities, the empirical form of the
    triple-rate-over-cross-correlations definition.
    ``g_h_zero_flat`` normalizes by the flat accidental expectation
    instead. ``uncertainty`` is the standard deviation of the
    central-bin value over a 6-slice partition of the run.
    """

    g_h_zero: float
    uncertainty: float
    herald_window_s: float
    n_triples: int
    n_heralds: int
    tau_s: np.ndarray
    g_h: np.ndarray
    g_h_zero_flat: float
    low_stats: bool

    @property
    def central_window_mean(self) -> float:
        """Mean of g_h over the central third of the tau axis."""
        n = self.g_h.size
        lo, hi = n // 3, n - n // 3
        vals = self.g_h[lo:hi]
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else math.nan


def _window_offsets(
    heralds: np.ndarray, stream: TimeTagStream, th_ticks: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-herald counts and concatenated offsets (ticks) within +-T_h."""
    lo = np.searchsorted(stream.ticks, heralds - th_ticks, side="left")
    hi = np.searchsorted(stream.ticks, heralds + th_ticks, side="right")
    m = hi - lo
    total = int(m.sum())
    if total == 0:
        return m, np.empty(0, dtype=np.int64)
    first = np.repeat(lo, m)
    offsets = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
    tags = stream.ticks[first + offsets]
    return m, tags - np.repeat(heralds, m)


def _pair_tau_bins(
    m_a: np.ndarray, u_a: np.ndarray, m_b: np.ndarray, u_b: np.ndarray, n_u: int
) -> np.ndarray:
    """
    Bin-difference histogram of all within-herald (a, b) combinations.
    ``u_a``/``u_b`` are already u-bin indices grouped by herald.
    """
    both = (m_a > 0) & (m_b > 0)
    counts = np.zeros(2 * n_u - 1, dtype=np.int64)
    if not both.any():
        return counts
    na = m_a[both]
    nb = m_b[both]
    # group start offsets into the concatenated offset arrays
    a_start = (np.cumsum(m_a) - m_a)[both]
    b_start = (np.cumsum(m_b) - m_b)[both]
    # expand: each a element repeated nb times, b tiled na times, per herald
    pair_per_herald = na * nb
    total = int(pair_per_herald.sum())
    herald_of_pair = np.repeat(np.arange(na.size), pair_per_herald)
    pos = np.arange(total) - np.repeat(np.cumsum(pair_per_herald) - pair_per_herald, pair_per_herald)
    ia = a_start[herald_of_pair] + pos // nb[herald_of_pair]
    ib = b_start[herald_of_pair] + pos % nb[herald_of_pair]
    k = u_a[ia] - u_b[ib] + (n_u - 1)
    np.add.at(counts, k, 1)
    return counts


def heralded_g2(
    signal: TimeTagStream,
    idler_a: TimeTagStream,
    idler_b: TimeTagStream,
    t_h_s: float,
    n_offset_bins: int = 7,
    min_triples: int = 100,
) -> HeraldedReport:
    """
    Heralded autocorrelation g_h(tau = t_a - t_b | herald).

    Idler tags within [t_s - T_h, t_s + T_h] of a signal tag are
    accepted; their in-window offsets are binned on ``n_offset_bins``
    bins (odd). The pair histogram over the bin difference is divided
    by the discrete cross-correlation of the two heralded-singles
    offset histograms (scaled by the herald count), which is the
    factorized expectation under independent arms. Fewer than
    ``min_triples`` accepted pairs set the low-statistics flag.
    """
    if t_h_s <= 0:
        raise ValueError(f"herald window must be positive, got {t_h_s}")
    if n_offset_bins < 3 or n_offset_bins % 2 == 0:
        raise ValueError("n_offset_bins must be odd and at least 3")
    if not (signal.tick_s == idler_a.tick_s == idler_b.tick_s):
        raise ValueError("all three streams must share one tick")
    th_ticks = int(round(t_h_s / signal.tick_s))
    if 2 * th_ticks + 1 < n_offset_bins:
        raise ValueError("offset bins finer than the TDC resolution")
    heralds = signal.ticks
    n_h = heralds.size
    n_u = n_offset_bins
    edges = np.linspace(-th_ticks, th_ticks, n_u + 1)

    m_a, off_a = _window_offsets(heralds, idler_a, th_ticks)
    m_b, off_b = _window_offsets(heralds, idler_b, th_ticks)
    ua = np.clip(np.digitize(off_a, edges) - 1, 0, n_u - 1)
    ub = np.clip(np.digitize(off_b, edges) - 1, 0, n_u - 1)
    hist_a = np.bincount(ua, minlength=n_u).astype(np.float64)
    hist_b = np.bincount(ub, minlength=n_u).astype(np.float64)
    num = _pair_tau_bins(m_a, ua, m_b, ub, n_u)

    # factorized denominator: per tau-bin k, sum_j A_j * B_{j-k} / N_h
    # (np.correlate(a, b, 'full')[k + n_u - 1] = sum_j a[j] b[j-k])
    denom = np.correlate(hist_a, hist_b, mode="full") / max(n_h, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_h = np.where(denom > 0, num / denom, np.nan)
    center = n_u - 1
    g_h_zero = float(g_h[center])

    # flat (accidental-floor) normalization for comparison
    multiplicity = n_u - np.abs(np.arange(-(n_u - 1), n_u))
    flat = hist_a.sum() * hist_b.sum() * multiplicity / (max(n_h, 1) * n_u**2)
    g_h_zero_flat = float(num[center] / flat[center]) if flat[center] > 0 else math.nan

    # 6-slice ensemble spread of the central bin
    duration_ticks = signal.duration_s / signal.tick_s
    slice_vals = []
    for i in range(6):
        lo_t = i * duration_ticks / 6.0
        hi_t = (i + 1) * duration_ticks / 6.0
        sel = (heralds >= lo_t) & (heralds < hi_t)
        if not sel.any():
            continue
        m_as, off_as = _window_offsets(heralds[sel], idler_a, th_ticks)
        m_bs, off_bs = _window_offsets(heralds[sel], idler_b, th_ticks)
        uas = np.clip(np.digitize(off_as, edges) - 1, 0, n_u - 1)
        ubs = np.clip(np.digitize(off_bs, edges) - 1, 0, n_u - 1)
        nums = _pair_tau_bins(m_as, uas, m_bs, ubs, n_u)
        ha = np.bincount(uas, minlength=n_u).astype(np.float64)
        hb = np.bincount(ubs, minlength=n_u).astype(np.float64)
        ds = np.correlate(ha, hb, mode="full") / max(int(sel.sum()), 1)
        slice_vals.append(nums[center] / ds[center] if ds[center] > 0 else np.nan)
    slice_vals = np.asarray(slice_vals, dtype=np.float64)
    finite = slice_vals[np.isfinite(slice_vals)]
    uncertainty = float(finite.std(ddof=1)) if finite.size > 1 else math.nan

    n_triples = int(num.sum())
    tau_axis = np.arange(-(n_u - 1), n_u) * (2.0 * t_h_s / n_u)
    return HeraldedReport(
        g_h_zero=g_h_zero,
        uncertainty=uncertainty,
        herald_window_s=t_h_s,
        n_triples=n_triples,
        n_heralds=int(n_h),
        tau_s=tau_axis,
        g_h=g_h,
        g_h_zero_flat=g_h_zero_flat,
        low_stats=n_triples < min_triples,
    )


# ---------------------------------------------------------------------------
# channel multiplexing matrix


def coincidence_matrix(
    signal_streams: list[TimeTagStream],
    idler_streams: list[TimeTagStream],
    bin_ticks: int = 1,
    range_ticks: int = 1235,
    peak_window_s: float = 2.0e-9,
    far_offset_s: float = 60e-9,
) -> np.ndarray:
    """
    Peak significance of every signal x idler combination, in units of
    the accidental-floor standard deviation.

    Entry (m, n) is (peak-window counts - accidental expectation) /
    sqrt(accidental expectation), where the expectation comes from the
    far-window mean of the same histogram. Pairs generated on symmetric
    channels show up on the diagonal only.
    """
    z = np.zeros((len(signal_streams), len(idler_streams)))
    for i, s in enumerate(signal_streams):
        for j, idl in enumerate(idler_streams):
            hist = cross_histogram(s, idl, bin_ticks=bin_ticks, range_ticks=range_ticks)
            tau = hist.tau_s
            in_window = np.abs(tau) <= peak_window_s / 2.0
            far = np.abs(tau) >= far_offset_s
            peak = float(hist.counts[in_window].sum())
            acc = float(hist.counts[far].mean()) * int(in_window.sum())
            z[i, j] = (peak - acc) / math.sqrt(max(acc, 1.0))
    return z
