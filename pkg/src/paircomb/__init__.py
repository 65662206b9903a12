"""
paircomb: stochastic simulator and time-tag analysis toolkit for
multiplexed, cavity-enhanced photon-pair sources.

The library layers are importable on their own:

* :mod:`paircomb.ring` - device calculator (linewidth, coherence time,
  channel grid, rate scaling)
* :mod:`paircomb.source` - pair emission as a point process
* :mod:`paircomb.detectors` - loss ledgers, detector model, tag streams
* :mod:`paircomb.analysis` - histograms, peak fits, CAR, bunching,
  heralded autocorrelation, multiplexing matrix
* :mod:`paircomb.scenarios` - named end-to-end experiments
* :mod:`paircomb.tags` - QTT1 binary tag files
"""

from .analysis import (
    CarReport,
    CoincidenceHistogram,
    G2FitResult,
    HbtResult,
    HeraldedReport,
    backout_pair_rate,
    coincidence_matrix,
    compute_car,
    cross_histogram,
    fit_g2,
    hbt_autocorrelation,
    heralded_efficiency,
    heralded_g2,
    laplace_gauss_mass,
    laplace_gauss_pdf,
    rate_from_g2_peak,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    config_to_ini,
    default_config,
    parse_config,
)
from .detectors import (
    DetectorSpec,
    OpticalPath,
    TimeTagStream,
    apply_loss,
    beam_splitter,
    dead_time_filter,
    detect,
    detection_idler_path,
    detection_signal_path,
    gate,
    quantize,
    reference_idler_arm,
    reference_signal_arm,
)
from .ring import (
    C_VACUUM,
    ChannelGrid,
    ChannelPair,
    RingSpec,
    build_channel_grid,
    coherence_time,
    fsr_from_geometry,
    itu_channel_frequency,
    linewidth_from_q,
    relative_pair_rate,
    thermal_shift,
)
from .scenarios import ReportBundle, car_vs_power, emit_plot_data, run_scenario
from .source import (
    PairEvents,
    SourceSpec,
    assign_ports,
    generate_multimode,
    generate_pairs,
    generate_surviving_multimode,
    rate_from_power,
    total_comb_rate,
)
from .tags import TagFileError, read_timetags, write_timetags

__version__ = "0.1.0"

__all__ = [
    "C_VACUUM",
    "CarReport",
    "ChannelGrid",
    "ChannelPair",
    "CoincidenceHistogram",
    "ConfigError",
    "DetectorSpec",
    "ExperimentConfig",
    "G2FitResult",
    "HbtResult",
    "HeraldedReport",
    "OpticalPath",
    "PairEvents",
    "ReportBundle",
    "RingSpec",
    "SourceSpec",
    "TagFileError",
    "TimeTagStream",
    "apply_loss",
    "assign_ports",
    "backout_pair_rate",
    "beam_splitter",
    "build_channel_grid",
    "car_vs_power",
    "coherence_time",
    "coincidence_matrix",
    "compute_car",
    "config_to_ini",
    "cross_histogram",
    "dead_time_filter",
    "default_config",
    "detect",
    "detection_idler_path",
    "detection_signal_path",
    "emit_plot_data",
    "fit_g2",
    "fsr_from_geometry",
    "gate",
    "generate_multimode",
    "generate_pairs",
    "generate_surviving_multimode",
    "hbt_autocorrelation",
    "heralded_efficiency",
    "heralded_g2",
    "itu_channel_frequency",
    "laplace_gauss_mass",
    "laplace_gauss_pdf",
    "linewidth_from_q",
    "parse_config",
    "quantize",
    "rate_from_g2_peak",
    "rate_from_power",
    "read_timetags",
    "reference_idler_arm",
    "reference_signal_arm",
    "relative_pair_rate",
    "run_scenario",
    "thermal_shift",
    "total_comb_rate",
    "write_timetags",
]
