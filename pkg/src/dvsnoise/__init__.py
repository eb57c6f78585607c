"""Pixel-level noise simulator for dynamic vision sensors.

The package models a second-order logarithmic photoreceptor driven by shot
noise (``pixel``), synthesizes exact stationary sample paths of its output
(``synth``), converts contrast paths into ON/OFF event streams with leak
and refractory behavior (``events``), estimates spectra and the normalized
noise-event-rate curve (``estimators``), and drives reproducible
operating-point sweeps from a CLI (``sweep``, ``cli``).
"""

from .estimators import (
    DtComparison,
    Fig7Point,
    PsdEstimate,
    TailFit,
    autocorr,
    dt_convergence,
    fig7_curve,
    rms,
    tail_fit,
    welch_psd,
)
from .events import (
    Event,
    EventGenConfig,
    EventStream,
    LeakModel,
    event_rate,
    generate_events,
    leak_slope,
)
from .pixel import (
    NaturalParams,
    NoiseSourceSet,
    PhysicalConstants,
    PixelParams,
    SpectralResult,
    TransferGains,
    dc_steady_state,
    integrate_psd,
    natural_params,
    noise_sources,
    output_noise_psd,
    rms_noise,
    shot_noise_fraction,
    system_matrices,
    tc_from_voltage,
    transfer_at,
    voltage_from_tc,
)
from .sweep import (
    PointError,
    SweepRow,
    SweepSpec,
    config_echo,
    knee_current,
    parse_config,
    psd_grid,
    run_sweep,
)
from .synth import (
    Discretization,
    OuSpec,
    SamplePath,
    discretize,
    ou_decay,
    synthesize_from_psd,
    synthesize_ou,
    synthesize_path,
)

__version__ = "0.1.0"

__all__ = [
    "DtComparison",
    "Fig7Point",
    "PsdEstimate",
    "TailFit",
    "autocorr",
    "dt_convergence",
    "fig7_curve",
    "rms",
    "tail_fit",
    "welch_psd",
    "Event",
    "EventGenConfig",
    "EventStream",
    "LeakModel",
    "event_rate",
    "generate_events",
    "leak_slope",
    "NaturalParams",
    "NoiseSourceSet",
    "PhysicalConstants",
    "PixelParams",
    "SpectralResult",
    "TransferGains",
    "dc_steady_state",
    "integrate_psd",
    "natural_params",
    "noise_sources",
    "output_noise_psd",
    "rms_noise",
    "shot_noise_fraction",
    "system_matrices",
    "tc_from_voltage",
    "transfer_at",
    "voltage_from_tc",
    "PointError",
    "SweepRow",
    "SweepSpec",
    "config_echo",
    "knee_current",
    "parse_config",
    "psd_grid",
    "run_sweep",
    "Discretization",
    "OuSpec",
    "SamplePath",
    "discretize",
    "ou_decay",
    "synthesize_from_psd",
    "synthesize_ou",
    "synthesize_path",
    "__version__",
]
