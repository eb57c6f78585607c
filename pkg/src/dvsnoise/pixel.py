"""Small-signal photoreceptor model and its noise spectra.

The logarithmic front end is linearized about an operating point set by the
photocurrent.  Two nodes carry state:

* ``v_d``  photodiode node, capacitance ``c_in``, driven by the feedback
  transistor (source-follower configuration, transconductance
  ``g_fb = (i_photo + i_dark)/u_t``);
* ``v_p``  photoreceptor output, capacitance ``c_out``, driven by the
  inverting amplifier (``g_amp = kappa * i_pr / u_t``) with output
  conductance ``g_o = g_amp / amp_gain``.

Node equations (small-signal, contrast input ``c(t)`` in natural-log units,
independent current noise injections ``i_pd``, ``i_fb``, ``i_amp``)::

    c_in  dv_d/dt = -g_fb v_d + kappa g_fb v_p - (i_photo + i_dark) c(t)
                    + i_pd + i_fb
    c_out dv_p/dt = -g_amp v_d - g_o v_p + i_amp

Every transistor operates in subthreshold, so each noise source is shot
noise at the local DC current: one-sided PSD ``2 q I`` per device, two
devices at the output node.  All spectral densities are one-sided and
integrals over frequency run in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "PhysicalConstants",
    "PixelParams",
    "StateVector",
    "NoiseSourceSet",
    "SpectralResult",
    "NaturalParams",
    "TransferGains",
    "system_matrices",
    "dc_steady_state",
    "transfer_at",
    "noise_sources",
    "output_noise_psd",
    "integrate_psd",
    "rms_noise",
    "shot_noise_fraction",
    "natural_params",
    "tc_from_voltage",
    "voltage_from_tc",
]

QUAD_RTOL = 1e-4


@dataclass(frozen=True)
class PhysicalConstants:
    """Device constants: electron charge, thermal voltage, gate coupling."""

    q: float = 1.602e-19
    u_t: float = 0.025
    kappa: float = 0.7

    def __post_init__(self) -> None:
        if not (self.q > 0 and math.isfinite(self.q)):
            raise ValueError(f"q must be positive and finite, got {self.q}")
        if not (self.u_t > 0 and math.isfinite(self.u_t)):
            raise ValueError(f"u_t must be positive and finite, got {self.u_t}")
        if not (0 < self.kappa <= 1):
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")


@dataclass(frozen=True)
class PixelParams:
    """Operating point and element values of one pixel front end.

    Currents in amperes, capacitances in farads.  ``amp_gain`` is the DC
    voltage gain of the inverting amplifier.
    """

    i_photo: float
    i_pr: float
    i_dark: float = 1e-14
    c_in: float = 1e-13
    c_out: float = 1e-13
    amp_gain: float = 100.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self) -> None:
        if self.i_photo < 0 or not math.isfinite(self.i_photo):
            raise ValueError(f"i_photo must be >= 0, got {self.i_photo}")
        if self.i_dark < 0 or not math.isfinite(self.i_dark):
            raise ValueError(f"i_dark must be >= 0, got {self.i_dark}")
        if self.i_photo + self.i_dark <= 0:
            raise ValueError("i_photo + i_dark must be positive")
        if not (self.i_pr > 0 and math.isfinite(self.i_pr)):
            raise ValueError(f"i_pr must be positive, got {self.i_pr}")
        if not (self.c_in > 0 and math.isfinite(self.c_in)):
            raise ValueError(f"c_in must be positive, got {self.c_in}")
        if not (self.c_out > 0 and math.isfinite(self.c_out)):
            raise ValueError(f"c_out must be positive, got {self.c_out}")
        if not (self.amp_gain > 1 and math.isfinite(self.amp_gain)):
            raise ValueError(f"amp_gain must be > 1, got {self.amp_gain}")

    @property
    def i_total(self) -> float:
        return self.i_photo + self.i_dark

    @property
    def g_fb(self) -> float:
        return self.i_total / self.constants.u_t

    @property
    def g_amp(self) -> float:
        return self.constants.kappa * self.i_pr / self.constants.u_t

    @property
    def g_o(self) -> float:
        return self.g_amp / self.amp_gain


@dataclass(frozen=True)
class StateVector:
    """Node voltages (volts) of the linearized model."""

    v_d: float
    v_p: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v_d) and math.isfinite(self.v_p)):
            raise ValueError("state components must be finite")


@dataclass(frozen=True)
class NoiseSourceSet:
    """One-sided current noise PSDs (A^2/Hz) of the three injection points.

    ``from_params`` builds the physical set (shot noise at the operating
    currents, with s_pd = s_fb by construction).  Direct construction with
    arbitrary non-negative values is allowed so individual sources can be
    switched off in attribution studies.
    """

    s_pd: float
    s_fb: float
    s_amp: float

    def __post_init__(self) -> None:
        for name in ("s_pd", "s_fb", "s_amp"):
            v = getattr(self, name)
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"{name} must be >= 0 and finite, got {v}")

    @classmethod
    def from_params(cls, params: PixelParams) -> "NoiseSourceSet":
        q = params.constants.q
        s_in = 2.0 * q * params.i_total
        # two devices at the output node: amplifier transistor + bias source
        return cls(s_pd=s_in, s_fb=s_in, s_amp=2.0 * 2.0 * q * params.i_pr)


def noise_sources(params: PixelParams) -> NoiseSourceSet:
    """Shot-noise PSDs at the operating point of ``params``."""
    return NoiseSourceSet.from_params(params)


@dataclass(frozen=True)
class TransferGains:
    """Complex gains to ``v_p`` from the three injection points.

    ``signal`` is V per unit contrast; ``input_node`` / ``output_node`` are
    V per ampere injected at the respective node.  Fields are scalars or
    arrays matching the frequency argument of :func:`transfer_at`.
    """

    signal: np.ndarray | complex
    input_node: np.ndarray | complex
    output_node: np.ndarray | complex


@dataclass(frozen=True)
class SpectralResult:
    """Output-referred voltage noise PSD (V^2/Hz) on a frequency grid."""

    freqs: np.ndarray
    psd_total: np.ndarray
    psd_by_source: dict[str, np.ndarray]
    f_min: float
    f_max: float
    v_rms: float | None = None

    def __post_init__(self) -> None:
        if len(self.freqs) != len(self.psd_total):
            raise ValueError("freqs and psd_total must have equal length")
        if np.any(self.psd_total < 0):
            raise ValueError("psd_total must be non-negative")
        parts = sum(self.psd_by_source.values())
        scale = np.abs(self.psd_total).max(initial=0.0)
        if scale > 0 and np.abs(parts - self.psd_total).max() > 1e-9 * scale:
            raise ValueError("per-source PSDs do not sum to psd_total")


@dataclass(frozen=True)
class NaturalParams:
    """Second-order descriptors of the closed loop.

    ``f_n`` is the natural frequency sqrt(|lambda_1 lambda_2|)/2pi,
    ``q_factor`` = omega_n/|lambda_1 + lambda_2|, and ``f_3db`` the -3 dB
    frequency of the signal transfer, found numerically.
    """

    f_n: float
    q_factor: float
    f_3db: float
    eigenvalues: tuple[complex, complex]

    def __post_init__(self) -> None:
        if not (self.f_n > 0 and self.q_factor > 0 and self.f_3db > 0):
            raise ValueError("natural parameters must be positive")
        if any(ev.real >= 0 for ev in self.eigenvalues):
            raise ValueError("model must be stable (Re(lambda) < 0)")


def system_matrices(params: PixelParams) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Dynamics matrix A and input vectors of dx/dt = A x + sum(b_k u_k).

    State ordering is ``[v_d, v_p]``.  Input vectors are returned for the
    contrast signal and for unit currents into the input and output nodes,
    already scaled by the node capacitances.
    """
    g_fb, g_amp, g_o = params.g_fb, params.g_amp, params.g_o
    kappa = params.constants.kappa
    c_in, c_out = params.c_in, params.c_out
    a = np.array([
        [-g_fb / c_in, kappa * g_fb / c_in],
        [-g_amp / c_out, -g_o / c_out],
    ])
    inputs = {
        "signal": np.array([-params.i_total / c_in, 0.0]),
        "input_node": np.array([1.0 / c_in, 0.0]),
        "output_node": np.array([0.0, 1.0 / c_out]),
    }
    return a, inputs


def dc_steady_state(params: PixelParams, contrast: float) -> StateVector:
    """Node voltages for a constant contrast step (x = -A^{-1} b c)."""
    a, inputs = system_matrices(params)
    x = np.linalg.solve(a, -inputs["signal"] * contrast)
    return StateVector(v_d=float(x[0]), v_p=float(x[1]))


def _denominator(params: PixelParams, s):
    g_fb, g_amp, g_o = params.g_fb, params.g_amp, params.g_o
    kappa = params.constants.kappa
    return ((s * params.c_in + g_fb) * (s * params.c_out + g_o)
            + kappa * g_fb * g_amp)


def transfer_at(params: PixelParams, f) -> TransferGains:
    """Complex transfer gains to v_p at frequency ``f`` (Hz, scalar or array).

    Solves (j 2 pi f C - G) x = b for each injection; the 2x2 system is
    inverted in closed form.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("frequencies must be >= 0")
    s = 2j * np.pi * f
    den = _denominator(params, s)
    signal = params.g_amp * params.i_total / den
    input_node = -params.g_amp / den
    output_node = (s * params.c_in + params.g_fb) / den
    if f.ndim == 0:
        return TransferGains(complex(signal), complex(input_node),
                             complex(output_node))
    return TransferGains(signal, input_node, output_node)


def output_noise_psd(params: PixelParams, freqs,
                     sources: NoiseSourceSet | None = None) -> SpectralResult:
    """One-sided PSD of v_p (V^2/Hz) on ``freqs``, split by source.

    Each source contributes S_k |T_k(f)|^2; contributions add because the
    sources are independent.
    """
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or len(freqs) == 0:
        raise ValueError("freqs must be a non-empty 1-D array")
    if sources is None:
        sources = noise_sources(params)
    gains = transfer_at(params, freqs)
    t_in2 = np.abs(gains.input_node) ** 2
    t_out2 = np.abs(gains.output_node) ** 2
    by_source = {
        "photodiode": sources.s_pd * t_in2,
        "feedback": sources.s_fb * t_in2,
        "amplifier": sources.s_amp * t_out2,
    }
    total = by_source["photodiode"] + by_source["feedback"] + by_source["amplifier"]
    return SpectralResult(freqs=freqs, psd_total=total,
                          psd_by_source=by_source,
                          f_min=float(freqs[0]), f_max=float(freqs[-1]))


def _eigenvalues(params: PixelParams) -> np.ndarray:
    a, _ = system_matrices(params)
    return np.linalg.eigvals(a)


def integrate_psd(psd, f_min: float, f_max: float, *,
                  f_scale_lo: float, f_scale_hi: float,
                  rtol: float = QUAD_RTOL) -> float:
    """Band power integral of a one-sided PSD callable over [f_min, f_max].

    Adaptive quadrature on the log-frequency axis; ``f_min = 0`` adds a
    linear panel below the slowest system scale ``f_scale_lo`` (the PSD is
    flat there), ``f_max = inf`` maps the tail beyond the fastest scale
    ``f_scale_hi`` through x = 1/f, which is exact for 1/f^2-or-steeper
    tails.  Deterministic (QUADPACK).  Raises on non-finite integrand.
    """
    if f_min < 0 or f_max <= f_min:
        raise ValueError(f"need 0 <= f_min < f_max, got [{f_min}, {f_max}]")
    if not (f_scale_lo > 0 and f_scale_hi > 0):
        raise ValueError("frequency scales must be positive")

    def checked(f):
        v = psd(f)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"PSD not finite at f = {f}")
        return v

    probes = np.geomspace(max(f_min, f_scale_lo * 1e-3),
                          min(f_max, f_scale_hi * 1e3) if math.isfinite(f_max)
                          else f_scale_hi * 1e3, 7)
    if max(checked(fp) for fp in probes) == 0.0:
        return 0.0

    total = 0.0
    lo = f_min
    if f_min == 0.0:
        f_a = f_scale_lo * 1e-2
        if math.isfinite(f_max):
            f_a = min(f_a, f_max)
        part, _ = quad(checked, 0.0, f_a, epsabs=0.0, epsrel=rtol, limit=200)
        total += part
        lo = f_a
    hi = f_max
    tail = 0.0
    if math.isinf(f_max):
        f_b = max(f_scale_hi * 1e2, lo * 10.0)
        tail, _ = quad(lambda x: checked(1.0 / x) / x**2, 0.0, 1.0 / f_b,
                       epsabs=0.0, epsrel=rtol, limit=200)
        hi = f_b
    if hi > lo:
        part, _ = quad(lambda u: checked(math.exp(u)) * math.exp(u),
                       math.log(lo), math.log(hi),
                       epsabs=0.0, epsrel=rtol, limit=200)
        total += part
    return total + tail


def _band_edges(params: PixelParams) -> tuple[float, float]:
    ev = _eigenvalues(params)
    mags = np.abs(ev) / (2.0 * np.pi)
    return float(mags.min()), float(mags.max())


def rms_noise(params: PixelParams, f_min: float, f_max: float,
              sources: NoiseSourceSet | None = None) -> float:
    """RMS voltage noise of v_p over [f_min, f_max] (volts).

    ``f_min = 0`` and ``f_max = inf`` are supported; dedicated tests close
    the loop against the stationary Lyapunov variance.
    """
    if sources is None:
        sources = noise_sources(params)
    lo_scale, hi_scale = _band_edges(params)

    def total_psd(f):
        gains = transfer_at(params, f)
        return ((sources.s_pd + sources.s_fb) * abs(gains.input_node) ** 2
                + sources.s_amp * abs(gains.output_node) ** 2)

    power = integrate_psd(total_psd, f_min, f_max,
                          f_scale_lo=lo_scale, f_scale_hi=hi_scale)
    return math.sqrt(max(power, 0.0))


def shot_noise_fraction(params: PixelParams, f_min: float, f_max: float,
                        sources: NoiseSourceSet | None = None) -> float:
    """Photodiode share of the band-integrated output noise power."""
    if sources is None:
        sources = noise_sources(params)
    lo_scale, hi_scale = _band_edges(params)

    def pd_psd(f):
        return sources.s_pd * abs(transfer_at(params, f).input_node) ** 2

    def total_psd(f):
        gains = transfer_at(params, f)
        return ((sources.s_pd + sources.s_fb) * abs(gains.input_node) ** 2
                + sources.s_amp * abs(gains.output_node) ** 2)

    total = integrate_psd(total_psd, f_min, f_max,
                          f_scale_lo=lo_scale, f_scale_hi=hi_scale)
    if total <= 0.0:
        raise ValueError("total band power is zero; fraction undefined")
    pd = integrate_psd(pd_psd, f_min, f_max,
                       f_scale_lo=lo_scale, f_scale_hi=hi_scale)
    return pd / total


def natural_params(params: PixelParams) -> NaturalParams:
    """f_n, Q and the numerically located -3 dB frequency of the signal path."""
    ev = _eigenvalues(params)
    if np.any(ev.real >= 0):
        raise ValueError(f"unstable operating point, eigenvalues {ev}")
    omega_n = math.sqrt(abs(ev[0] * ev[1]))
    f_n = omega_n / (2.0 * np.pi)
    q_factor = omega_n / abs(ev[0] + ev[1])

    dc = abs(transfer_at(params, 0.0).signal)
    target = dc / math.sqrt(2.0)

    def droop(f):
        return abs(transfer_at(params, f).signal) - target

    grid = np.geomspace(f_n * 1e-4, f_n * 1e4, 1601)
    above = droop(grid[0]) > 0
    if not above:
        raise RuntimeError("signal transfer already below -3 dB at f_n/1e4")
    vals = np.array([droop(g) for g in grid])
    below = np.nonzero(vals <= 0)[0]
    if len(below) == 0:
        raise RuntimeError("no -3 dB crossing found below f_n*1e4")
    # last crossing: resonant peaks re-enter the passband before rolling off
    idx = below[-1]
    while idx > 0 and vals[idx - 1] <= 0:
        idx -= 1
    f_3db = brentq(droop, grid[idx - 1], grid[idx],
                   xtol=1e-30, rtol=4.0 * np.finfo(float).eps)
    return NaturalParams(f_n=f_n, q_factor=q_factor, f_3db=float(f_3db),
                         eigenvalues=(complex(ev[0]), complex(ev[1])))


def tc_from_voltage(v: float,
                    constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Temporal-contrast (natural-log) equivalent of a v_p excursion."""
    return v * constants.kappa / constants.u_t


def voltage_from_tc(tc: float,
                    constants: PhysicalConstants = PhysicalConstants()) -> float:
    """v_p excursion corresponding to a temporal contrast (inverse of above)."""
    return tc * constants.u_t / constants.kappa
