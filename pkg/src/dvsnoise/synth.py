"""Time-domain synthesis of stationary noise paths.

Three generators share a common output type:

* :func:`synthesize_path` integrates the two-node photoreceptor model
  driven by its shot-noise sources, using the exact discretization of the
  continuous system (matrix exponential + discrete Lyapunov increment), and
  returns the output in temporal-contrast units;
* :func:`synthesize_ou` produces an Ornstein-Uhlenbeck (single-pole
  Lorentzian) path from its AR(1) recursion;
* :func:`synthesize_from_psd` draws a random-phase realization of an
  arbitrary one-sided PSD through an inverse FFT, used to cross-check the
  recursive generators.

All generators draw standard normals from one ``numpy.random.Generator``
stream in chunk order, so a path depends only on the seed, never on the
chunk size or the kernel backend.  Paths start in the stationary
distribution: ``samples[0]`` is an exact stationary draw, not a transient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov

from . import _kernels
from .pixel import (
    NoiseSourceSet,
    PixelParams,
    natural_params,
    noise_sources,
    system_matrices,
)

__all__ = [
    "SamplePath",
    "OuSpec",
    "Discretization",
    "ou_decay",
    "discretize",
    "synthesize_path",
    "synthesize_ou",
    "synthesize_from_psd",
]

DEFAULT_CHUNK = 1 << 20

# Hard sampling floor for the state-space path: at least ten samples per
# natural period, or the discretized trajectory no longer resembles the
# continuous one between samples (its marginal statistics stay exact at any
# dt, so this guards the event scan, not the variance).
MAX_DT_CYCLES = 0.1


@dataclass(frozen=True)
class SamplePath:
    """Uniformly sampled scalar path.

    ``samples`` are in temporal-contrast units for model paths (directly
    comparable to event thresholds); ``origin`` names the generator and
    ``seed`` records the stream key when one was used.
    """

    dt: float
    samples: np.ndarray
    seed: int | None = None
    origin: str = "unknown"

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        s = np.asarray(self.samples)
        if s.ndim != 1 or len(s) == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if s.dtype != np.float64:
            raise ValueError(f"samples must be float64, got {s.dtype}")

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass(frozen=True)
class OuSpec:
    """Ornstein-Uhlenbeck process: stationary RMS ``sigma`` (contrast units)
    and -3 dB corner ``f_3db`` (Hz)."""

    sigma: float
    f_3db: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.f_3db > 0 and math.isfinite(self.f_3db)):
            raise ValueError(f"f_3db must be positive, got {self.f_3db}")


@dataclass(frozen=True)
class Discretization:
    """Exact one-step discretization of the photoreceptor state equation.

    x[k+1] = phi @ x[k] + e[k],  e ~ N(0, noise_cov), and ``stationary_cov``
    solves the continuous Lyapunov equation (it is also the fixed point of
    the discrete recursion by construction).
    """

    phi: np.ndarray
    noise_cov: np.ndarray
    stationary_cov: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        for name in ("phi", "noise_cov", "stationary_cov"):
            m = getattr(self, name)
            if m.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2, got {m.shape}")


def ou_decay(f_3db: float, dt: float) -> float:
    """AR(1) coefficient exp(-2 pi f_3db dt) of a sampled OU process."""
    if f_3db <= 0 or dt <= 0:
        raise ValueError("f_3db and dt must be positive")
    return math.exp(-2.0 * math.pi * f_3db * dt)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Factor L with L L' = cov for a symmetric near-PSD matrix.

    Eigenvalues within rounding of zero are clipped; a genuinely indefinite
    matrix is rejected.
    """
    sym = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(sym)
    floor = -1e-10 * max(w.max(), 0.0)
    if w.min() < floor:
        raise ValueError(f"covariance is not positive semidefinite: "
                         f"eigenvalues {w}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def discretize(params: PixelParams, dt: float,
               sources: NoiseSourceSet | None = None) -> Discretization:
    """Exact discrete-time equivalent of the noise-driven pixel model.

    phi = expm(A dt); the increment covariance comes from the stationary
    covariance P (continuous Lyapunov solution) via Q_d = P - phi P phi',
    which is exact for stationary linear SDEs at any dt.  ``dt`` itself is
    capped at MAX_DT_CYCLES natural periods so sampled trajectories stay
    faithful between samples.
    """
    if sources is None:
        sources = noise_sources(params)
    f_n = natural_params(params).f_n
    if dt > MAX_DT_CYCLES / f_n * (1.0 + 1e-12):
        raise ValueError(
            f"dt = {dt:.3e} s undersamples the natural frequency "
            f"{f_n:.3e} Hz; need dt <= {MAX_DT_CYCLES / f_n:.3e} s")
    a, inputs = system_matrices(params)
    b_in = inputs["input_node"]
    b_out = inputs["output_node"]
    q_c = ((sources.s_pd + sources.s_fb) / 2.0 * np.outer(b_in, b_in)
           + sources.s_amp / 2.0 * np.outer(b_out, b_out))
    p_stat = solve_continuous_lyapunov(a, -q_c)
    p_stat = 0.5 * (p_stat + p_stat.T)
    phi = expm(a * dt)
    q_d = p_stat - phi @ p_stat @ phi.T
    q_d = 0.5 * (q_d + q_d.T)
    return Discretization(phi=phi, noise_cov=q_d, stationary_cov=p_stat,
                          dt=dt)


def _resolve_rng(seed, rng) -> np.random.Generator:
    if rng is not None:
        if seed is not None:
            raise ValueError("pass either seed or rng, not both")
        return rng
    return np.random.default_rng(seed)


def synthesize_path(params: PixelParams, duration: float, dt: float, *,
                    seed=None, rng: np.random.Generator | None = None,
                    sources: NoiseSourceSet | None = None,
                    chunk_size: int = DEFAULT_CHUNK) -> SamplePath:
    """Stationary noise path of the photoreceptor output, contrast units.

    ``samples[0]`` is an exact draw from the stationary state distribution;
    each later sample advances the exact discretization by ``dt``.  The
    voltage path is scaled by kappa/u_t so one unit equals one natural-log
    unit of intensity, the same scale as event thresholds.
    """
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError(f"duration {duration} shorter than one step {dt}")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    disc = discretize(params, dt, sources)
    l_stat = _psd_factor(disc.stationary_cov)
    l_q = _psd_factor(disc.noise_cov)
    gen = _resolve_rng(seed, rng)
    scale = params.constants.kappa / params.constants.u_t

    out = np.empty(n)
    x = l_stat @ gen.standard_normal(2)
    out[0] = x[1] * scale
    pos = 1
    while pos < n:
        m = min(chunk_size, n - pos)
        w = gen.standard_normal((m, 2))
        samples, x = _kernels.linear2_chunk(w, disc.phi, l_q, x)
        out[pos:pos + m] = samples * scale
        pos += m
    return SamplePath(dt=dt, samples=out,
                      seed=seed if isinstance(seed, int) else None,
                      origin="pixel")


def synthesize_ou(spec: OuSpec, duration: float, dt: float, *,
                  seed=None, rng: np.random.Generator | None = None,
                  chunk_size: int = DEFAULT_CHUNK) -> SamplePath:
    """Stationary OU path: samples[0] = sigma * w[0], then the AR(1) update.

    Requires at least 20 samples per corner period so the sampled path
    tracks the continuous process through threshold crossings.
    """
    if dt > 1.0 / (20.0 * spec.f_3db) * (1.0 + 1e-12):
        raise ValueError(
            f"dt = {dt:.3e} s undersamples the corner {spec.f_3db:.3e} Hz; "
            f"need dt <= {1.0 / (20.0 * spec.f_3db):.3e} s")
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError(f"duration {duration} shorter than one step {dt}")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    a = ou_decay(spec.f_3db, dt)
    b = spec.sigma * math.sqrt(1.0 - a * a)
    gen = _resolve_rng(seed, rng)

    out = np.empty(n)
    pos = 0
    x = 0.0
    while pos < n:
        m = min(chunk_size, n - pos)
        w = gen.standard_normal(m)
        if pos == 0:
            x = spec.sigma * float(w[0])
            out[0] = x
            samples, x = _kernels.ou_chunk(w[1:], a, b, x)
            out[1:m] = samples
        else:
            samples, x = _kernels.ou_chunk(w, a, b, x)
            out[pos:pos + m] = samples
        pos += m
    return SamplePath(dt=dt, samples=out,
                      seed=seed if isinstance(seed, int) else None,
                      origin="ou")


def synthesize_from_psd(psd, n: int, dt: float, *,
                        seed=None,
                        rng: np.random.Generator | None = None) -> SamplePath:
    """Random-phase realization of a one-sided PSD via inverse FFT.

    ``psd`` is a vectorized callable mapping frequency in Hz (1-D array) to
    V^2/Hz.  Bin amplitudes are n sqrt(S_j df / 2) with uniform random
    phases; the DC and Nyquist bins are zeroed, so the path has exactly zero
    mean.  Two coverage checks reject grids that cannot carry the spectrum:
    the PSD must be resolved (midpoint refinement changes the band power by
    < 1%) and must have decayed at the Nyquist edge (< 1% of peak).
    """
    if n < 16:
        raise ValueError(f"need n >= 16 samples, got {n}")
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    freqs = np.fft.rfftfreq(n, dt)
    df = freqs[1]
    s_vals = np.asarray(psd(freqs[1:]), dtype=float)
    if s_vals.shape != freqs[1:].shape:
        raise ValueError("psd callable must map a 1-D frequency array to an "
                         "equal-length array")
    if np.any(s_vals < 0) or not np.all(np.isfinite(s_vals)):
        raise ValueError("psd must be finite and non-negative on the grid")
    peak = s_vals.max()
    if peak == 0.0:
        raise ValueError("psd is identically zero on the grid")
    if s_vals[-1] > 0.01 * peak:
        raise ValueError(
            f"psd at the Nyquist edge {freqs[-1]:.3e} Hz is "
            f"{s_vals[-1] / peak:.2%} of its peak; decrease dt")
    mid = np.asarray(psd(freqs[1:] - 0.5 * df), dtype=float)
    power = s_vals.sum() * df
    refined = 0.5 * (s_vals.sum() + mid.sum()) * df
    if abs(refined - power) > 0.01 * power:
        raise ValueError(
            f"frequency resolution {df:.3e} Hz does not resolve the psd "
            f"(midpoint refinement shifts band power by "
            f"{abs(refined - power) / power:.2%}); increase n*dt")

    gen = _resolve_rng(seed, rng)
    phases = gen.uniform(0.0, 2.0 * math.pi, len(s_vals))
    spec = np.zeros(len(freqs), dtype=complex)
    spec[1:] = n * np.sqrt(s_vals * df / 2.0) * np.exp(1j * phases)
    if n % 2 == 0:
        spec[-1] = 0.0
    out = np.fft.irfft(spec, n=n)
    return SamplePath(dt=dt, samples=out,
                      seed=seed if isinstance(seed, int) else None,
                      origin="psd")
