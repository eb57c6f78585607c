"""Statistical estimators and the normalized noise-event-rate pipeline.

``welch_psd`` / ``rms`` / ``autocorr`` are thin, contract-checked wrappers
over standard estimators.  ``fig7_curve`` produces the normalized
noise-event-rate curve: events from a unit-variance Ornstein-Uhlenbeck
contrast path at threshold ``theta = r`` (both polarities counted), with the
rate expressed per corner-frequency cycle so the result depends only on the
dimensionless settings (r grid, samples per cycle, cycles of duration,
seed).  ``tail_fit`` fits the Gaussian tail ``ln(rate) = a - b r**2`` of
that curve, and ``dt_convergence`` measures the sampling bias by running
the detector over one common trajectory seen at two rates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch

from . import _kernels
from .synth import SamplePath, ou_decay

__all__ = [
    "PsdEstimate",
    "Fig7Point",
    "TailFit",
    "DtComparison",
    "welch_psd",
    "rms",
    "autocorr",
    "fig7_curve",
    "tail_fit",
    "dt_convergence",
    "write_psd_csv",
    "write_fig7_csv",
]

STREAM_CHUNK = 1 << 22
MAX_DT_CYCLES_OU = 0.02
EVENT_CAP = 10


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided Welch PSD in the squared units of the input per Hz."""

    freqs: np.ndarray
    psd: np.ndarray
    segment_length: int
    overlap_fraction: float
    window: str

    def band_power(self) -> float:
        """Riemann sum of the PSD; compare to the input variance."""
        return float(np.sum(self.psd) * (self.freqs[1] - self.freqs[0]))


@dataclass(frozen=True)
class Fig7Point:
    """One point of the normalized noise-rate curve."""

    r: float
    rate_norm: float
    stderr: float
    n_events: int

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.rate_norm < 0 or self.stderr < 0 or self.n_events < 0:
            raise ValueError("rate_norm, stderr and n_events must be >= 0")


@dataclass(frozen=True)
class TailFit:
    """Weighted fit of ln(rate_norm) = intercept - slope * r**2."""

    intercept: float
    slope: float
    goodness: float
    n_used: int


@dataclass(frozen=True)
class DtComparison:
    """Event rates for one r over the same trajectory at dt and dt/2."""

    r: float
    rate_norm_coarse: float
    rate_norm_fine: float
    n_events_coarse: int
    n_events_fine: int

    @property
    def rel_change(self) -> float:
        if self.rate_norm_coarse == 0.0 and self.rate_norm_fine == 0.0:
            return 0.0
        ref = max(self.rate_norm_coarse, self.rate_norm_fine)
        return abs(self.rate_norm_fine - self.rate_norm_coarse) / ref


def welch_psd(path: SamplePath, segment_length: int = 4096,
              overlap_fraction: float = 0.5,
              window: str = "hann") -> PsdEstimate:
    """Averaged modified periodograms, one-sided, mean removed per segment."""
    n = len(path.samples)
    if segment_length < 8:
        raise ValueError(f"segment_length must be >= 8, got {segment_length}")
    if segment_length > n:
        raise ValueError(
            f"segment_length {segment_length} exceeds path length {n}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError(
            f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    freqs, psd = welch(path.samples, fs=1.0 / path.dt, window=window,
                       nperseg=segment_length,
                       noverlap=int(segment_length * overlap_fraction),
                       detrend="constant", return_onesided=True)
    return PsdEstimate(freqs=freqs, psd=psd, segment_length=segment_length,
                       overlap_fraction=overlap_fraction, window=window)


def rms(path: SamplePath) -> float:
    """Sample standard deviation about the mean (ddof = 1)."""
    if len(path.samples) < 2:
        raise ValueError("rms needs at least 2 samples")
    return float(np.std(path.samples, ddof=1))


def autocorr(path: SamplePath, lag: int) -> float:
    """Normalized autocovariance at an integer sample lag."""
    s = path.samples
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    if len(s) < lag + 2:
        raise ValueError(f"need at least lag+2 = {lag + 2} samples, "
                         f"got {len(s)}")
    x = s - s.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ValueError("autocorr undefined for a constant path")
    return float(np.dot(x[:len(x) - lag], x[lag:]) / denom)


def _count_point_events(r: float, n: int, dt_cycles: float,
                        rng: np.random.Generator) -> int:
    """Total ON+OFF events of a unit-sigma OU path at threshold r."""
    a = ou_decay(1.0, dt_cycles)  # dimensionless: f_3db=1, dt in cycles
    b = math.sqrt(1.0 - a * a)
    x = 0.0
    ref = 0.0
    started = False
    total = 0
    remaining = n
    while remaining > 0:
        m = min(STREAM_CHUNK, remaining)
        w = rng.standard_normal(m)
        c_on, c_off, x, ref, started = _kernels.ou_events_chunk(
            w, a, b, r, EVENT_CAP, x, ref, started)
        total += c_on + c_off
        remaining -= m
    return total


def fig7_curve(f_3db: float, r_values, duration_cycles: float = 1e5,
               dt_cycles: float = 5e-4, seed: int = 0,
               threads: int = 1) -> list[Fig7Point]:
    """Normalized noise-event rate versus normalized threshold.

    For each r: a unit-variance OU contrast path with corner ``f_3db`` is
    scanned at ``theta_on = theta_off = r`` (no refractory, no leak); the
    ON+OFF event rate divided by ``f_3db`` is returned with a Poisson-style
    standard error.  Each r gets its own seed derived from ``(seed, index)``
    so the point set is independent of evaluation order and thread count.
    The result is exactly invariant in ``f_3db``: only the dimensionless
    settings enter the computation.
    """
    if not (f_3db > 0 and math.isfinite(f_3db)):
        raise ValueError(f"f_3db must be positive, got {f_3db}")
    r_values = [float(r) for r in r_values]
    if not r_values or any(r <= 0 for r in r_values):
        raise ValueError("r_values must be positive and non-empty")
    if dt_cycles > MAX_DT_CYCLES_OU:
        raise ValueError(
            f"dt_cycles = {dt_cycles} undersamples the corner; need "
            f"<= {MAX_DT_CYCLES_OU}")
    if duration_cycles <= 0:
        raise ValueError("duration_cycles must be positive")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    n = int(round(duration_cycles / dt_cycles))
    if n < 1:
        raise ValueError("duration_cycles shorter than one step")

    def run(i_r):
        i, r = i_r
        rng = np.random.default_rng((seed, i))
        count = _count_point_events(r, n, dt_cycles, rng)
        rate_norm = count / duration_cycles
        stderr = math.sqrt(count) / duration_cycles
        return Fig7Point(r=r, rate_norm=rate_norm, stderr=stderr,
                         n_events=count)

    jobs = list(enumerate(r_values))
    if threads == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


def tail_fit(points, r_min: float) -> TailFit:
    """Weighted least squares of ln(rate_norm) against r**2.

    Only points with r >= r_min, a positive rate and at least 100 events
    enter the fit (sparser points carry no usable log-rate); weights are
    the event counts, the inverse variance of ln(rate) under Poisson
    counting.  Returns the decay coefficient as a positive ``slope``:
    rate_norm ~ exp(intercept - slope * r**2).
    """
    used = [p for p in points
            if p.r >= r_min and p.rate_norm > 0.0 and p.n_events >= 100]
    if len(used) < 4:
        raise ValueError(
            f"need >= 4 points with r >= {r_min} and >= 100 events, "
            f"have {len(used)}")
    x = np.array([p.r ** 2 for p in used])
    y = np.array([math.log(p.rate_norm) for p in used])
    w = np.array([float(p.n_events) for p in used])
    design = np.column_stack([np.ones_like(x), x])
    wsqrt = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * wsqrt[:, None], y * wsqrt,
                               rcond=None)
    resid = y - design @ coef
    ybar = np.average(y, weights=w)
    ss_res = float(np.sum(w * resid ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    goodness = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return TailFit(intercept=float(coef[0]), slope=float(-coef[1]),
                   goodness=goodness, n_used=len(used))


def dt_convergence(r_values, duration_cycles: float = 1e6,
                   dt_cycles: float = 5e-4, seed: int = 0) -> list[DtComparison]:
    """Sampling-rate sensitivity of the noise-event rate, variance-reduced.

    One OU trajectory is generated at dt/2; the dt view is its every-other
    sample (exact for the AR(1) recursion, which composes over steps).  Both
    views run the same detector, so the rate difference isolates the
    discretization effect instead of comparing two independent Monte Carlo
    runs.  Streams in fixed chunks; memory is flat in duration.
    """
    r_values = [float(r) for r in r_values]
    if not r_values or any(r <= 0 for r in r_values):
        raise ValueError("r_values must be positive and non-empty")
    if dt_cycles > MAX_DT_CYCLES_OU:
        raise ValueError(
            f"dt_cycles = {dt_cycles} undersamples the corner; need "
            f"<= {MAX_DT_CYCLES_OU}")
    half = dt_cycles / 2.0
    n_fine = int(round(duration_cycles / half))
    if n_fine < 2:
        raise ValueError("duration_cycles shorter than one coarse step")
    a = ou_decay(1.0, half)
    b = math.sqrt(1.0 - a * a)
    out = []
    for i, r in enumerate(r_values):
        rng = np.random.default_rng((seed, i))
        x = 0.0
        started = False
        ref_f = 0.0
        last_f = _kernels.NO_EVENT
        fine_on_off = 0
        ref_c = 0.0
        last_c = _kernels.NO_EVENT
        coarse_on_off = 0
        pos = 0
        while pos < n_fine:
            m = min(STREAM_CHUNK, n_fine - pos)
            if m % 2 and pos + m < n_fine:
                m -= 1  # keep chunk boundaries on coarse samples
            w = rng.standard_normal(m)
            if not started:
                x = float(w[0])
                samples, x = _kernels.ou_chunk(w[1:], a, b, x)
                samples = np.concatenate(([w[0]], samples))
                started = True
                ref_f = samples[0]
                ref_c = samples[0]
                scan_f = samples[1:]
                scan_c = samples[2::2]
                base_f, base_c = 1, 1
            else:
                # pos stays even (chunks are trimmed to even length), so
                # the chunk starts on a coarse sample.
                samples, x = _kernels.ou_chunk(w, a, b, x)
                scan_f = samples
                scan_c = samples[0::2]
                base_f = pos
                base_c = pos // 2
            _, _, mult, ref_f, last_f, _ = _kernels.scan_chunk(
                scan_f, 1.0, base_f, r, r, 0.0, EVENT_CAP,
                ref_f, last_f, False)
            fine_on_off += int(mult.sum())
            _, _, mult, ref_c, last_c, _ = _kernels.scan_chunk(
                scan_c, 1.0, base_c, r, r, 0.0, EVENT_CAP,
                ref_c, last_c, False)
            coarse_on_off += int(mult.sum())
            pos += m
        out.append(DtComparison(
            r=r,
            rate_norm_coarse=coarse_on_off / duration_cycles,
            rate_norm_fine=fine_on_off / duration_cycles,
            n_events_coarse=coarse_on_off,
            n_events_fine=fine_on_off))
    return out


def write_psd_csv(est: PsdEstimate, path, header_comments=()) -> None:
    """Write ``f_hz,psd`` rows, preceded by ``#`` provenance comments."""
    with open(path, "w") as f:
        for line in header_comments:
            f.write(f"# {line}\n")
        f.write("f_hz,psd\n")
        for fr, p in zip(est.freqs, est.psd):
            f.write(f"{float(fr)!r},{float(p)!r}\n")


def write_fig7_csv(points, path, header_comments=()) -> None:
    """Write ``r,rate_norm,stderr,n_events`` rows with ``#`` comments."""
    with open(path, "w") as f:
        for line in header_comments:
            f.write(f"# {line}\n")
        f.write("r,rate_norm,stderr,n_events\n")
        for p in points:
            f.write(f"{p.r!r},{p.rate_norm!r},{p.stderr!r},{p.n_events}\n")
