"""Operating-point sweeps with deterministic, reproducible CSV emission.

A sweep evaluates the pixel model over a grid of photocurrents, bias
currents, event thresholds and band edges.  ``rms`` sweeps are purely
analytic (frequency-domain integrals); ``event`` sweeps synthesize one
noise path per grid point and count events twice over the same samples --
once without the leak ramp (pure noise rate) and once with it (total
rate) -- so the two rates are directly comparable.

Reproducibility contract: every output byte is a function of the parsed
configuration and the master seed alone.  Each grid point derives its own
seed from the master seed and the point's parameter values (not its grid
position), so adding grid points never reseeds existing ones.  Worker
thread count affects scheduling only, never results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from . import _kernels
from .events import LeakModel, leak_slope
from .pixel import (
    PixelParams,
    natural_params,
    output_noise_psd,
    rms_noise,
    shot_noise_fraction,
    system_matrices,
)
from .synth import MAX_DT_CYCLES, _psd_factor, discretize

__all__ = [
    "SweepSpec",
    "SweepRow",
    "PointError",
    "parse_config",
    "config_echo",
    "run_sweep",
    "knee_current",
    "sweep_dt",
    "psd_grid",
    "write_rms_csv",
    "write_event_csv",
    "RMS_HEADER",
    "EVENT_HEADER",
]

RMS_HEADER = "i_photo_a,i_pr_a,f_min_hz,v_rms_v,f_n_hz,q_factor,shot_fraction"
EVENT_HEADER = ("i_photo_a,i_pr_a,theta,noise_rate_hz,leak_rate_hz,"
                "total_rate_hz,seed")

STREAM_CHUNK = 1 << 20
MIN_DT_RULE = 20.0
AUTO_SLOW_CYCLES = 1e4
AUTO_MIN_DURATION = 10.0


@dataclass(frozen=True)
class SweepSpec:
    """Validated sweep configuration with documented defaults.

    ``i_photo_values`` overrides the log grid spanned by ``i_photo_min`` /
    ``i_photo_max`` / ``i_photo_per_decade`` when non-empty.  ``duration``
    of ``None`` means automatic: max(10^4 cycles of the slowest pole,
    10 s) per grid point.  ``point_*`` keys select the single operating
    point used by the ``psd`` and ``synth`` subcommands.
    """

    # sweep axes
    i_photo_min: float = 1e-14
    i_photo_max: float = 1e-8
    i_photo_per_decade: int = 10
    i_photo_values: tuple[float, ...] = ()
    i_pr_values: tuple[float, ...] = (1e-9, 3.1622776601683795e-09, 1e-8)
    theta_values: tuple[float, ...] = (0.2,)
    f_min_values: tuple[float, ...] = (0.0, 1.0)
    # run control
    duration: float | None = None
    dt_rule: float = 20.0
    master_seed: int = 0
    threads: int = 1
    # pixel parameters
    i_dark: float = 1e-14
    c_in: float = 1e-13
    c_out: float = 1e-13
    amp_gain: float = 100.0
    # event generation
    t_refractory: float = 0.0
    max_events_per_step: int = 10
    i_leak_dark: float = 7e-17
    eta_parasitic: float = 1e-7
    c_amp_in: float = 1e-13
    # single-point outputs (psd, synth)
    point_i_photo: float = 1e-12
    point_i_pr: float = 1e-9
    psd_f_min: float = 0.1
    psd_f_max: float = 1e6
    psd_points: int = 256
    synth_duration: float = 1.0
    # normalized noise-rate curve (fig7)
    fig7_f_3db: float = 100.0
    fig7_r_values: tuple[float, ...] = tuple(
        0.5 + 0.25 * i for i in range(19))
    fig7_duration_cycles: float = 1e5
    fig7_dt_cycles: float = 5e-4

    def __post_init__(self) -> None:
        def positive(name):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")

        def positive_list(name):
            vals = getattr(self, name)
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ValueError(f"{name} entries must be positive: {vals}")

        for name in ("i_photo_min", "i_photo_max", "c_in", "c_out",
                     "amp_gain", "c_amp_in", "point_i_photo", "point_i_pr",
                     "psd_f_min", "psd_f_max", "synth_duration",
                     "fig7_f_3db", "fig7_duration_cycles", "fig7_dt_cycles"):
            positive(name)
        for name in ("i_pr_values", "theta_values", "fig7_r_values"):
            positive_list(name)
        if not self.f_min_values:
            raise ValueError("f_min_values must be non-empty")
        if any(v < 0 or not math.isfinite(v) for v in self.f_min_values):
            raise ValueError(
                f"f_min_values entries must be >= 0: {self.f_min_values}")
        if any(v <= 0 or not math.isfinite(v) for v in self.i_photo_values):
            raise ValueError(
                f"i_photo_values entries must be positive: "
                f"{self.i_photo_values}")
        if self.i_photo_min >= self.i_photo_max:
            raise ValueError("i_photo_min must be below i_photo_max")
        if self.i_photo_per_decade < 1:
            raise ValueError("i_photo_per_decade must be >= 1")
        if self.dt_rule < MIN_DT_RULE:
            raise ValueError(
                f"dt_rule must be >= {MIN_DT_RULE:g}, got {self.dt_rule}")
        if self.duration is not None and not (
                self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive or auto, "
                             f"got {self.duration}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.i_dark < 0 or self.i_leak_dark < 0 or self.eta_parasitic < 0:
            raise ValueError(
                "i_dark, i_leak_dark and eta_parasitic must be >= 0")
        if self.t_refractory < 0:
            raise ValueError("t_refractory must be >= 0")
        if self.max_events_per_step < 1:
            raise ValueError("max_events_per_step must be >= 1")
        if self.psd_points < 2:
            raise ValueError("psd_points must be >= 2")
        if self.psd_f_min >= self.psd_f_max:
            raise ValueError("psd_f_min must be below psd_f_max")
        if self.fig7_dt_cycles > 0.02:
            raise ValueError(
                f"fig7_dt_cycles must be <= 0.02, got {self.fig7_dt_cycles}")

    @property
    def i_photo_grid(self) -> np.ndarray:
        """Photocurrent grid: explicit values, or log-spaced span."""
        if self.i_photo_values:
            return np.asarray(self.i_photo_values, dtype=float)
        decades = math.log10(self.i_photo_max / self.i_photo_min)
        n = int(round(decades * self.i_photo_per_decade)) + 1
        return np.geomspace(self.i_photo_min, self.i_photo_max, max(n, 2))


@dataclass(frozen=True)
class SweepRow:
    """One evaluated grid point; analytic and simulated fields.

    Event-rate fields are None for analytic (rms) sweeps and vice versa.
    """

    i_photo: float
    i_pr: float
    theta: float | None = None
    f_min: float | None = None
    v_rms_full: float | None = None
    v_rms_truncated: float | None = None
    f_n: float | None = None
    q_factor: float | None = None
    shot_fraction: float | None = None
    noise_event_rate: float | None = None
    leak_event_rate: float | None = None
    total_event_rate: float | None = None
    seed_used: int | None = None

    def __post_init__(self) -> None:
        if (self.v_rms_full is not None and self.v_rms_truncated is not None
                and self.v_rms_truncated > self.v_rms_full):
            raise ValueError("v_rms_truncated must not exceed v_rms_full")
        for name in ("noise_event_rate", "leak_event_rate",
                     "total_event_rate"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")


@dataclass(frozen=True)
class PointError:
    """A grid point whose evaluation failed; the sweep continues."""

    i_photo: float
    i_pr: float
    theta: float | None
    message: str


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    return int(text, 0)


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [t.strip() for t in text.split(",")]
    items = [t for t in items if t]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _parse_duration(text: str) -> float | None:
    if text.strip().lower() == "auto":
        return None
    return float(text)


_PARSERS: dict[str, Callable[[str], object]] = {
    "i_photo_min": _parse_float,
    "i_photo_max": _parse_float,
    "i_photo_per_decade": _parse_int,
    "i_photo_values": _parse_float_list,
    "i_pr_values": _parse_float_list,
    "theta_values": _parse_float_list,
    "f_min_values": _parse_float_list,
    "duration": _parse_duration,
    "dt_rule": _parse_float,
    "master_seed": _parse_int,
    "threads": _parse_int,
    "i_dark": _parse_float,
    "c_in": _parse_float,
    "c_out": _parse_float,
    "amp_gain": _parse_float,
    "t_refractory": _parse_float,
    "max_events_per_step": _parse_int,
    "i_leak_dark": _parse_float,
    "eta_parasitic": _parse_float,
    "c_amp_in": _parse_float,
    "point_i_photo": _parse_float,
    "point_i_pr": _parse_float,
    "psd_f_min": _parse_float,
    "psd_f_max": _parse_float,
    "psd_points": _parse_int,
    "synth_duration": _parse_float,
    "fig7_f_3db": _parse_float,
    "fig7_r_values": _parse_float_list,
    "fig7_duration_cycles": _parse_float,
    "fig7_dt_cycles": _parse_float,
}

assert set(_PARSERS) == {f.name for f in fields(SweepSpec)}


def parse_config(text: str, source: str = "config") -> SweepSpec:
    """Parse flat ``key = value`` text into a validated SweepSpec.

    ``#`` starts a comment; lists are comma-separated; unknown or duplicate
    keys are rejected with the offending line number; invariant violations
    are reported naming the key.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(
                f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ValueError(
                f"{source}:{lineno}: key {key!r}: "
                f"cannot parse {value!r} ({exc})") from exc
    try:
        return SweepSpec(**values)
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from exc


def config_echo(spec: SweepSpec) -> list[str]:
    """Effective configuration as sorted ``key = value`` lines.

    ``threads`` is omitted: it affects scheduling, never output values, and
    the echo must be byte-identical at any worker count.
    """
    lines = []
    for f in sorted(fields(SweepSpec), key=lambda f: f.name):
        if f.name == "threads":
            continue
        v = getattr(spec, f.name)
        if v == ():  # unset optional list (defers to the log grid)
            continue
        if f.name == "duration" and v is None:
            text = "auto"
        elif isinstance(v, tuple):
            text = ", ".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{f.name} = {text}")
    return lines


def _pixel_params(spec: SweepSpec, i_photo: float,
                  i_pr: float) -> PixelParams:
    return PixelParams(i_photo=i_photo, i_pr=i_pr, i_dark=spec.i_dark,
                       c_in=spec.c_in, c_out=spec.c_out,
                       amp_gain=spec.amp_gain)


def _point_seed(master_seed: int, *values: float):
    """Generator and printable seed keyed by the point's parameter values."""
    bits = np.asarray(values, dtype=np.float64).view(np.uint64)
    seq = np.random.SeedSequence([int(master_seed) & (2**63 - 1),
                                  *(int(b) for b in bits)])
    seed_used = int(seq.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(seq), seed_used


def sweep_dt(spec: SweepSpec, params: PixelParams) -> float:
    """Simulation step: dt_rule samples per -3 dB period, capped so the
    natural frequency stays oversampled."""
    nat = natural_params(params)
    return min(1.0 / (spec.dt_rule * nat.f_3db), MAX_DT_CYCLES / nat.f_n)


def _auto_duration(params: PixelParams) -> float:
    a, _ = system_matrices(params)
    f_slow = float(np.min(np.abs(np.linalg.eigvals(a)))) / (2.0 * math.pi)
    return max(AUTO_SLOW_CYCLES / f_slow, AUTO_MIN_DURATION)


def _rms_point(spec: SweepSpec, i_photo: float,
               i_pr: float) -> list[SweepRow]:
    params = _pixel_params(spec, i_photo, i_pr)
    nat = natural_params(params)
    full = rms_noise(params, 0.0, math.inf)
    rows = []
    for f_min in spec.f_min_values:
        if f_min == 0.0:
            v = full
        else:
            v = min(rms_noise(params, f_min, math.inf), full)
        rows.append(SweepRow(
            i_photo=i_photo, i_pr=i_pr, f_min=f_min,
            v_rms_full=full, v_rms_truncated=v,
            f_n=nat.f_n, q_factor=nat.q_factor,
            shot_fraction=shot_noise_fraction(params, f_min, math.inf)))
    return rows


def _event_point(spec: SweepSpec, i_photo: float, i_pr: float,
                 theta: float) -> list[SweepRow]:
    params = _pixel_params(spec, i_photo, i_pr)
    dt = sweep_dt(spec, params)
    duration = spec.duration
    if duration is None:
        duration = _auto_duration(params)
    n = int(round(duration / dt))
    if n < 2:
        raise ValueError(
            f"duration {duration:.3e} s spans fewer than two steps "
            f"of dt {dt:.3e} s")
    duration_eff = n * dt

    disc = discretize(params, dt)
    l_stat = _psd_factor(disc.stationary_cov)
    l_q = _psd_factor(disc.noise_cov)
    rng, seed_used = _point_seed(spec.master_seed, i_photo, i_pr, theta)
    scale = params.constants.kappa / params.constants.u_t
    leak = LeakModel(i_leak_dark=spec.i_leak_dark,
                     eta_parasitic=spec.eta_parasitic,
                     c_amp_in=spec.c_amp_in)
    slope = leak_slope(leak, i_photo=i_photo, constants=params.constants)
    cap = spec.max_events_per_step
    t_refr = spec.t_refractory

    # two detector states over the same samples: noise-only and with-ramp
    x = l_stat @ rng.standard_normal(2)
    first = x[1] * scale
    ref_n, last_n, in_n = first, _kernels.NO_EVENT, False
    ref_t, last_t, in_t = first, _kernels.NO_EVENT, False
    noise_count = 0
    total_count = 0
    pos = 1
    while pos < n:
        m = min(STREAM_CHUNK, n - pos)
        w = rng.standard_normal((m, 2))
        samples, x = _kernels.linear2_chunk(w, disc.phi, l_q, x)
        contrast = samples * scale
        _, _, mult, ref_n, last_n, in_n = _kernels.scan_chunk(
            contrast, dt, pos, theta, theta, t_refr, cap,
            ref_n, last_n, in_n)
        noise_count += int(mult.sum())
        composite = contrast + slope * (dt * np.arange(pos, pos + m))
        _, _, mult, ref_t, last_t, in_t = _kernels.scan_chunk(
            composite, dt, pos, theta, theta, t_refr, cap,
            ref_t, last_t, in_t)
        total_count += int(mult.sum())
        pos += m

    return [SweepRow(
        i_photo=i_photo, i_pr=i_pr, theta=theta,
        noise_event_rate=noise_count / duration_eff,
        leak_event_rate=slope / theta,
        total_event_rate=total_count / duration_eff,
        seed_used=seed_used)]


def run_sweep(spec: SweepSpec,
              mode: str) -> tuple[list[SweepRow], list[PointError]]:
    """Evaluate every grid point; failures are collected, not fatal.

    ``mode`` is ``"rms"`` (analytic: grid over i_photo x i_pr, rows per
    f_min) or ``"event"`` (simulated: grid over i_photo x i_pr x theta).
    Rows are returned in grid order regardless of thread count.
    """
    if mode == "rms":
        points = [(ip, ipr, None)
                  for ip in spec.i_photo_grid for ipr in spec.i_pr_values]
    elif mode == "event":
        points = [(ip, ipr, th) for ip in spec.i_photo_grid
                  for ipr in spec.i_pr_values for th in spec.theta_values]
    else:
        raise ValueError(f"mode must be 'rms' or 'event', got {mode!r}")

    def evaluate(point):
        ip, ipr, th = point
        try:
            if mode == "rms":
                return _rms_point(spec, ip, ipr), None
            return _event_point(spec, ip, ipr, th), None
        except Exception as exc:
            return [], PointError(i_photo=ip, i_pr=ipr, theta=th,
                                  message=f"{type(exc).__name__}: {exc}")

    if spec.threads == 1:
        results = [evaluate(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            results = list(pool.map(evaluate, points))

    rows: list[SweepRow] = []
    errors: list[PointError] = []
    for point_rows, err in results:
        rows.extend(point_rows)
        if err is not None:
            errors.append(err)
    return rows, errors


def knee_current(i_photo, v_rms) -> float:
    """Photocurrent where the RMS noise crosses the geometric mean of its
    dim plateau and bright floor, by log-log interpolation.

    The grid must descend from plateau to floor; a grid that does not
    bracket the crossing is rejected.
    """
    i_photo = np.asarray(i_photo, dtype=float)
    v_rms = np.asarray(v_rms, dtype=float)
    if i_photo.shape != v_rms.shape or i_photo.ndim != 1:
        raise ValueError("i_photo and v_rms must be equal-length 1-D")
    if len(i_photo) < 3:
        raise ValueError("need at least 3 points to locate a knee")
    if np.any(np.diff(i_photo) <= 0):
        raise ValueError("i_photo must be strictly increasing")
    if np.any(v_rms <= 0):
        raise ValueError("v_rms must be positive")
    target = math.sqrt(v_rms[0] * v_rms[-1])
    below = np.nonzero(v_rms < target)[0]
    if len(below) == 0 or below[0] == 0:
        raise ValueError("grid does not bracket the plateau-floor knee")
    i = int(below[0])
    y0, y1 = math.log(v_rms[i - 1]), math.log(v_rms[i])
    x0, x1 = math.log(i_photo[i - 1]), math.log(i_photo[i])
    frac = (y0 - math.log(target)) / (y0 - y1)
    return math.exp(x0 + frac * (x1 - x0))


def psd_grid(spec: SweepSpec):
    """Analytic output-noise PSD at the configured single operating point.

    Returns (freqs, psd_total) on a log-spaced grid; this is the model
    curve the Welch estimator converges to on synthesized paths.
    """
    params = _pixel_params(spec, spec.point_i_photo, spec.point_i_pr)
    freqs = np.geomspace(spec.psd_f_min, spec.psd_f_max, spec.psd_points)
    result = output_noise_psd(params, freqs)
    return freqs, result.psd_total


def _comment_block(spec: SweepSpec, errors=()) -> list[str]:
    lines = list(config_echo(spec))
    for e in errors:
        theta = "" if e.theta is None else f" theta={float(e.theta)!r}"
        lines.append(f"point_error: i_photo={float(e.i_photo)!r} "
                     f"i_pr={float(e.i_pr)!r}{theta}: {e.message}")
    return lines


def write_rms_csv(spec: SweepSpec, rows, errors, path) -> None:
    """``rms-sweep`` table; v_rms_v is the band-limited value per f_min."""
    with open(path, "w") as f:
        for line in _comment_block(spec, errors):
            f.write(f"# {line}\n")
        f.write(RMS_HEADER + "\n")
        for r in rows:
            vals = (r.i_photo, r.i_pr, r.f_min, r.v_rms_truncated,
                    r.f_n, r.q_factor, r.shot_fraction)
            f.write(",".join(repr(float(v)) for v in vals) + "\n")


def write_event_csv(spec: SweepSpec, rows, errors, path) -> None:
    """``event-sweep`` table; leak_rate_hz is the analytic ramp rate."""
    with open(path, "w") as f:
        for line in _comment_block(spec, errors):
            f.write(f"# {line}\n")
        f.write(EVENT_HEADER + "\n")
        for r in rows:
            vals = (r.i_photo, r.i_pr, r.theta, r.noise_event_rate,
                    r.leak_event_rate, r.total_event_rate)
            f.write(",".join(repr(float(v)) for v in vals)
                    + f",{r.seed_used}\n")
