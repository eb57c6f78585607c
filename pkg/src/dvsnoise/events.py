"""Event generation: reference-reset threshold detector with leak and
refractory behaviour.

The detector walks a sampled contrast path and emits an event whenever the
sample moves at least one threshold away from the stored reference, which
then resets to that sample (ON for positive excursions of ``theta_on``, OFF
for negative ones of ``theta_off``).  A move spanning several thresholds in
one step yields that many same-timestamp events, capped by
``max_events_per_step``.  An optional refractory time blanks the detector
after each event; at its expiry the reference re-arms to the current sample
without comparing.

A junction-leakage ramp can be superimposed: leak current discharges the
comparator input at a constant contrast slope, producing the familiar
background of ON events in a silent scene.  In contrast units the slope is
``(i_leak_dark + eta_parasitic * i_photo) * kappa / (c_amp_in * u_t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .pixel import PhysicalConstants
from .synth import SamplePath

__all__ = [
    "LeakModel",
    "EventGenConfig",
    "Event",
    "EventStream",
    "leak_slope",
    "generate_events",
    "event_rate",
    "write_event_csv",
]

_SCAN_CHUNK = 1 << 20


@dataclass(frozen=True)
class LeakModel:
    """Comparator junction leakage.  The default is leak-free.

    ``i_leak_dark`` is the constant leakage current (A), ``eta_parasitic``
    the fraction of the photocurrent coupling in parasitically, and
    ``c_amp_in`` the comparator input capacitance (F) the leak discharges.
    """

    i_leak_dark: float = 0.0
    eta_parasitic: float = 0.0
    c_amp_in: float = 1e-13

    def __post_init__(self) -> None:
        if self.i_leak_dark < 0 or not math.isfinite(self.i_leak_dark):
            raise ValueError(f"i_leak_dark must be >= 0, got {self.i_leak_dark}")
        if self.eta_parasitic < 0 or not math.isfinite(self.eta_parasitic):
            raise ValueError(
                f"eta_parasitic must be >= 0, got {self.eta_parasitic}")
        if not (self.c_amp_in > 0 and math.isfinite(self.c_amp_in)):
            raise ValueError(f"c_amp_in must be positive, got {self.c_amp_in}")


def leak_slope(leak: LeakModel, i_photo: float = 0.0,
               constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Leak ramp rate in contrast units per second (always >= 0)."""
    if i_photo < 0 or not math.isfinite(i_photo):
        raise ValueError(f"i_photo must be >= 0, got {i_photo}")
    i_leak = leak.i_leak_dark + leak.eta_parasitic * i_photo
    return i_leak * constants.kappa / (leak.c_amp_in * constants.u_t)


@dataclass(frozen=True)
class EventGenConfig:
    """Detector settings.  Thresholds are in contrast units."""

    theta_on: float
    theta_off: float
    t_refractory: float = 0.0
    max_events_per_step: int = 10
    leak: LeakModel = field(default_factory=LeakModel)

    def __post_init__(self) -> None:
        if not (self.theta_on > 0 and math.isfinite(self.theta_on)):
            raise ValueError(f"theta_on must be positive, got {self.theta_on}")
        if not (self.theta_off > 0 and math.isfinite(self.theta_off)):
            raise ValueError(
                f"theta_off must be positive, got {self.theta_off}")
        if self.t_refractory < 0 or not math.isfinite(self.t_refractory):
            raise ValueError(
                f"t_refractory must be >= 0, got {self.t_refractory}")
        if self.max_events_per_step < 1:
            raise ValueError("max_events_per_step must be >= 1")


class Event(NamedTuple):
    t: float
    polarity: int


@dataclass(frozen=True)
class EventStream:
    """Timestamps (s) and polarities (+1/-1) of the emitted events.

    Same-timestamp multiples appear as repeated entries, so ``len(times)``
    counts events, not trigger instants.
    """

    times: np.ndarray
    polarities: np.ndarray
    duration: float
    config: EventGenConfig

    def __post_init__(self) -> None:
        if len(self.times) != len(self.polarities):
            raise ValueError("times and polarities must have equal length")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive, got {self.duration}")
        if len(self.times):
            if np.any(np.diff(self.times) < 0):
                raise ValueError("times must be non-decreasing")
            if self.times[0] < 0 or self.times[-1] > self.duration:
                raise ValueError("event times must lie within [0, duration]")
            pol = np.unique(self.polarities)
            if not np.all(np.isin(pol, [-1, 1])):
                raise ValueError(f"polarities must be +/-1, got {pol}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[Event]:
        return [Event(float(t), int(p))
                for t, p in zip(self.times, self.polarities)]


def generate_events(path: SamplePath, config: EventGenConfig,
                    extra_signal: np.ndarray | None = None, *,
                    i_photo: float = 0.0,
                    constants: PhysicalConstants = PhysicalConstants(),
                    ) -> EventStream:
    """Run the detector over a sampled path.

    The composite input is ``path.samples + leak ramp + extra_signal``; the
    first composite sample initializes the reference and is never itself an
    event.  ``extra_signal`` is an optional deterministic stimulus, sampled
    on the same grid and in the same contrast units as the path.
    ``i_photo`` only feeds the parasitic part of the leak ramp.
    """
    samples = path.samples
    n = len(samples)
    slope = leak_slope(config.leak, i_photo, constants)
    if extra_signal is not None:
        extra_signal = np.asarray(extra_signal, dtype=np.float64)
        if extra_signal.shape != samples.shape:
            raise ValueError(
                f"extra_signal shape {extra_signal.shape} does not match "
                f"path shape {samples.shape}")
    composite = samples
    if slope != 0.0:
        composite = composite + slope * path.times
    if extra_signal is not None:
        composite = composite + extra_signal

    ref = float(composite[0])
    last_idx = _kernels.NO_EVENT
    in_refr = False
    idx_parts, pol_parts, mult_parts = [], [], []
    pos = 1
    while pos < n:
        stop = min(pos + _SCAN_CHUNK, n)
        idx, pol, mult, ref, last_idx, in_refr = _kernels.scan_chunk(
            composite[pos:stop], path.dt, pos, config.theta_on,
            config.theta_off, config.t_refractory,
            config.max_events_per_step, ref, last_idx, in_refr)
        if len(idx):
            idx_parts.append(idx)
            pol_parts.append(pol)
            mult_parts.append(mult)
        pos = stop

    if idx_parts:
        idx = np.concatenate(idx_parts)
        pol = np.concatenate(pol_parts)
        mult = np.concatenate(mult_parts)
        times = np.repeat(idx, mult).astype(np.float64) * path.dt
        polarities = np.repeat(pol, mult)
    else:
        times = np.empty(0)
        polarities = np.empty(0, dtype=np.int8)
    return EventStream(times=times, polarities=polarities,
                       duration=path.duration, config=config)


def event_rate(stream: EventStream, polarity: int | None = None) -> float:
    """Mean event rate in Hz, optionally restricted to one polarity."""
    if polarity is None:
        count = len(stream)
    elif polarity in (-1, 1):
        count = int(np.count_nonzero(stream.polarities == polarity))
    else:
        raise ValueError(f"polarity must be -1, 1 or None, got {polarity}")
    return count / stream.duration


def write_event_csv(stream: EventStream, path, header_comments=()) -> None:
    """Write one event per line as ``t_us,polarity`` (microsecond ints)."""
    t_us = np.rint(stream.times * 1e6).astype(np.int64)
    with open(path, "w") as f:
        for line in header_comments:
            f.write(f"# {line}\n")
        f.write("t_us,polarity\n")
        for t, p in zip(t_us, stream.polarities):
            f.write(f"{t},{p}\n")
