"""Time-dependent control waveforms: linear sweeps and sweep-quench-sweep.

Times are in units of 2*pi/Omega and detunings in units of Omega, so a
sweep rate quoted in multiples of R0 = Omega^2/(2*pi) is numerically the
slope dDelta/dt in these reduced units.  Waveforms are piecewise affine in
Delta with constant Omega per segment and are right-continuous at jumps.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    delta_start: float  # Delta at t_start
    slope: float  # dDelta/dt over the segment
    omega: float = 1.0

    def delta_at(self, t: float) -> float:
        return self.delta_start + self.slope * (t - self.t_start)


@dataclass(frozen=True)
class Waveform:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("waveform needs at least one segment")
        t = segs[0].t_start
        for s in segs:
            if s.t_end <= s.t_start:
                raise ValueError("segments must have positive duration")
            if not math.isclose(s.t_start, t, rel_tol=0, abs_tol=1e-12):
                raise ValueError("segments must be contiguous")
            t = s.t_end
        object.__setattr__(self, "segments", segs)

    @property
    def total_duration(self) -> float:
        return self.segments[-1].t_end

    def sample(self, t: float) -> tuple[float, float]:
        """(omega, delta) at time t; the later segment wins at boundaries."""
        if t < 0 or t > self.total_duration:
            raise ValueError(f"t={t} outside [0, {self.total_duration}]")
        starts = [s.t_start for s in self.segments]
        k = bisect_right(starts, t) - 1
        s = self.segments[max(k, 0)]
        return s.omega, s.delta_at(t)

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "t_start": s.t_start,
                    "t_end": s.t_end,
                    "delta_start": s.delta_start,
                    "slope": s.slope,
                    "omega": s.omega,
                }
                for s in self.segments
            ]
        )


def waveform_from_json(text: str) -> Waveform:
    return Waveform(tuple(Segment(**d) for d in json.loads(text)))


def linear_sweep(delta_start: float, delta_end: float, rate: float, omega: float = 1.0) -> Waveform:
    """Single constant-rate sweep; duration (delta_end - delta_start) / rate."""
    if rate <= 0:
        raise ValueError("sweep rate must be positive")
    if delta_end <= delta_start:
        raise ValueError("sweep must increase the detuning")
    duration = (delta_end - delta_start) / rate
    return Waveform((Segment(0.0, duration, delta_start, rate, omega),))


def sqs(
    delta_start: float,
    delta_end: float,
    rate: float,
    delta_i: float,
    delta_q: float,
    t_q: float,
    omega: float = 1.0,
    resume_at: str = "sweep",
) -> Waveform:
    """Sweep-quench-sweep: hold delta_q for t_q once the ramp reaches delta_i.

    With ``resume_at="sweep"`` (default) the ramp resumes from delta_i, so
    the quench is a rectangular bump on top of the linear sweep;
    ``resume_at="quench"`` resumes from delta_q instead.  t_q = 0 returns
    the plain linear sweep.
    """
    if rate <= 0:
        raise ValueError("sweep rate must be positive")
    if not (delta_start < delta_i < delta_end):
        raise ValueError("delta_i must lie strictly inside the sweep range")
    if t_q < 0:
        raise ValueError("quench duration must be nonnegative")
    if resume_at not in ("sweep", "quench"):
        raise ValueError("resume_at must be 'sweep' or 'quench'")
    if t_q == 0.0:
        return linear_sweep(delta_start, delta_end, rate, omega)
    t1 = (delta_i - delta_start) / rate
    resume = delta_i if resume_at == "sweep" else delta_q
    t3 = t1 + t_q + (delta_end - resume) / rate
    return Waveform(
        (
            Segment(0.0, t1, delta_start, rate, omega),
            Segment(t1, t1 + t_q, delta_q, 0.0, omega),
            Segment(t1 + t_q, t3, resume, rate, omega),
        )
    )


def sample(waveform, t: float) -> tuple[float, float]:
    """(omega, delta) of any waveform-like evaluator at time t."""
    return waveform.sample(t)


class ResponseFiltered:
    """Waveform seen through the control electronics: a time shift plus an
    optional first-order low-pass on Delta.

    The filter response is evaluated in closed form segment by segment
    (piecewise-affine input driving y' = (Delta - y)/tau), so a step input
    approaches its target as 1 - exp(-t/tau).  tau = shift = 0 is the
    identity.  Times before the (shifted) start return the settled initial
    value.
    """

    def __init__(self, waveform: Waveform, tau: float = 0.0, shift: float = 0.0):
        if tau < 0 or shift < 0:
            raise ValueError("tau and shift must be nonnegative")
        self.base = waveform
        self.tau = tau
        self.shift = shift
        if tau > 0:
            # filter state at each segment start, marched in closed form
            y = waveform.segments[0].delta_start
            self._y_starts = []
            for s in waveform.segments:
                self._y_starts.append(y)
                dt = s.t_end - s.t_start
                y = self._segment_response(s, y, dt)

    def _segment_response(self, s: Segment, y0: float, dt: float) -> float:
        # y(t) for input d0 + m*(t - t0): particular solution plus decay
        d0, m, tau = s.delta_start, s.slope, self.tau
        return d0 + m * dt - m * tau + (y0 - d0 + m * tau) * math.exp(-dt / tau)

    @property
    def total_duration(self) -> float:
        return self.base.total_duration

    def sample(self, t: float) -> tuple[float, float]:
        if t < 0 or t > self.total_duration:
            raise ValueError(f"t={t} outside [0, {self.total_duration}]")
        u = max(t - self.shift, 0.0)
        omega, delta = self.base.sample(u)
        if self.tau == 0:
            return omega, delta
        starts = [s.t_start for s in self.base.segments]
        k = max(bisect_right(starts, u) - 1, 0)
        s = self.base.segments[k]
        return omega, self._segment_response(s, self._y_starts[k], u - s.t_start)


def response_filter(waveform: Waveform, tau: float = 0.0, shift: float = 0.0) -> ResponseFiltered:
    """Evaluator with the finite response of the hardware applied to Delta."""
    return ResponseFiltered(waveform, tau, shift)


def write_samples_csv(waveform, path, n_samples: int = 201) -> None:
    """CSV of (t, omega, delta) on a uniform grid, for plotting."""
    total = waveform.total_duration
    lines = ["t,omega,delta"]
    for k in range(n_samples):
        t = total * k / (n_samples - 1)
        omega, delta = waveform.sample(t)
        lines.append(f"{t:.17g},{omega:.17g},{delta:.17g}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
