"""External input-current waveforms.

Every drive is stored as a piecewise-linear curve: knot times, knot values and
a tail slope used after the last knot.  Before the first knot the value is
held at the first knot value.  That keeps I(t) and dI/dt analytic, which the
neuron equations need, and gives the integrator a finite set of breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

KINDS = ("constant", "linear-ramp", "pulse-train", "piecewise")


@dataclass(frozen=True)
class InputDrive:
    kind: str = "constant"
    amplitude: float = 0.0      # uA; plateau for constant/pulse, cap for ramps
    ramp_rate: float = 0.0      # uA/ns
    t_start: float = 0.0        # ns
    rise: float = 1.0           # ns; edge duration for constant and pulses
    pulse_times: tuple = ()     # ns; pulse onsets
    pulse_width: float = 0.0    # ns; plateau duration
    points: tuple = ()          # ((t, value), ...) for piecewise

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown drive kind {self.kind!r}")
        if self.rise <= 0:
            raise ValidationError("drive rise time must be positive")
        if self.kind == "piecewise":
            ts = [p[0] for p in self.points]
            if not ts or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValidationError("piecewise drive needs strictly increasing times")
        if self.kind == "pulse-train":
            ts = sorted(self.pulse_times)
            span = self.pulse_width + 2 * self.rise
            if any(b - a < span for a, b in zip(ts, ts[1:])):
                raise ValidationError("pulse-train pulses overlap")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, amplitude, rise=1.0, t_start=0.0):
        return cls("constant", amplitude=amplitude, rise=rise, t_start=t_start)

    @classmethod
    def ramp(cls, rate, t_start=0.0, cap=None):
        return cls("linear-ramp", ramp_rate=rate, t_start=t_start,
                   amplitude=0.0 if cap is None else cap)

    @classmethod
    def pulses(cls, amplitude, times, width, rise=0.5):
        return cls("pulse-train", amplitude=amplitude, pulse_times=tuple(times),
                   pulse_width=width, rise=rise)

    @classmethod
    def piecewise(cls, points):
        return cls("piecewise", points=tuple((float(t), float(v)) for t, v in points))

    # representation -----------------------------------------------------
    def knots(self) -> tuple[list[float], list[float], float]:
        k = self.kind
        t0 = self.t_start
        if k == "constant":
            if self.amplitude == 0:
                return [0.0], [0.0], 0.0
            return [t0, t0 + self.rise], [0.0, self.amplitude], 0.0
        if k == "linear-ramp":
            r = self.ramp_rate
            if r == 0:
                return [0.0], [0.0], 0.0
            if self.amplitude:
                cap = abs(self.amplitude) * (1 if r > 0 else -1)
                return [t0, t0 + cap / r], [0.0, cap], 0.0
            return [t0], [0.0], r
        if k == "pulse-train":
            ts, vs = [], []
            for on in sorted(self.pulse_times):
                for t, v in ((on, 0.0), (on + self.rise, self.amplitude),
                             (on + self.rise + self.pulse_width, self.amplitude),
                             (on + 2 * self.rise + self.pulse_width, 0.0)):
                    if ts and t <= ts[-1]:
                        continue
                    ts.append(t)
                    vs.append(v)
            return (ts or [0.0]), (vs or [0.0]), 0.0
        return [p[0] for p in self.points], [p[1] for p in self.points], 0.0

    def value(self, t: float) -> float:
        return self.evaluate(t)[0]

    def evaluate(self, t: float) -> tuple[float, float]:
        """(I(t), dI/dt) using the segment to the right of t at knots."""
        ts, vs, tail = self.knots()
        if t < ts[0]:
            return vs[0], 0.0
        for j in range(len(ts) - 1):
            if t < ts[j + 1]:
                s = (vs[j + 1] - vs[j]) / (ts[j + 1] - ts[j])
                return vs[j] + s * (t - ts[j]), s
        return vs[-1] + tail * (t - ts[-1]), tail

    def scaled_time(self, k: float) -> "InputDrive":
        """Same waveform on a time axis stretched by k."""
        return InputDrive(self.kind, self.amplitude, self.ramp_rate / k,
                          self.t_start * k, self.rise * k,
                          tuple(t * k for t in self.pulse_times),
                          self.pulse_width * k,
                          tuple((t * k, v) for t, v in self.points))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d.update(amplitude_uA=self.amplitude, rise_ns=self.rise, t_start_ns=self.t_start)
        elif self.kind == "linear-ramp":
            d.update(ramp_rate_uA_per_ns=self.ramp_rate, t_start_ns=self.t_start)
            if self.amplitude:
                d["cap_uA"] = self.amplitude
        elif self.kind == "pulse-train":
            d.update(amplitude_uA=self.amplitude, pulse_times_ns=list(self.pulse_times),
                     pulse_width_ns=self.pulse_width, rise_ns=self.rise)
        else:
            d["points"] = [list(p) for p in self.points]
        return d


NO_DRIVE = InputDrive.constant(0.0)
