"""Circuit-level model of the nanowire neuron and hTron synapse.

Units throughout: current in uA, inductance in nH, resistance in Ohm, time in ns.
With these units L di/dt = V holds directly (uA * Ohm = uV = nH * uA/ns).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError, DivergenceError

KI_CLAMP = 0.999

# Neuron equation variants; see README, "Neuron equations".  "kcl" conserves
# the total branch current.
NEURON_FORMS = ("kcl", "symmetric", "printed")


@dataclass(frozen=True)
class NanowireParams:
    L0: float
    I_c: float
    I_r: float | None = None
    R_hs: float = 100.0

    def __post_init__(self):
        if self.I_r is None:
            object.__setattr__(self, "I_r", 0.5 * self.I_c)
        if not self.L0 > 0:
            raise ConfigurationError(f"L0 must be positive, got {self.L0}")
        if not 0 < self.I_r < self.I_c:
            raise ConfigurationError(
                f"need 0 < I_r < I_c, got I_r={self.I_r}, I_c={self.I_c}")
        if not self.R_hs > 0:
            raise ConfigurationError(f"R_hs must be positive, got {self.R_hs}")


@dataclass(frozen=True)
class NeuronParams:
    nw1: NanowireParams
    nw2: NanowireParams
    L1: float = 20.0
    L2: float = 20.0
    R1: float = 5.0
    R2: float = 5.0
    I_bias: float = 0.0

    def __post_init__(self):
        for name in ("L1", "L2", "R1", "R2"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @classmethod
    def default(cls, I_bias: float = 0.0, I_c: float = 30.0, L_nw: float = 10.0,
                I_r: float | None = None, R_hs: float = 100.0, **kw) -> "NeuronParams":
        nw = NanowireParams(L_nw, I_c, I_r, R_hs)
        return cls(nw, nw, I_bias=I_bias, **kw)

    @property
    def split(self) -> float:
        """Share of a change of input current that lands in the main branch."""
        return self.L1 / (self.L1 + self.L2)

    @property
    def quiescent_main(self) -> float:
        return self.I_bias * self.split

    @property
    def quiescent_control(self) -> float:
        return self.I_bias - self.quiescent_main

    @property
    def threshold_input(self) -> float:
        """DC input current at which the main nanowire first reaches I_c."""
        return (self.nw2.I_c - self.quiescent_main) / self.split

    def as_row(self) -> list[float]:
        a, b = self.nw1, self.nw2
        return [a.L0, a.I_c, a.I_r, a.R_hs, b.L0, b.I_c, b.I_r, b.R_hs,
                self.L1, self.L2, self.R1, self.R2]


@dataclass(frozen=True)
class SynapseParams:
    htron_channel: NanowireParams
    L_syn: float = 1000.0
    R_syn1: float = 10.0
    R_syn2: float = 10.0
    R_out: float = 5.0
    L_out: float = 20.0
    I_bias_h: float = 0.0
    beta: float = 0.5

    def __post_init__(self):
        for name in ("L_syn", "L_out", "R_syn1", "R_syn2", "R_out"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")

    @classmethod
    def default(cls, I_bias_h: float = 0.0, L_syn: float = 1000.0, *,
                L_nw_h: float = 100.0, ic_margin: float = 1.1,
                retrap_fraction: float = 0.9, R_hs: float = 100.0,
                I_c_h: float | None = None, **kw) -> "SynapseParams":
        if I_c_h is None:
            I_c_h = max(ic_margin * abs(I_bias_h), 1.0)
        ch = NanowireParams(L_nw_h, I_c_h, retrap_fraction * I_c_h, R_hs)
        return cls(ch, L_syn=L_syn, I_bias_h=I_bias_h, **kw)

    def with_bias(self, I_bias_h: float) -> "SynapseParams":
        return replace(self, I_bias_h=I_bias_h)

    def as_row(self) -> list[float]:
        c = self.htron_channel
        return [c.L0, c.I_c, c.I_r, c.R_hs, self.L_syn, self.R_syn1, self.R_syn2,
                self.R_out, self.L_out, self.beta]


@dataclass
class NeuronState:
    i1: float = 0.0
    i2: float = 0.0
    i3: float = 0.0
    i4: float = 0.0
    n1: int = 0
    n2: int = 0

    def currents(self) -> tuple[float, float, float, float]:
        return (self.i1, self.i2, self.i3, self.i4)


@dataclass
class SynapseState:
    i1: float = 0.0
    i2: float = 0.0
    i3: float = 0.0
    i4: float = 0.0
    i5: float = 0.0
    h: int = 0

    def currents(self) -> tuple[float, float, float, float, float]:
        return (self.i1, self.i2, self.i3, self.i4, self.i5)


def _lk(i: float, L0: float, Ic: float) -> float:
    x = abs(i)
    cap = KI_CLAMP * Ic
    if x > cap:
        x = cap
    r = x / Ic
    return L0 / math.sqrt(1.0 - r * r)


def kinetic_inductance(i: float, p: NanowireParams) -> float:
    """Current-dependent nanowire inductance, clamped just below I_c."""
    return _lk(i, p.L0, p.I_c)


def neuron_derivs(i1, i2, i3, i4, n1, n2, row, i_in, di_in, form=0):
    """Scalar neuron right-hand side.  `row` is NeuronParams.as_row();
    `form` indexes NEURON_FORMS."""
    L0a, Ica, _, Rhsa, L0b, Icb, _, Rhsb, L1, L2, R1, R2 = row
    d1 = (i2 * R1 - i1 * Rhsa * n1) / _lk(i1, L0a, Ica)
    d3 = (i4 * R2 - i3 * Rhsb * n2) / _lk(i3, L0b, Icb)
    x = (L1 * di_in + i2 * R1 - i4 * R2) / (L1 + L2)
    if form == 0:
        d2 = di_in - x - d1
        d4 = x - d3
    elif form == 1:
        d2 = -x - d1
        d4 = x - d3
    else:
        d2 = -x - d1
        d4 = (L1 * di_in + i3 * R1 - i4 * R2) / (L1 + L2) - d3
    return d1, d2, d3, d4


def synapse_derivs(i1, i2, i3, i4, i5, h, row):
    L0h, Ich, _, Rhs, Lsyn, Rs1, Rs2, Rout, Lout = row[:9]
    d1 = (i2 * Rs1 - i1 * Rhs * h) / _lk(i1, L0h, Ich)
    d3 = (i2 * Rs1 - i4 * Rs2) / Lsyn
    d5 = (i4 * Rs2 - i5 * Rout) / Lout
    return d1, -d1 - d3, d3, d3 - d5, d5


def _form_index(form: str) -> int:
    try:
        return NEURON_FORMS.index(form)
    except ValueError:
        raise ConfigurationError(f"unknown neuron form {form!r}") from None


def neuron_rhs(s: NeuronState, p: NeuronParams, i_in: float, di_in_dt: float,
               form: str = "kcl") -> NeuronState:
    vals = s.currents() + (i_in, di_in_dt)
    if not all(math.isfinite(v) for v in vals):
        raise DivergenceError("non-finite neuron state", t_last=None)
    d = neuron_derivs(*s.currents(), s.n1, s.n2, p.as_row(), i_in, di_in_dt,
                      _form_index(form))
    return NeuronState(*d, n1=s.n1, n2=s.n2)


def synapse_rhs(s: SynapseState, p: SynapseParams) -> SynapseState:
    if not all(math.isfinite(v) for v in s.currents()):
        raise DivergenceError("non-finite synapse state", t_last=None)
    d = synapse_derivs(*s.currents(), s.h, p.as_row())
    return SynapseState(*d, h=s.h)


def update_switch(flag: int, i: float, p: NanowireParams,
                  threshold: float | None = None) -> int:
    """Hysteretic superconducting/resistive switch.  `threshold` overrides
    I_c for the 0 -> 1 transition (used for the heated hTron channel)."""
    ic = p.I_c if threshold is None else threshold
    if flag == 0 and abs(i) > ic:
        return 1
    if flag == 1 and abs(i) < p.I_r:
        return 0
    return flag


def effective_htron_threshold(p: SynapseParams, upstream_firing: int) -> float:
    if upstream_firing:
        return p.beta * abs(p.I_bias_h)
    return p.htron_channel.I_c
