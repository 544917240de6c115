"""Insulin inputs and glucose disturbances.

Everything here is an immutable value with exact (closed-form) evaluation
and integrals, so the integrator never has to co-simulate a signal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class PulseInput:
    """Basal rate plus one rectangular bolus.

    The bolus has rate ``bolus`` on ``[t_on, t_on + duration]``. A zero
    duration is an impulse carrying ``impulse_amount``.
    """

    basal: float = 0.0
    bolus: float = 0.0
    t_on: float = 0.0
    duration: float = 0.0
    impulse_amount: float = 0.0

    def __post_init__(self):
        if self.duration < 0 or self.bolus < 0 or self.basal < 0 or self.impulse_amount < 0:
            raise ValueError(f"pulse input fields must be nonnegative: {self}")
        for v in (self.basal, self.bolus, self.t_on, self.duration, self.impulse_amount):
            if not math.isfinite(v):
                raise ValueError(f"pulse input fields must be finite: {self}")

    @classmethod
    def impulse(cls, t_on: float, amount: float, basal: float = 0.0) -> "PulseInput":
        return cls(basal=basal, bolus=0.0, t_on=t_on, duration=0.0, impulse_amount=amount)

    @classmethod
    def pulse(cls, t_on: float, duration: float, amount: float, basal: float = 0.0) -> "PulseInput":
        """Bolus of total ``amount`` spread evenly over ``duration`` (impulse if 0)."""
        if duration == 0:
            return cls.impulse(t_on, amount, basal)
        return cls(basal=basal, bolus=amount / duration, t_on=t_on, duration=duration)

    @property
    def t_off(self) -> float:
        return self.t_on + self.duration

    @property
    def is_impulse(self) -> bool:
        return self.duration == 0

    @property
    def amount(self) -> float:
        return input_amount(self)

    def value(self, t):
        """u(t) with the bolus active on the closed interval [t_on, t_off].

        The Dirac part of an impulse is not representable pointwise and is
        omitted (only the basal is returned).
        """
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.basal)
        if not self.is_impulse:
            out = out + np.where((t >= self.t_on) & (t <= self.t_off), self.bolus, 0.0)
        return out if out.ndim else float(out)

    def bolus_integral(self, up_to: float = math.inf) -> float:
        """Bolus amount delivered on [-inf, up_to]."""
        if self.is_impulse:
            return self.impulse_amount if up_to >= self.t_on else 0.0
        covered = min(max(up_to - self.t_on, 0.0), self.duration)
        return self.bolus * covered

    def breakpoints(self) -> list[float]:
        return [self.t_on] if self.is_impulse else [self.t_on, self.t_off]

    def shifted(self, t_on: float) -> "PulseInput":
        return PulseInput(self.basal, self.bolus, t_on, self.duration, self.impulse_amount)


@dataclass(frozen=True)
class RectangularDisturbance:
    """d(t) = magnitude on [start, end], zero elsewhere."""

    magnitude: float = 0.0
    start: float = 0.0
    end: float = 0.0

    kind = "rectangular"

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("disturbance magnitude must be nonnegative")
        if self.end < self.start:
            raise ValueError("disturbance end precedes start")

    @property
    def span(self) -> float:
        return self.end - self.start

    @property
    def is_zero(self) -> bool:
        return self.magnitude == 0 or self.span == 0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where((t >= self.start) & (t <= self.end), self.magnitude, 0.0)
        return out if out.ndim else float(out)

    def integral(self, up_to: float = math.inf) -> float:
        covered = min(max(up_to - self.start, 0.0), self.span)
        return self.magnitude * covered

    def excess_integral(self) -> float:
        return self.integral()

    def breakpoints(self) -> list[float]:
        return [] if self.is_zero else [self.start, self.end]

    @property
    def support_end(self) -> float:
        return self.end


def _erlang2_cdf(s, rate):
    """CDF of the unit-gain two-stage chain's impulse response."""
    s = np.maximum(s, 0.0)
    return 1.0 - np.exp(-rate * s) * (1.0 + rate * s)


def _erlang2_cdf_integral(s, rate):
    """Integral of :func:`_erlang2_cdf` from 0 to s."""
    s = np.maximum(s, 0.0)
    e = np.exp(-rate * s)
    return s - (2.0 - 2.0 * e - rate * s * e) / rate


@dataclass(frozen=True)
class FilteredDisturbance:
    """Meal disturbance through a second-order lag.

    With ``T = time_constant``::

        f2' = -f2 / T + drive * chi[drive_start, drive_end]
        f1' = (f2 - f1) / T
        w   = scale * f1 + offset

    Defaults are the literal meal constants (60 min lag, drive 4 on [200, 202],
    scale 1/263, offset 1).
    """

    time_constant: float = 60.0
    drive: float = 4.0
    drive_start: float = 200.0
    drive_end: float = 202.0
    scale: float = 1.0 / 263.0
    offset: float = 1.0

    kind = "filtered"

    def __post_init__(self):
        if self.time_constant <= 0:
            raise ValueError("filter time constant must be positive")
        if self.drive < 0 or self.scale < 0 or self.offset < 0:
            raise ValueError("filtered disturbance must be nonnegative")
        if self.drive_end < self.drive_start:
            raise ValueError("drive pulse end precedes start")

    @property
    def is_zero(self) -> bool:
        return self.offset == 0 and (self.drive == 0 or self.scale == 0)

    @property
    def drive_area(self) -> float:
        return self.drive * (self.drive_end - self.drive_start)

    def filter_states(self, t):
        """Closed-form (f1, f2) for zero initial filter state."""
        t = np.asarray(t, dtype=float)
        T, r = self.time_constant, 1.0 / self.time_constant
        # step responses of f2 and f1 to a unit drive switched on at 0
        f2 = T * ((1.0 - np.exp(-r * np.maximum(t - self.drive_start, 0.0)))
                  - (1.0 - np.exp(-r * np.maximum(t - self.drive_end, 0.0))))
        f1 = T * (_erlang2_cdf(t - self.drive_start, r) - _erlang2_cdf(t - self.drive_end, r))
        return self.drive * f1, self.drive * f2

    def value(self, t):
        f1, _ = self.filter_states(t)
        out = self.scale * f1 + self.offset
        return out if np.ndim(out) else float(out)

    def f1_integral(self, up_to: float = math.inf) -> float:
        if math.isinf(up_to):
            return self.drive_area * self.time_constant
        r = 1.0 / self.time_constant
        return float(self.drive * self.time_constant * (
            _erlang2_cdf_integral(up_to - self.drive_start, r)
            - _erlang2_cdf_integral(up_to - self.drive_end, r)))

    def integral(self, up_to: float = math.inf) -> float:
        base = self.offset * max(up_to, 0.0) if self.offset else 0.0
        if math.isinf(base):
            return math.inf
        return base + self.scale * self.f1_integral(up_to)

    def excess_integral(self) -> float:
        """Integral of w above its constant offset."""
        return self.scale * self.f1_integral()

    def breakpoints(self) -> list[float]:
        return [self.drive_start, self.drive_end] if self.drive else []

    @property
    def support_end(self) -> float:
        return self.drive_end


Disturbance = Union[RectangularDisturbance, FilteredDisturbance]


@dataclass(frozen=True)
class AmountConstraint:
    """Total bolus amount (1-norm of the bolus part of the input)."""

    U: float

    def __post_init__(self):
        if not (self.U >= 0):
            raise ValueError("amount constraint must be nonnegative")


def input_amount(u: PulseInput) -> float:
    """Bolus amount, basal excluded."""
    return u.impulse_amount if u.is_impulse else u.bolus * u.duration


def disturbance_integral(d: Disturbance, up_to: float = math.inf) -> float:
    """Integral of d from 0 to ``up_to`` (disturbances vanish for t < 0)."""
    if up_to <= 0:
        return 0.0
    return d.integral(up_to)


def is_nested(u: PulseInput, v: PulseInput) -> bool:
    """True when u's support is a proper subset of v's."""
    inside = v.t_on <= u.t_on and u.t_off <= v.t_off
    return inside and (u.t_on, u.t_off) != (v.t_on, v.t_off)
