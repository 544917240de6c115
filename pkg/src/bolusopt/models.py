"""Magdelaine and Bergman glucose-insulin models.

Both models are kept as plain parameter/state records plus pure vector
fields. The integrator in :mod:`bolusopt.simulate` carries a compiled copy
of the same right-hand sides; ``tests/test_models.py`` checks the two agree.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

MAGDELAINE = "magdelaine"
BERGMAN = "bergman"


def _check_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not (np.isfinite(value) and value > 0):
            raise ValueError(f"{type(obj).__name__}.{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class MagdelaineParams:
    """Rate constants of the five-state Magdelaine model.

    ``E_raw`` is the endogenous production as it appears in the glucose
    equation. The normalised value ``E = E_raw / alpha4`` is computed once at
    construction; ``a`` and ``b`` are read-only aliases of ``alpha2`` and
    ``alpha4``.
    """

    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    E_raw: float = 0.0
    E: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_positive(self, ("alpha2", "alpha3", "alpha4", "alpha5"))
        if self.E_raw < 0:
            raise ValueError("E_raw must be nonnegative")
        object.__setattr__(self, "E", self.E_raw / self.alpha4)

    @property
    def a(self) -> float:
        return self.alpha2

    @property
    def b(self) -> float:
        return self.alpha4

    @property
    def ratio(self) -> float:
        """b / a, the insulin needed per unit of absorbed disturbance."""
        return self.alpha4 / self.alpha2

    def normalized(self) -> "MagdelaineParams":
        """Same rates with E = 0 (set point at zero, no basal)."""
        return MagdelaineParams(self.alpha2, self.alpha3, self.alpha4, self.alpha5, 0.0)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.init}

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha2, self.alpha3, self.alpha4, self.alpha5, self.E])

    def longest_time_constant(self) -> float:
        return 1.0 / min(self.alpha3, self.alpha5)


@dataclass(frozen=True)
class BergmanParams:
    """Bergman minimal model constants (per minute; ``k`` is a gain)."""

    a: float
    b: float
    c: float
    d: float
    k: float
    G: float

    def __post_init__(self):
        _check_positive(self, ("a", "b", "c", "d", "k", "G"))

    def to_dict(self) -> dict:
        return asdict(self)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.k, self.G])

    def longest_time_constant(self) -> float:
        return 1.0 / min(self.a, self.c, self.d, self.G)


@dataclass(frozen=True)
class MagdelaineState:
    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0
    x4: float = 0.0
    x5: float = 0.0

    names = ("x1", "x2", "x3", "x4", "x5")

    @property
    def g(self) -> float:
        return self.x1

    @property
    def x(self) -> float:
        return self.x2

    def w(self, params: MagdelaineParams) -> float:
        return self.x4 + params.E

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.x4, self.x5], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "MagdelaineState":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class BergmanState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    g: float = 0.0

    names = ("x", "y", "z", "g")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.g], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "BergmanState":
        return cls(*(float(v) for v in arr))


def magdelaine_vector_field(state, u_value: float, d_value: float, params: MagdelaineParams) -> np.ndarray:
    """Time derivative of the Magdelaine state (E already normalised by b)."""
    x1, x2, x3, x4, x5 = np.asarray(state.as_array() if hasattr(state, "as_array") else state, float)
    p = params
    return np.array([
        -p.alpha2 * x2 + p.alpha4 * (x4 + p.E),
        -p.alpha3 * x2 + p.alpha3 * x3,
        -p.alpha3 * x3 + p.alpha3 * u_value,
        -p.alpha5 * x4 + p.alpha5 * x5,
        -p.alpha5 * x5 + p.alpha5 * d_value,
    ])


def bergman_vector_field(state, u_value: float, w_value: float, params: BergmanParams) -> np.ndarray:
    x, y, z, g = np.asarray(state.as_array() if hasattr(state, "as_array") else state, float)
    p = params
    return np.array([
        -p.a * x + p.a * p.b * y,
        -p.c * y + p.c * z,
        -p.d * z + p.d * p.k * u_value,
        -(x + p.G) * g + w_value,
    ])


def basal_for_steady_state(params: MagdelaineParams) -> float:
    """Basal rate holding glucose constant with no disturbance: (b/a) E."""
    return params.ratio * params.E


def magdelaine_equilibrium(params: MagdelaineParams, g0: float = 0.0) -> MagdelaineState:
    ubar = basal_for_steady_state(params)
    return MagdelaineState(x1=g0, x2=ubar, x3=ubar, x4=0.0, x5=0.0)


def bergman_insulin_steady_state(params: BergmanParams, basal: float) -> float:
    """Steady insulin effectiveness for a constant basal rate (x = b k u)."""
    return params.b * params.k * basal


def bergman_equilibrium(params: BergmanParams, basal: float, w_bar: float) -> BergmanState:
    """Equilibrium of the Bergman model under constant basal and disturbance."""
    z = params.k * basal
    x = params.b * z
    return BergmanState(x=x, y=z, z=z, g=w_bar / (x + params.G))


def params_hash(params) -> str:
    blob = json.dumps({"model": type(params).__name__, **params.to_dict()}, sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def model_of(params) -> str:
    if isinstance(params, MagdelaineParams):
        return MAGDELAINE
    if isinstance(params, BergmanParams):
        return BERGMAN
    raise TypeError(f"unknown parameter record {type(params).__name__}")
