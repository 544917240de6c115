"""Scenario files: one TOML document per experiment.

Top-level keys name the model and the bound; tables hold the parameters,
disturbance, optional input, grid, solver, sweep and oracle settings.
Glucose is normalised (set point 0) for Magdelaine and in mmol/L for
Bergman; times are minutes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .analysis import ShapeTolerances
from .errors import ValidationError
from .models import BERGMAN, MAGDELAINE, BergmanParams, BergmanState, MagdelaineParams, MagdelaineState
from .optimize import SolverSettings
from .signals import FilteredDisturbance, PulseInput, RectangularDisturbance


@dataclass(frozen=True)
class InputSpec:
    t_prime: float = 0.0
    tau: float = 0.0
    amount: float = 0.0

    def to_pulse(self, basal: float = 0.0) -> PulseInput:
        return PulseInput.pulse(self.t_prime, self.tau, self.amount, basal)


@dataclass(frozen=True)
class GridSpec:
    h: float = 0.1
    t_end: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("grid step must be positive")
        if self.t_end is not None and not self.t_end > 0:
            raise ValidationError("t_end must be positive")


@dataclass(frozen=True)
class SweepSpec:
    """Durations and the integer input-time window for a Bergman sweep."""

    durations: tuple = (0.0,)
    t_start: float = 0.0
    t_stop: float = 350.0
    t_step: float = 1.0
    refine: bool = False

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(float(t) for t in self.durations))
        if not self.t_step > 0 or self.t_stop < self.t_start:
            raise ValidationError("sweep time window is empty")

    def t_grid(self):
        n = int(math.floor((self.t_stop - self.t_start) / self.t_step + 1e-9))
        return [self.t_start + i * self.t_step for i in range(n + 1)]


@dataclass(frozen=True)
class OracleSpec:
    """Brute-force grid; None picks the default range."""

    t_start: float | None = None
    t_stop: float | None = None
    t_step: float = 1.0
    tau_max: float | None = None
    tau_step: float = 1.0
    sample_step: float = 0.25

    def __post_init__(self):
        if not (self.t_step > 0 and self.tau_step > 0 and self.sample_step > 0):
            raise ValidationError("oracle steps must be positive")

    def grids(self):
        """(t_grid, tau_grid); None where the oracle default applies."""
        t_grid = tau_grid = None
        if self.t_start is not None or self.t_stop is not None:
            t0 = self.t_start if self.t_start is not None else 0.0
            t1 = self.t_stop if self.t_stop is not None else t0
            t_grid = np.arange(t0, t1 + 0.5 * self.t_step, self.t_step)
        if self.tau_max is not None:
            tau_grid = np.arange(0.0, self.tau_max + 0.5 * self.tau_step, self.tau_step)
        return t_grid, tau_grid


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    params: object
    disturbance: object
    lam: float
    amount: float | None = None
    basal: float = 0.0
    initial_state: tuple | None = None
    input: InputSpec | None = None
    grid: GridSpec = GridSpec()
    solver: SolverSettings = SolverSettings()
    sweep: SweepSpec | None = None
    oracle: OracleSpec = OracleSpec()
    outputs: dict = field(default_factory=dict)
    description: str = ""
    calibration: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in (MAGDELAINE, BERGMAN):
            raise ValidationError(f"unknown model {self.model!r}")
        want = MagdelaineParams if self.model == MAGDELAINE else BergmanParams
        if not isinstance(self.params, want):
            raise ValidationError(f"params do not match model {self.model}")
        if self.initial_state is not None:
            n = 5 if self.model == MAGDELAINE else 4
            if len(self.initial_state) != n:
                raise ValidationError(f"initial_state needs {n} entries")
            object.__setattr__(self, "initial_state", tuple(float(v) for v in self.initial_state))
        if self.amount is not None and self.amount < 0:
            raise ValidationError("amount must be nonnegative")

    @property
    def x0(self):
        if self.initial_state is None:
            return None
        cls = MagdelaineState if self.model == MAGDELAINE else BergmanState
        return cls.from_array(self.initial_state)

    def pulse(self) -> PulseInput:
        return (self.input or InputSpec()).to_pulse(self.basal)

    def settings(self, **overrides) -> SolverSettings:
        base = {f.name: getattr(self.solver, f.name) for f in fields(SolverSettings)}
        base["h"] = self.grid.h
        base.update(overrides)
        return SolverSettings(**base)

    # ---------------------------------------------------------------- dict io

    def to_dict(self) -> dict:
        out = {"name": self.name, "model": self.model, "lam": self.lam}
        if self.description:
            out["description"] = self.description
        if self.amount is not None:
            out["amount"] = self.amount
        if self.basal:
            out["basal"] = self.basal
        if self.initial_state is not None:
            out["initial_state"] = list(self.initial_state)
        out["params"] = self.params.to_dict()
        out["disturbance"] = _disturbance_to_dict(self.disturbance)
        if self.input is not None:
            out["input"] = asdict(self.input)
        out["grid"] = _drop_none(asdict(self.grid))
        out["solver"] = _solver_to_dict(self.solver)
        if self.sweep is not None:
            sw = asdict(self.sweep)
            sw["durations"] = list(self.sweep.durations)
            out["sweep"] = sw
        out["oracle"] = _drop_none(asdict(self.oracle))
        if self.outputs:
            out["outputs"] = dict(self.outputs)
        if self.calibration:
            out["calibration"] = dict(self.calibration)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        try:
            model = data.pop("model")
            params_d = data.pop("params")
            dist_d = data.pop("disturbance")
            lam = float(data.pop("lam"))
            name = data.pop("name", "scenario")
        except KeyError as e:
            raise ValidationError(f"scenario is missing {e.args[0]!r}") from None
        if model not in (MAGDELAINE, BERGMAN):
            raise ValidationError(f"unknown model {model!r}")
        try:
            params = (MagdelaineParams if model == MAGDELAINE else BergmanParams)(**params_d)
            disturbance = _disturbance_from_dict(dist_d)
            kw = {}
            for key, typ in (("input", InputSpec), ("grid", GridSpec), ("sweep", SweepSpec),
                             ("oracle", OracleSpec)):
                if key in data:
                    kw[key] = typ(**data.pop(key))
            if "solver" in data:
                kw["solver"] = _solver_from_dict(data.pop("solver"))
            for key in ("amount", "basal", "initial_state", "outputs", "description", "calibration"):
                if key in data:
                    kw[key] = data.pop(key)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"invalid scenario: {e}") from None
        if data:
            raise ValidationError(f"unknown scenario keys: {sorted(data)}")
        return cls(name=name, model=model, params=params, disturbance=disturbance, lam=lam, **kw)

    # ---------------------------------------------------------------- file io

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as e:
            raise ValidationError(f"cannot parse scenario: {e}") from None

    @classmethod
    def load(cls, path) -> "Scenario":
        p = Path(path)
        if not p.exists():
            bundled = resources.files("bolusopt") / "scenarios" / p.name
            if not (p.parent == Path(".") and bundled.is_file()):
                raise ValidationError(f"scenario file not found: {path}")
            return cls.loads(bundled.read_text())
        return cls.loads(p.read_text())


def bundled_scenarios() -> list[str]:
    root = resources.files("bolusopt") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".toml"))


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def _disturbance_to_dict(d) -> dict:
    return {"kind": d.kind, **asdict(d)}


def _disturbance_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "rectangular")
    if kind == "rectangular":
        return RectangularDisturbance(**d)
    if kind == "filtered":
        return FilteredDisturbance(**d)
    raise ValidationError(f"unknown disturbance kind {kind!r}")


_SHAPE_KEYS = {"gap_rel": "gap_rel", "touch_rel": "touch_rel", "infeasible_tol": "infeasible"}


def _solver_to_dict(s: SolverSettings) -> dict:
    out = {}
    for f in fields(SolverSettings):
        if f.name in ("shape", "h"):
            continue
        v = getattr(s, f.name)
        if v is not None:
            out[f.name] = v
    for key, attr in _SHAPE_KEYS.items():
        out[key] = getattr(s.shape, attr)
    return out


def _solver_from_dict(d: dict) -> SolverSettings:
    d = dict(d)
    shape = {attr: d.pop(key) for key, attr in _SHAPE_KEYS.items() if key in d}
    return SolverSettings(shape=ShapeTolerances(**shape), **d)
