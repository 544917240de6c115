"""Trajectory analytics: extrema, response shape, incidence, crossings."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AmbiguousShape, GridMismatch


@dataclass(frozen=True)
class ExtremaReport:
    minima: list
    maxima: list
    gamma: float
    lambda_attained: float
    Gamma: float

    def to_dict(self) -> dict:
        return {
            "minima": [[float(t), float(v)] for t, v in self.minima],
            "maxima": [[float(t), float(v)] for t, v in self.maxima],
            "gamma": float(self.gamma),
            "lambda_attained": float(self.lambda_attained),
            "Gamma": float(self.Gamma),
        }


class Shape(str, Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    INTERLACED = "Interlaced"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class ShapeTolerances:
    """Certification tolerances.

    ``gap_rel`` is relative to |gamma|, ``touch_rel`` to the response range
    ``max(|gamma|, gamma - lambda_attained)``; ``infeasible`` is absolute.
    """

    gap_rel: float = 1e-3
    touch_rel: float = 1e-6
    infeasible: float = 1e-6

    def __post_init__(self):
        if not (self.gap_rel > 0 and self.touch_rel > 0 and self.infeasible > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ShapeCertificate:
    shape: Shape
    evidence: dict = field(default_factory=dict)
    gap: float | None = None

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "gap": _num(self.gap),
                "evidence": {k: _num(v) for k, v in self.evidence.items()}}


def _num(v):
    """JSON-safe number: infinities become strings."""
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def _sign_runs(g, noise_tol):
    dg = np.diff(g)
    sgn = np.where(dg > noise_tol, 1, np.where(dg < -noise_tol, -1, 0))
    nz = np.flatnonzero(sgn)
    return sgn, nz


def extrema(traj, noise_tol: float = 1e-9, merge_window: float | None = None) -> ExtremaReport:
    """Local extrema from sign changes of the discrete slope.

    Flat stretches (|dg| <= noise_tol) are merged and the extremum is placed
    at the middle of the stretch. Endpoints are listed when they are
    extremal. Adjacent opposite extrema closer than ``merge_window``
    (default 3 grid steps) and with amplitude below ``10 * noise_tol`` are
    dropped as noise.
    """
    t, g = np.asarray(traj.times), np.asarray(traj.g)
    h = float(t[1] - t[0])
    if merge_window is None:
        merge_window = 3 * h
    gamma, lam = float(g.max()), float(g.min())
    Gamma = float(np.trapezoid(g, t))
    sgn, nz = _sign_runs(g, noise_tol)
    points = []  # (index, kind) with kind +1 = max, -1 = min
    if nz.size:
        first, last = nz[0], nz[-1]
        points.append((first // 2, -int(sgn[first])))
        for i, j in zip(nz[:-1], nz[1:]):
            if sgn[i] != sgn[j]:
                # plateau occupies points i+1 .. j
                points.append(((i + 1 + j) // 2, int(sgn[i])))
        points.append(((last + 1 + len(g) - 1) // 2, int(sgn[last])))
    cleaned = []
    for p in points:
        if cleaned and cleaned[-1][1] == -p[1] and len(cleaned) > 1:
            q = cleaned[-1]
            if (t[p[0]] - t[q[0]] < merge_window and abs(g[p[0]] - g[q[0]]) < 10 * noise_tol
                    and p[0] != len(g) - 1):
                cleaned.pop()
                continue
        cleaned.append(p)
    minima = [(float(t[i]), float(g[i])) for i, k in cleaned if k < 0]
    maxima = [(float(t[i]), float(g[i])) for i, k in cleaned if k > 0]
    return ExtremaReport(minima, maxima, gamma, lam, Gamma)


@dataclass(frozen=True)
class ShapeGap:
    """Peak balance about the last global minimum.

    ``signed`` > 0 means the highest peak precedes the minimum, < 0 that it
    follows it.
    """

    signed: float
    tol: float
    t_last_min: float
    t_last_max: float
    before: float
    after: float
    gamma: float
    lambda_attained: float
    interior: bool

    @property
    def equal(self) -> bool:
        return self.interior and abs(self.signed) <= self.tol

    @property
    def peak_first(self) -> bool:
        return self.signed > self.tol

    @property
    def peak_last(self) -> bool:
        return self.signed < -self.tol


def response_scale(g) -> float:
    gamma, lam = float(np.max(g)), float(np.min(g))
    return max(abs(gamma), gamma - lam, 1e-12)


def shape_gap(traj, tol: ShapeTolerances = ShapeTolerances(), limit: float | None = None) -> ShapeGap:
    """Compare the highest peak before and after the last global minimum.

    ``limit`` is the known value of g as t -> inf (0 for adequate inputs of
    the normalised Magdelaine model). It acts as a virtual endpoint, since a
    finite horizon only ever sees the tail approach it.
    """
    t, g = np.asarray(traj.times), np.asarray(traj.g)
    gamma, lam = float(g.max()), float(g.min())
    if limit is not None:
        gamma = max(gamma, limit)
    touch = tol.touch_rel * response_scale(g)
    n = len(g)
    i_min = int(np.flatnonzero(g <= lam + touch)[-1])
    hits = np.flatnonzero(g >= gamma - touch)
    # the limit is approached, never attained, so it is not a touch time
    t_last_max = float(t[hits[-1]]) if hits.size else -np.inf
    before = float(g[:i_min].max()) if i_min > 0 else -np.inf
    after = float(g[i_min + 1:].max()) if i_min < n - 1 else -np.inf
    if limit is not None:
        after = max(after, limit)
    interior = i_min > 0 and after > -np.inf
    if interior:
        signed = before - after
    else:
        signed = np.inf if after == -np.inf else -np.inf
    return ShapeGap(signed, tol.gap_rel * abs(gamma), float(t[i_min]), t_last_max,
                    before, after, gamma, lam, interior)


def classify(traj, lam: float | None = None, tol: ShapeTolerances = ShapeTolerances(),
             limit: float | None = None) -> ShapeCertificate:
    """Certify the response shape.

    Type1: last global minimum no later than the last global maximum.
    Type2: equal peaks (within ``gap_rel * |gamma|``) about the last global
    minimum. Impulses are tested for Type1 first, pulses for Type2 first. Raises
    :class:`AmbiguousShape` when neither holds. See :func:`shape_gap` for
    ``limit``.
    """
    g = np.asarray(traj.g)
    if lam is not None and g.min() < lam - tol.infeasible:
        i = int(np.argmin(g))
        return ShapeCertificate(Shape.INFEASIBLE, {"t_violation": float(traj.times[i]),
                                                   "g_min": float(g[i]), "bound": lam})
    sg = shape_gap(traj, tol, limit)
    evidence = {
        "t_last_min": sg.t_last_min, "t_last_max": sg.t_last_max,
        "max_before_min": sg.before, "max_after_min": sg.after,
        "gamma": sg.gamma, "lambda_attained": sg.lambda_attained, "gap_tol": sg.tol,
    }
    type1 = sg.t_last_min <= sg.t_last_max
    # an equal-peak pulse also meets the Type1 timing test; impulses go to Type1 first
    if type1 and (traj.u.is_impulse or traj.u.amount == 0):
        return ShapeCertificate(Shape.TYPE1, evidence)
    if sg.equal:
        return ShapeCertificate(Shape.TYPE2, evidence, gap=abs(sg.signed))
    if type1:
        return ShapeCertificate(Shape.TYPE1, evidence)
    raise AmbiguousShape(
        f"highest peak ({sg.before:.6g}) precedes the last minimum and exceeds the later "
        f"peak ({sg.after:.6g}) by more than {sg.tol:.3g}")


def is_incident(traj, lam: float, tol: float = 1e-3) -> bool:
    """min g lies within ``tol`` of the bound and does not undercut it."""
    gmin = float(np.min(traj.g))
    return lam - tol <= gmin <= lam + tol


def crossing_count(traj_u, traj_v, tol: float = 1e-6) -> tuple[int, list[float]]:
    """Sign changes of g(u) - g(v) outside a +-tol band, with crossing times."""
    if traj_u.times.shape != traj_v.times.shape or not np.array_equal(traj_u.times, traj_v.times):
        raise GridMismatch("trajectories are on different grids")
    if traj_u.params != traj_v.params or traj_u.d != traj_v.d:
        raise GridMismatch("trajectories use different parameters or disturbances")
    t = np.asarray(traj_u.times)
    diff = np.asarray(traj_u.g) - np.asarray(traj_v.g)
    sgn = np.where(diff > tol, 1, np.where(diff < -tol, -1, 0))
    idx = np.flatnonzero(sgn)
    times = []
    for i, j in zip(idx[:-1], idx[1:]):
        if sgn[i] != sgn[j]:
            # first zero of the difference on the stretch between i and j
            seg = diff[i:j + 1]
            k = int(np.flatnonzero(np.sign(seg[1:]) != np.sign(seg[0]))[0])
            d0, d1 = seg[k], seg[k + 1]
            frac = d0 / (d0 - d1) if d0 != d1 else 0.0
            times.append(float(t[i + k] + frac * (t[i + k + 1] - t[i + k])))
    return len(times), times
