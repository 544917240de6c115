"""Pulse-bolus optimisers for both models, plus a brute-force grid oracle.

Magdelaine (normalised, E = 0): the bolus amount is fixed by adequacy and
the free variables are the input time t' and duration tau. For fixed tau
the lowest incident t' is found by bisection, since min g is monotone in
t'. The joint problem is then a one-dimensional search over tau, which
terminates on either an impulse whose last minimum precedes its last peak
(Type1) or a pulse with equal peaks about the minimum (Type2).

Bergman: the required bolus is the impulse whose response touches the
floor on both sides of the meal peak. Below that amount, the duration sweep
chooses t' on an integer grid for every tau.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import closed_form
from .analysis import (
    Shape,
    ShapeCertificate,
    ShapeTolerances,
    classify,
    is_incident,
    shape_gap,
)
from .errors import (
    AmbiguousShape,
    EmptyFeasibleSet,
    Infeasible,
    NoIncidentInput,
    NotConverged,
    ValidationError,
)
from .models import BergmanParams, MagdelaineParams
from .signals import FilteredDisturbance, PulseInput, RectangularDisturbance
from .simulate import DEFAULT_STEP, SETTLE_MULTIPLE, Trajectory, default_horizon, simulate


# finest incident-time resolution the duration search refines to
MIN_TIME_RESOLUTION = 1e-8


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs shared by the optimisers.

    ``t_min`` bounds the input time from below (None: any real time).
    ``tau_max`` caps the duration search (None: derived from the scenario).
    """

    h: float = DEFAULT_STEP
    t_tol: float = 1e-2
    tau_tol: float = 1e-2
    shape: ShapeTolerances = ShapeTolerances()
    incidence_tol: float = 1e-3
    max_iter: int = 200
    max_simulations: int = 200
    paper_sequence: bool = False
    t_min: float | None = None
    tau_max: float | None = None
    horizon_multiple: float = SETTLE_MULTIPLE

    def __post_init__(self):
        for name in ("h", "t_tol", "tau_tol", "incidence_tol", "horizon_multiple"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.max_iter < 1 or self.max_simulations < 1:
            raise ValidationError("iteration limits must be at least 1")


@dataclass
class OptimizationResult:
    input: PulseInput
    gamma: float
    lambda_attained: float
    certificate: ShapeCertificate | None
    iterations: int
    converged: bool
    incident: bool = True
    bound: float | None = None
    oracle_gap: float | None = None
    simulations: int = 0
    history: list = field(default_factory=list)
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    @property
    def t_prime(self) -> float:
        return self.input.t_on

    @property
    def tau(self) -> float:
        return self.input.duration

    @property
    def amount(self) -> float:
        return self.input.amount

    def to_dict(self) -> dict:
        u = self.input
        return {
            "input": {"t_prime": u.t_on, "tau": u.duration, "amount": u.amount,
                      "bolus_rate": u.bolus if not u.is_impulse else None, "basal": u.basal},
            "gamma": self.gamma,
            "lambda_attained": self.lambda_attained,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "iterations": self.iterations,
            "simulations": self.simulations,
            "converged": self.converged,
            "incident": self.incident,
            "bound": self.bound,
            "oracle_gap": self.oracle_gap,
        }


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    bound: float


# --------------------------------------------------------------------------
# Magdelaine


def _excess_area(d) -> float:
    if isinstance(d, FilteredDisturbance):
        if d.offset:
            raise ValidationError("Magdelaine disturbances must vanish at rest (offset 0)")
        return d.excess_integral()
    return d.excess_integral()


def required_amount_magdelaine(d, params: MagdelaineParams) -> float:
    """Adequate bolus amount (b/a) * integral of d."""
    return params.ratio * _excess_area(d)


def feasibility_check(lam: float, d, params: MagdelaineParams) -> Feasibility:
    """Feasible iff -b*M <= lam <= 0 (the response starts at g = 0)."""
    bound = -params.b * _excess_area(d)
    return Feasibility(bound <= lam <= 0.0, bound)


def _require_feasible(lam, d, params):
    f = feasibility_check(lam, d, params)
    if not f.feasible:
        if lam > 0:
            raise Infeasible(f"lambda = {lam} exceeds the initial glucose 0", bound=0.0)
        raise Infeasible(f"lambda = {lam} is below the reachable bound {f.bound:.6g}", bound=f.bound)
    return f


class _Magdelaine:
    """Response evaluations for one (params, d, lambda, U) problem."""

    def __init__(self, params, d, lam, U, settings):
        self.params = params.normalized() if params.E else params
        self.d, self.lam, self.U, self.s = d, lam, U, settings
        self.sims = 0
        self.t_tol = settings.t_tol
        self.ltc = self.params.longest_time_constant()
        start = d.drive_start if isinstance(d, FilteredDisturbance) else d.start
        self.d_start, self.d_end = start, d.support_end

    def response(self, t_on, tau) -> Trajectory:
        u = PulseInput.pulse(t_on, tau, self.U)
        h = self.s.h
        t0 = -h * (math.ceil(-t_on / h) + 1) if t_on < h else 0.0
        t_end = default_horizon(self.params, u, self.d, self.s.horizon_multiple)
        self.sims += 1
        return simulate(self.params, u, self.d, t_end=t_end, h=h, t0=t0, strict_grid=False)

    def min_g(self, t_on, tau) -> float:
        return float(self.response(t_on, tau).g.min())

    def feasible(self, t_on, tau) -> bool:
        return self.min_g(t_on, tau) >= self.lam

    def incident_time(self, tau, hi=None, lo=None) -> float:
        """Smallest t' whose response stays above lambda (bisection)."""
        step = 5.0 * self.ltc
        if hi is None or not self.feasible(hi, tau):
            hi = max(self.d_end, self.s.t_min if self.s.t_min is not None else -math.inf)
            for _ in range(10):
                if self.feasible(hi, tau):
                    break
                hi += step
                step *= 2
            else:
                raise NoIncidentInput(f"no input time keeps g >= {self.lam} for tau = {tau}")
        floor = self.d_start - 60.0 * self.ltc - 2.0 * tau
        if self.s.t_min is not None:
            floor = max(floor, self.s.t_min)
        if lo is None or lo >= hi or self.feasible(lo, tau):
            lo, step = hi, 5.0 * self.ltc
            while True:
                lo = max(lo - step, floor)
                if not self.feasible(lo, tau):
                    break
                if lo <= floor:
                    if self.min_g(lo, tau) <= self.lam + self.s.incidence_tol:
                        return lo
                    raise NoIncidentInput(
                        f"g stays above {self.lam} for every input time >= {floor:.6g} (tau = {tau})")
                step *= 2
        while hi - lo > self.t_tol:
            mid = 0.5 * (lo + hi)
            if self.feasible(mid, tau):
                hi = mid
            else:
                lo = mid
        return hi

    def evaluate(self, tau, hi=None, lo=None):
        t = self.incident_time(tau, hi, lo)
        traj = self.response(t, tau)
        return t, traj, shape_gap(traj, self.s.shape, limit=0.0)


def _result(traj, lam, iterations, converged, sims, history=None, bound=None, incident_tol=1e-3,
            limit=0.0, tol=ShapeTolerances()):
    try:
        cert = classify(traj, lam, tol, limit=limit)
    except AmbiguousShape:
        cert = None
    ok = cert is not None and cert.shape in (Shape.TYPE1, Shape.TYPE2, Shape.INTERLACED)
    g = traj.g
    return OptimizationResult(traj.u, float(g.max()), float(g.min()), cert, iterations,
                              bool(converged and ok), is_incident(traj, lam, incident_tol), bound,
                              simulations=sims, history=history or [], trajectory=traj)


def min_time_at_fixed_duration(tau, lam, d, params, U=None, settings=SolverSettings()):
    """Smallest incident t' for a pulse of duration tau. Returns (t', result)."""
    f = _require_feasible(lam, d, params)
    U = required_amount_magdelaine(d, params) if U is None else U
    P = _Magdelaine(params, d, lam, U, settings)
    if U == 0:
        traj = P.response(0.0, 0.0)
        return 0.0, _result(traj, lam, 0, True, P.sims, bound=f.bound, tol=settings.shape)
    t = P.incident_time(tau)
    res = _result(P.response(t, tau), lam, 1, True, P.sims, bound=f.bound,
                  incident_tol=settings.incidence_tol, tol=settings.shape)
    return t, res


def min_duration_at_fixed_time(t_on, lam, d, params, U=None, settings=SolverSettings()):
    """Smallest tau at fixed t' keeping g >= lambda. Returns (tau, result).

    min g grows with tau at fixed t', so bisection applies. tau = 0 is
    returned when the impulse is already feasible.
    """
    f = _require_feasible(lam, d, params)
    U = required_amount_magdelaine(d, params) if U is None else U
    P = _Magdelaine(params, d, lam, U, settings)
    if U == 0 or P.feasible(t_on, 0.0):
        tau = 0.0
    else:
        cap = settings.tau_max or 100.0 * (P.ltc + (P.d_end - P.d_start))
        hi = max(1.0, 0.25 * (P.d_end - P.d_start))
        while not P.feasible(t_on, hi):
            if hi >= cap:
                raise NoIncidentInput(f"no duration up to {cap:.6g} keeps g >= {lam} at t' = {t_on}")
            hi = min(2.0 * hi, cap)
        lo = 0.0
        while hi - lo > settings.tau_tol:
            mid = 0.5 * (lo + hi)
            if P.feasible(t_on, mid):
                hi = mid
            else:
                lo = mid
        tau = hi
    res = _result(P.response(t_on, tau), lam, 1, True, P.sims, bound=f.bound,
                  incident_tol=settings.incidence_tol, tol=settings.shape)
    return tau, res


def optimize_magdelaine(lam, d, params, settings=SolverSettings()) -> OptimizationResult:
    """Minimise the peak of an adequate, lambda-incident pulse response.

    Tries the impulse first. If its highest peak precedes the minimum, the
    duration is searched: bisection between a peak-first duration and a
    peak-last one until the peaks balance, then the balanced band is
    bracketed from both sides and its midpoint returned. With
    ``settings.paper_sequence`` the running-average iteration replaces the
    bisection.
    """
    f = _require_feasible(lam, d, params)
    U = required_amount_magdelaine(d, params)
    P = _Magdelaine(params, d, lam, U, settings)
    finish = lambda traj, it, conv, hist: _result(  # noqa: E731
        traj, lam, it, conv, P.sims, hist, f.bound, settings.incidence_tol, tol=settings.shape)
    if U == 0:
        return finish(P.response(0.0, 0.0), 0, True, [])

    history = []

    def probe(tau, hi=None, lo=None):
        t, traj, sg = P.evaluate(tau, hi, lo)
        history.append({"tau": tau, "t_prime": t, "gap": sg.signed, "gap_tol": sg.tol})
        return t, traj, sg

    t0, traj0, sg0 = probe(0.0)
    if not sg0.peak_first:
        return finish(traj0, 1, True, history)

    cap = settings.tau_max or 100.0 * (P.ltc + (P.d_end - P.d_start))
    # duration witness with the peak no longer first
    lo, t_lo = 0.0, t0
    hi = max(1.0, 0.25 * (P.d_end - P.d_start))
    while True:
        t_hi, traj_hi, sg_hi = probe(hi, hi=t_lo)
        if not sg_hi.peak_first:
            break
        if hi >= cap:
            raise NotConverged(f"peaks stay unbalanced up to tau = {cap:.6g}",
                               best=finish(traj_hi, len(history), False, history))
        lo, t_lo = hi, t_hi
        hi = min(2.0 * hi, cap)
    if settings.paper_sequence:
        return _paper_sequence(P, lo, hi, t_lo, t_hi, probe, finish, history, settings)

    # bisect until one duration balances the peaks. A bracket that closes
    # first means the incident times are too coarse to resolve the gap, so
    # both resolutions are refined and the bracket ends re-evaluated.
    lo0, t_lo0, hi0, t_hi0 = lo, t_lo, hi, t_hi
    tau_res = settings.tau_tol
    hit = (hi, t_hi, traj_hi) if sg_hi.equal else None
    lo_p1, t_lo_p1 = (None, None) if sg_hi.equal else (hi, t_hi)
    while hit is None:
        if len(history) > settings.max_iter:
            raise NotConverged("duration bisection did not balance the peaks",
                               best=finish(traj_hi, len(history), False, history))
        if hi - lo < tau_res:
            if P.t_tol <= MIN_TIME_RESOLUTION:
                raise NotConverged("duration bracket collapsed without balancing the peaks",
                                   best=finish(traj_hi, len(history), False, history))
            coarse = P.t_tol
            P.t_tol *= 0.01
            tau_res *= 0.01
            t_l, _, sg_l = probe(lo, hi=t_lo, lo=t_lo - coarse)
            lo, t_lo = (lo, t_l) if sg_l.peak_first else (lo0, t_lo0)
            t_h, traj_h, sg_h = probe(hi, hi=t_hi, lo=t_hi - coarse)
            if sg_h.equal:
                hit = (hi, t_h, traj_h)
            elif not sg_h.peak_first:
                t_hi, traj_hi = t_h, traj_h
            else:
                hi, t_hi = hi0, t_hi0
            lo_p1, t_lo_p1 = (None, None) if hit else (hi, t_hi)
            continue
        mid = 0.5 * (lo + hi)
        t_mid, traj_mid, sg_mid = probe(mid, hi=t_lo, lo=t_hi - P.t_tol)
        if sg_mid.equal:
            hit = (mid, t_mid, traj_mid)
        elif sg_mid.peak_first:
            lo, t_lo = mid, t_mid
        else:
            hi, t_hi, traj_hi = mid, t_mid, traj_mid
            lo_p1, t_lo_p1 = mid, t_mid
        history[-1]["bracket"] = [lo, hi]

    # bracket the balanced band on both sides
    tau_e, t_e, traj_e = hit
    a_lo, a_hi, t_a = lo, tau_e, t_e
    while a_hi - a_lo > settings.tau_tol:
        mid = 0.5 * (a_lo + a_hi)
        t_m, _, sg_m = probe(mid, hi=t_lo, lo=t_a - P.t_tol)
        if sg_m.peak_first:
            a_lo, t_lo = mid, t_m
        else:
            a_hi, t_a = mid, t_m
        history[-1]["bracket"] = [a_lo, a_hi]
    b_lo, t_b = tau_e, t_e
    if lo_p1 is None:
        b_hi = tau_e + max(1.0, tau_e)
        while True:
            t_m, _, sg_m = probe(b_hi, hi=t_b)
            if sg_m.peak_last or b_hi >= cap:
                break
            b_lo, t_b = b_hi, t_m
            b_hi = min(2.0 * b_hi, cap)
        lo_p1, t_lo_p1 = (b_hi, t_m) if sg_m.peak_last else (None, None)
    if lo_p1 is not None:
        b_hi, t_bhi = lo_p1, t_lo_p1
        while b_hi - b_lo > settings.tau_tol:
            mid = 0.5 * (b_lo + b_hi)
            t_m, _, sg_m = probe(mid, hi=t_b, lo=t_bhi - P.t_tol)
            if sg_m.peak_last:
                b_hi, t_bhi = mid, t_m
            else:
                b_lo, t_b = mid, t_m
            history[-1]["bracket"] = [b_lo, b_hi]
    tau_a, tau_b = a_hi, b_lo
    best = (tau_e, traj_e)
    if tau_b - tau_a > settings.tau_tol:
        mid = 0.5 * (tau_a + tau_b)
        _, traj_m, sg_m = probe(mid, hi=t_a, lo=t_b - P.t_tol)
        if sg_m.equal:
            best = (mid, traj_m)
    else:
        _, traj_a, sg_a = probe(tau_a, hi=t_lo, lo=t_a - P.t_tol)
        if sg_a.equal:
            best = (tau_a, traj_a)
    return finish(best[1], len(history), True, history)


def _paper_sequence(P, tau2, sigma, t2, t1, probe, finish, history, settings):
    """Running average a_i = (a_{i-1} (i-1) + w) / i between fixed witnesses.

    ``tau2`` has its peak first, ``sigma`` does not; w is the witness on the
    far side of the current iterate.
    """
    alpha = 0.5 * (tau2 + sigma)
    traj = None
    for i in range(1, settings.max_iter + 1):
        t, traj, sg = probe(alpha, hi=t2, lo=t1 - P.t_tol)
        history[-1]["bracket"] = [tau2, sigma]
        if sg.equal:
            return finish(traj, len(history), True, history)
        omega = sigma if sg.peak_first else tau2
        alpha = (alpha * (i - 1) + omega) / i
    raise NotConverged("averaging sequence did not balance the peaks",
                       best=finish(traj, len(history), False, history))


# --------------------------------------------------------------------------
# Bergman


class _Bergman:
    def __init__(self, params, w, basal, settings, x0=None, t_end=None):
        self.params, self.w, self.basal, self.s, self.x0 = params, w, basal, settings, x0
        u0 = PulseInput(basal=basal)
        self.t_end = t_end or default_horizon(params, u0, w, settings.horizon_multiple)
        self.sims = 0

    def response(self, t_on, tau, U) -> Trajectory:
        self.sims += 1
        u = PulseInput.pulse(t_on, tau, U, basal=self.basal)
        t_end = max(self.t_end, u.t_off + 1.0)
        return simulate(self.params, u, self.w, x0=self.x0, t_end=t_end, h=self.s.h,
                        strict_grid=False)


def interlacing(traj, t_from: float | None = None):
    """Lowest glucose before and after the peak that follows ``t_from``.

    ``t_from`` defaults to the bolus time, so the resting value before the
    bolus cannot be mistaken for the peak.
    """
    t, g = np.asarray(traj.times), np.asarray(traj.g)
    t_from = traj.u.t_on if t_from is None else t_from
    i0 = int(np.searchsorted(t, t_from))
    i = i0 + int(np.flatnonzero(g[i0:] >= g[i0:].max())[-1])
    return float(g[i0:i + 1].min()), float(g[i:].min())


def _illinois(f, lo, hi, flo, fhi, xtol, ftol=0.0, one_sided=False, max_iter=80):
    """Root of an increasing f bracketed by f(lo) < 0 < f(hi).

    Returns the final bracket with its values. Stops when the bracket is
    narrower than ``xtol`` or an end is within ``ftol`` of zero (only the
    lower end when ``one_sided``).
    """
    side = 0
    for _ in range(max_iter):
        near = -flo if one_sided else min(-flo, fhi)
        if hi - lo <= xtol or near <= ftol:
            break
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if not (lo + 0.01 * (hi - lo) < x < hi - 0.01 * (hi - lo)):
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx < 0:
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
    return lo, hi, flo, fhi


def bergman_required_bolus(lam, w, params: BergmanParams, basal: float, settings=SolverSettings(),
                           x0=None, t_end=None) -> tuple[float, OptimizationResult]:
    """Impulse amount whose response touches ``lam`` on both sides of its peak.

    Two nested bracketed root searches: amount outside, input time inside.
    For a fixed amount the input time balances the lowest value before the
    peak against the lowest value after it. The amount then sets that
    common minimum to ``lam``. Raises :class:`NotConverged` when no such
    impulse is found within the simulation budget.
    """
    B = _Bergman(params, w, basal, settings, x0, t_end)
    base = B.response(0.0, 0.0, 0.0)
    g0 = float(base.g[0])
    if not lam < g0:
        raise ValidationError(f"lambda = {lam} must lie below the initial glucose {g0:.6g}")
    if base.g.max() <= g0 + settings.shape.touch_rel * max(abs(g0), 1.0):
        return 0.0, _result(base, lam, 0, True, B.sims, limit=None, tol=settings.shape)
    if base.g.min() < lam:
        raise Infeasible(f"the unbolused response already drops below {lam}", bound=float(base.g.min()))
    start = w.drive_start if isinstance(w, FilteredDisturbance) else w.start
    t_first = max(0.0, start - 10.0 * params.longest_time_constant())
    t_last = float(np.asarray(base.times)[int(np.argmax(base.g))])
    ftol = 0.1 * settings.incidence_tol
    state = {"best": None}

    def partial():
        tr = state["best"]
        if tr is None:
            return None
        return OptimizationResult(tr.u, float(tr.g.max()), float(tr.g.min()), None, B.sims, False,
                                  is_incident(tr, lam, settings.incidence_tol), simulations=B.sims,
                                  trajectory=tr)

    def balanced(U):
        """Input time equalising the two minima; returns (t', traj)."""
        memo = {}

        def f(t):
            if B.sims >= settings.max_simulations:
                raise NotConverged(f"simulation budget of {settings.max_simulations} exhausted",
                                   best=partial())
            tr = B.response(t, 0.0, U)
            b, a = interlacing(tr)
            memo[t] = (b - a, tr)
            return b - a

        if "t" in state:
            guess, step = state["t"], 2.0
        else:
            guess, step = 0.5 * (t_first + t_last), 0.05 * (t_last - t_first)
        lo, hi = max(t_first, guess - step), min(t_last, guess + step)
        flo, fhi = f(lo), f(hi)
        while flo >= 0 and lo > t_first:
            hi, fhi = lo, flo
            lo = max(t_first, lo - 2 * step)
            flo = f(lo)
            step *= 2
        while fhi <= 0 and hi < t_last:
            lo, flo = hi, fhi
            hi = min(t_last, hi + 2 * step)
            fhi = f(hi)
            step *= 2
        if flo < 0 < fhi:
            _illinois(f, lo, hi, flo, fhi, settings.t_tol, ftol)
        t = min(memo, key=lambda x: abs(memo[x][0]))
        if flo < 0 < fhi:
            state["t"] = t
        return t, memo[t][1]

    def F(U):
        t, tr = balanced(U)
        v = lam - float(tr.g.min())
        if v <= 0 and (state["best"] is None or v > lam - float(state["best"].g.min())):
            state["best"] = tr
        state["last"] = (U, t, tr, v)
        return v

    hits = {}

    def Fh(U):
        v = F(U)
        hits[U] = state["last"]
        return v

    U_lo, F_lo = 0.0, lam - g0
    U_hi = 1.0
    F_hi = Fh(U_hi)
    while F_hi <= 0:
        U_lo, F_lo = U_hi, F_hi
        U_hi *= 4.0
        if U_hi > 1e8:
            raise Infeasible(f"no bolus brings the response down to {lam}",
                             bound=float(state["last"][2].g.min()))
        F_hi = Fh(U_hi)
    _illinois(Fh, U_lo, U_hi, F_lo, F_hi, 1e-6 * U_hi, ftol, one_sided=True)
    U, t, tr, _ = min((h for h in hits.values() if h[3] <= 0), key=lambda h: -h[3],
                      default=state["last"])
    b, a = interlacing(tr)
    gap = abs(b - a)
    res = OptimizationResult(tr.u, float(tr.g.max()), float(tr.g.min()), None, B.sims, False,
                             is_incident(tr, lam, settings.incidence_tol), simulations=B.sims,
                             trajectory=tr)
    if gap > settings.incidence_tol * max(abs(res.gamma), 1.0) or not res.incident:
        raise NotConverged(f"no impulse found with both minima at {lam} "
                           f"(minima {b:.6g} / {a:.6g})", best=res)
    res.certificate = ShapeCertificate(Shape.INTERLACED, {
        "min_before_peak": b, "min_after_peak": a, "gamma": res.gamma, "t_prime": t}, gap=gap)
    res.converged = True
    return U, res


@dataclass(frozen=True)
class SweepEntry:
    tau: float
    t_prime: float
    gamma: float
    lambda_attained: float
    feasible: bool
    gap: float


@dataclass
class SweepResult:
    entries: list
    monotone: bool
    U: float
    floor: float

    def __post_init__(self):
        taus = [e.tau for e in self.entries]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValidationError("sweep durations must be strictly increasing")

    @property
    def argmin_tau(self) -> float | None:
        ok = [e for e in self.entries if e.feasible]
        return min(ok, key=lambda e: (e.gamma, e.tau)).tau if ok else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "t_prime", "gamma", "lambda_attained", "feasible"])
        for e in self.entries:
            w.writerow([repr(e.tau), repr(e.t_prime), repr(e.gamma), repr(e.lambda_attained),
                        str(e.feasible).lower()])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"U": self.U, "floor": self.floor, "monotone": self.monotone,
                "argmin_tau": self.argmin_tau,
                "entries": [e.__dict__ for e in self.entries]}


def _refine_time(B, tau, U, floor, best, tol, width=1.0):
    """Continuous polish of a grid-best input time.

    Feasible times form a half line near the grid best, so the floor is
    located by bisection and the peak minimised by golden section on the
    feasible part of +-width.
    """
    def ev(t):
        tr = B.response(t, tau, U)
        return float(tr.g.max()), float(tr.g.min()), tr

    t0 = best[0]
    lo = t0 - width
    if ev(lo)[1] < floor:
        a, b = lo, t0
        while b - a > tol:
            m = 0.5 * (a + b)
            if ev(m)[1] >= floor:
                b = m
            else:
                a = m
        lo = b
    hi = t0 + width
    cands = [best]

    def f(t):
        gmax, gmin, tr = ev(t)
        if gmin < floor:
            return math.inf
        cands.append((t, gmax, gmin, tr))
        return gmax

    r = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    f(lo)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return min(cands, key=lambda x: (x[1], x[0]))


def bergman_constrained_sweep(U, durations, floor, w, params: BergmanParams, basal: float,
                              settings=SolverSettings(), t_grid=None, required=None,
                              x0=None, t_end=None, mono_tol: float = 0.0,
                              refine: bool = False) -> SweepResult:
    """gamma(tau) for pulses of fixed amount ``U`` below the required bolus.

    For each tau the input time is the integer grid point with the lowest
    peak among those keeping the minimum at or above ``floor``. With
    ``refine`` that time is then polished continuously within one grid
    step. The curve is monotone when gamma never drops by more than
    ``mono_tol`` as tau grows, ignoring durations whose best response has
    equal peaks.
    """
    if required is not None and U >= required:
        raise ValidationError(f"U = {U} is not below the required bolus {required:.6g}; "
                              "use the unconstrained optimiser")
    durations = [float(t) for t in durations]
    if any(t < 0 for t in durations):
        raise ValidationError("durations must be nonnegative")
    B = _Bergman(params, w, basal, settings, x0, t_end)
    if t_grid is None:
        end = w.support_end if hasattr(w, "support_end") else 0.0
        t_grid = np.arange(0.0, math.floor(end + 150.0) + 1.0)
    entries = []
    for tau in durations:
        best = None
        for t in t_grid:
            tr = B.response(float(t), tau, U)
            g = tr.g
            lo, hi = float(g.min()), float(g.max())
            if lo >= floor - 1e-12 and (best is None or hi < best[1]):
                best = (float(t), hi, lo, tr)
        if best is None:
            entries.append(SweepEntry(tau, math.nan, math.nan, math.nan, False, math.nan))
            continue
        if refine:
            best = _refine_time(B, tau, U, floor, best, settings.t_tol)
        sg = shape_gap(best[3], settings.shape)
        entries.append(SweepEntry(tau, best[0], best[1], best[2], True, float(abs(sg.signed))))
    monotone = True
    prev = None
    for e in entries:
        if not e.feasible or e.gap <= settings.shape.gap_rel * abs(e.gamma):
            continue
        if prev is not None and e.gamma < prev - mono_tol:
            monotone = False
        prev = e.gamma
    return SweepResult(entries, monotone, U, floor)


# --------------------------------------------------------------------------
# brute-force oracle


@dataclass(frozen=True)
class OracleResult:
    t_prime: float
    tau: float
    gamma: float
    lambda_attained: float
    amount: float
    evaluated: int
    feasible_count: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@njit(cache=True)
def _lattice_extrema(dist, table, m, w, scale, out_min, out_max):
    """Row extrema of dist[i] - scale * (table[i - m + n] - table[i - m + n - w]).

    ``w < 0`` drops the second term (impulse: ``table`` is the CDF).
    """
    n = dist.shape[0]
    for j in range(m.shape[0]):
        lo, hi = np.inf, -np.inf
        off = n - m[j]
        for i in range(n):
            k = i + off
            v = table[k]
            if w >= 0 and k - w >= 0:
                v -= table[k - w]
            g = dist[i] - scale * v
            if g < lo:
                lo = g
            if g > hi:
                hi = g
        out_min[j] = lo
        out_max[j] = hi


class _LatticeTables:
    """Closed-form insulin tables on the oracle sampling lattice.

    For t' and tau that are multiples of the sample step (relative to the
    first sample) every response is a shift of one table, so no exponentials
    are evaluated per grid point. Off-lattice values fall back to direct
    evaluation.
    """

    def __init__(self, params, times, dist, h_o):
        self.params, self.times, self.dist, self.h_o = params, times, dist, h_o
        n = len(times)
        lags = h_o * np.arange(-n, n + 1)
        self.H = closed_form.insulin_step_table(params, lags)
        self.F = closed_form.insulin_cdf_table(params, lags)

    def _shift_index(self, x):
        k = (np.asarray(x, float) - self.times[0]) / self.h_o
        ki = np.rint(k)
        return ki.astype(np.int64), bool(np.all(np.abs(k - ki) < 1e-9))

    def extrema(self, t_grid, tau, U):
        """(min g, max g) for every t' in ``t_grid`` with duration tau."""
        t_grid = np.asarray(t_grid, float)
        m, on_lattice = self._shift_index(t_grid)
        w, w_ok = self._shift_index(self.times[0] + tau)
        if on_lattice and w_ok:
            lo, hi = np.empty(len(t_grid)), np.empty(len(t_grid))
            if tau == 0:
                _lattice_extrema(self.dist, self.F, m, -1, float(U), lo, hi)
            else:
                _lattice_extrema(self.dist, self.H, m, int(w), U / tau, lo, hi)
            return lo, hi
        lag = self.times[None, :] - t_grid[:, None]
        if tau == 0:
            X = U * closed_form.insulin_cdf_table(self.params, lag)
        else:
            X = (U / tau) * (closed_form.insulin_step_table(self.params, lag)
                             - closed_form.insulin_step_table(self.params, lag - tau))
        g = self.dist[None, :] - X
        return g.min(axis=1), g.max(axis=1)


def _magdelaine_oracle_block(tables, lam, U, tau, t_grid, tol):
    gmin, gmax = tables.extrema(t_grid, tau, U)
    ok = gmin >= lam - tol
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    j = idx[np.argmin(gmax[idx])]  # argmin returns the first, i.e. smallest t'
    return float(gmax[j]), float(t_grid[j]), float(gmin[j]), int(ok.sum())


def brute_force_oracle(lam, d, params, *, U=None, t_grid=None, tau_grid=None, h_oracle=0.25,
                       t_end=None, basal=0.0, tie_tol=1e-9, feas_tol=1e-9, workers=1,
                       settings=SolverSettings()) -> OracleResult:
    """Exhaustive search over a (t', tau) grid; independent of the solvers.

    Magdelaine responses come from the closed form sampled every
    ``h_oracle`` minutes; Bergman responses from RK4. Defaults: integer t'
    over [0, t_end] and integer tau up to twice the disturbance span. Ties
    within ``tie_tol`` go to the smallest (tau, t').
    """
    magdelaine = isinstance(params, MagdelaineParams)
    if magdelaine:
        params = params.normalized() if params.E else params
        U = required_amount_magdelaine(d, params) if U is None else U
        if U == 0:
            return OracleResult(0.0, 0.0, 0.0, 0.0, 0.0, 1, 1)
    elif U is None:
        raise ValidationError("the Bergman oracle needs an amount")
    span = (d.end - d.start) if isinstance(d, RectangularDisturbance) else (d.drive_end - d.drive_start)
    if t_end is None:
        t_end = default_horizon(params, PulseInput(basal=basal), d, settings.horizon_multiple)
    if t_grid is None:
        t_grid = np.arange(0.0, math.floor(t_end) + 1.0)
    if tau_grid is None:
        tau_grid = np.arange(0.0, math.floor(2 * span) + 1.0)
    t_grid, tau_grid = np.asarray(t_grid, float), np.asarray(tau_grid, float)

    if magdelaine:
        last = max(t_end, float(t_grid.max()) + float(tau_grid.max())
                   + settings.horizon_multiple * params.longest_time_constant())
        t_start = min(0.0, float(t_grid.min()))
        times = t_start + h_oracle * np.arange(int(math.ceil((last - t_start) / h_oracle)) + 1)
        dist_part = params.b * closed_form.cumulative_absorption(times, d, params.alpha5)
        tables = _LatticeTables(params, times, dist_part, h_oracle)

        def block(tau):
            return _magdelaine_oracle_block(tables, lam, U, tau, t_grid, feas_tol)
    else:
        B = _Bergman(params, d, basal, settings, None, None)

        def block(tau):
            best, count = None, 0
            for t in t_grid:
                tr = B.response(float(t), float(tau), U)
                lo, hi = float(tr.g.min()), float(tr.g.max())
                if lo >= lam - feas_tol:
                    count += 1
                    if best is None or hi < best[0]:
                        best = (hi, float(t), lo)
            return None if best is None else (*best, count)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            blocks = list(ex.map(block, tau_grid))
    else:
        blocks = [block(tau) for tau in tau_grid]
    cand = [(b[0], tau, b[1], b[2], b[3]) for tau, b in zip(tau_grid, blocks) if b is not None]
    if not cand:
        raise EmptyFeasibleSet(f"no grid input keeps g >= {lam}", bound=lam)
    gbest = min(c[0] for c in cand)
    tied = [c for c in cand if c[0] <= gbest + tie_tol]
    gam, tau, t, lo, _ = min(tied, key=lambda c: (c[1], c[2]))
    total = len(t_grid) * len(tau_grid)
    return OracleResult(t, float(tau), gam, lo, float(U), total, sum(c[4] for c in cand))


def grid_slack(traj, spacing: float = 1.0) -> float:
    """(grid spacing) x (max |dg/dt|) along ``traj``."""
    return spacing * float(np.max(np.abs(traj.g_dot)))


__all__ = [
    "SolverSettings", "OptimizationResult", "Feasibility", "SweepEntry", "SweepResult", "OracleResult",
    "required_amount_magdelaine", "feasibility_check", "min_duration_at_fixed_time",
    "min_time_at_fixed_duration", "optimize_magdelaine", "bergman_required_bolus",
    "bergman_constrained_sweep", "brute_force_oracle", "grid_slack", "interlacing",
]
