"""Invariant checks run against one scenario (``bolusopt verify``).

Every check returns ``{"name", "passed", "detail", "value"}`` where value is
the measured quantity the pass/fail decision was based on.
"""
from __future__ import annotations

import numpy as np

from . import optimize as opt
from .analysis import Shape, crossing_count
from .errors import BolusOptError, Infeasible
from .models import MAGDELAINE, bergman_equilibrium
from .signals import FilteredDisturbance, PulseInput, is_nested
from .simulate import default_horizon, simulate

STEP_HALVING_TOL = 1e-3
NARROW_PULSE = 1e-2
SETTLE_TOL = 1e-3
EPS_BOUND = 1e-3


def _check(name, passed, detail, value=None) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail,
            "value": None if value is None else float(value)}


def _guard(name, fn) -> dict:
    try:
        return fn()
    except BolusOptError as e:
        return _check(name, False, f"{type(e).__name__}: {e}")


# ---------------------------------------------------------------- shared


def check_step_halving(params, u, d, h, x0=None, t_end=None) -> dict:
    t_end = t_end or default_horizon(params, u, d)
    g1 = simulate(params, u, d, x0=x0, t_end=t_end, h=h, strict_grid=False).g.max()
    g2 = simulate(params, u, d, x0=x0, t_end=t_end, h=h / 2, strict_grid=False).g.max()
    diff = abs(float(g1) - float(g2))
    return _check("step_halving", diff < STEP_HALVING_TOL,
                  f"|gamma(h) - gamma(h/2)| = {diff:.3g} at h = {h}", diff)


def check_narrow_pulse(params, t_on, amount, d, h, basal=0.0, x0=None, t_end=None) -> dict:
    imp = PulseInput.impulse(t_on, amount, basal)
    pul = PulseInput.pulse(t_on, NARROW_PULSE, amount, basal)
    t_end = t_end or default_horizon(params, pul, d)
    gi = simulate(params, imp, d, x0=x0, t_end=t_end, h=h, strict_grid=False).g
    gp = simulate(params, pul, d, x0=x0, t_end=t_end, h=h, strict_grid=False).g
    diff = abs(float(gi.max()) - float(gp.max()))
    return _check("impulse_vs_narrow_pulse", diff < STEP_HALVING_TOL,
                  f"|gamma(impulse) - gamma(tau = {NARROW_PULSE})| = {diff:.3g}", diff)


# ---------------------------------------------------------------- Magdelaine


def check_adequacy(params, d, h) -> dict:
    U = opt.required_amount_magdelaine(d, params)
    M = d.excess_integral()
    ratio_err = abs(U / M - params.ratio) / params.ratio if M else 0.0
    u = PulseInput.pulse(d.start, d.span, U)
    traj = simulate(params, u, d, h=h)
    X = traj.integral(1)
    sim_err = abs(X - params.ratio * M) / max(params.ratio * M, 1e-300) if M else abs(X)
    settle = abs(float(traj.g[-1]))
    ok = ratio_err < 1e-9 and sim_err < 1e-4 and settle < SETTLE_TOL
    return _check("adequacy_identity", ok,
                  f"amount ratio error {ratio_err:.2e}, integral(x) error {sim_err:.2e}, "
                  f"|g(t_end)| = {settle:.2e}", sim_err)


def check_feasibility_bound(params, d, settings) -> dict:
    bound = opt.feasibility_check(0.0, d, params).bound
    if bound == 0.0:
        return _check("feasibility_bound", True, "zero disturbance: only lambda = 0 is feasible", 0.0)
    _, res = opt.min_time_at_fixed_duration(0.0, bound + EPS_BOUND, d, params, settings=settings)
    above = res.incident
    try:
        opt.min_time_at_fixed_duration(0.0, bound - EPS_BOUND, d, params, settings=settings)
        below = False
    except Infeasible:
        below = True
    return _check("feasibility_bound", above and below,
                  f"bound -b*M = {bound:.6g}: incident above = {above}, infeasible below = {below}",
                  bound)


def random_pulse_pair(rng, d, U):
    """Two pulses of amount U near the disturbance, nested or not at random."""
    lo, hi = d.start - 100.0, d.end + 100.0
    t1 = rng.uniform(lo, hi)
    tau1 = rng.uniform(1.0, 200.0)
    if rng.random() < 0.5:
        t2 = rng.uniform(t1 + 0.5, t1 + tau1 - 0.5) if tau1 > 1.0 else t1 + 0.25 * tau1
        tau2 = rng.uniform(0.0, t1 + tau1 - t2 - 0.25)
    else:
        t2 = rng.uniform(lo, hi)
        tau2 = rng.uniform(0.0, 200.0)
    return PulseInput.pulse(t1, tau1, U), PulseInput.pulse(t2, tau2, U)


def check_crossings(params, d, h, rng, n_pairs) -> dict:
    U = opt.required_amount_magdelaine(d, params) or 1.0
    viol, nested_n = 0, 0
    for _ in range(n_pairs):
        u, v = random_pulse_pair(rng, d, U)
        t0 = min(0.0, np.floor(min(u.t_on, v.t_on) / h) * h - h)
        t_end = max(default_horizon(params, u, d), default_horizon(params, v, d))
        tu = simulate(params, u, d, t0=t0, t_end=t_end, h=h, strict_grid=False)
        tv = simulate(params, v, d, t0=t0, t_end=t_end, h=h, strict_grid=False)
        n, _ = crossing_count(tu, tv, tol=1e-6 * max(U * params.a, 1e-12))
        nested = is_nested(u, v) or is_nested(v, u)
        nested_n += nested
        limit = 2 if nested else 1
        viol += n > limit
    return _check("crossing_bounds", viol == 0,
                  f"{n_pairs} pairs ({nested_n} nested), {viol} violations", viol)


def run_oracle(sc, **kw) -> opt.OracleResult:
    """Brute-force oracle on the scenario's oracle grid."""
    t_grid, tau_grid = sc.oracle.grids()
    return opt.brute_force_oracle(sc.lam, sc.disturbance, sc.params, t_grid=t_grid, tau_grid=tau_grid,
                                  h_oracle=sc.oracle.sample_step, settings=sc.settings(), **kw)


def check_optimization(sc, settings) -> list[dict]:
    res = opt.optimize_magdelaine(sc.lam, sc.disturbance, sc.params, settings)
    cert = res.certificate
    if cert is None:
        shape_ok = False
    elif cert.shape == Shape.TYPE1:
        shape_ok = res.input.is_impulse
    else:
        # gamma = 0 leaves no room for a gap, so equality is required exactly
        shape_ok = cert.shape == Shape.TYPE2 and cert.gap <= settings.shape.gap_rel * abs(res.gamma)
    checks = [_check("optimization_certificate", res.converged and shape_ok,
                     f"t' = {res.t_prime:.4f}, tau = {res.tau:.4f}, "
                     f"shape = {cert.shape.value if cert else None}", res.gamma)]
    o = run_oracle(sc)
    gap = abs(res.gamma - o.gamma)
    slack = opt.grid_slack(res.trajectory, sc.oracle.t_step)
    checks.append(_check("oracle_agreement", gap <= slack,
                         f"oracle (t' = {o.t_prime}, tau = {o.tau}, gamma = {o.gamma:.6g}), "
                         f"gap {gap:.3g} <= slack {slack:.3g}", gap))
    return checks


def _verify_magdelaine(sc, rng, n_pairs) -> list[dict]:
    p, d, h = sc.params, sc.disturbance, sc.grid.h
    settings = sc.settings()
    out = [
        _guard("adequacy_identity", lambda: check_adequacy(p, d, h)),
        _guard("feasibility_bound", lambda: check_feasibility_bound(p, d, settings)),
        _guard("crossing_bounds", lambda: check_crossings(p, d, h, rng, n_pairs)),
    ]
    u = sc.pulse()
    if u.amount == 0:
        u = PulseInput.pulse(d.start, d.span, opt.required_amount_magdelaine(d, p))
    out.append(_guard("step_halving", lambda: check_step_halving(p, u, d, h)))
    out.append(_guard("impulse_vs_narrow_pulse", lambda: check_narrow_pulse(p, u.t_on, u.amount, d, h)))
    try:
        out.extend(check_optimization(sc, settings))
    except BolusOptError as e:
        out.append(_check("optimization_certificate", False, f"{type(e).__name__}: {e}"))
    return out


# ---------------------------------------------------------------- Bergman


def check_equilibrium(params, basal, w, h) -> dict:
    w_bar = w.offset if isinstance(w, FilteredDisturbance) else 0.0
    rest = FilteredDisturbance(drive=0.0, offset=w_bar) if isinstance(w, FilteredDisturbance) else w
    x0 = bergman_equilibrium(params, basal, w_bar)
    traj = simulate(params, PulseInput(basal=basal), rest, t_end=500.0, h=h)
    drift = float(np.max(np.abs(traj.g - x0.g)))
    return _check("basal_equilibrium", drift < 1e-9, f"max |g - g*| = {drift:.2e} at g* = {x0.g:.6g}",
                  drift)


def check_required_bolus(sc, settings) -> tuple[list[dict], float | None]:
    U, res = opt.bergman_required_bolus(sc.lam, sc.disturbance, sc.params, sc.basal, settings,
                                        x0=sc.x0, t_end=sc.grid.t_end)
    ok = res.converged and res.certificate is not None and res.certificate.shape == Shape.INTERLACED
    checks = [_check("required_bolus_interlaced", ok,
                     f"U = {U:.6g} at t' = {res.t_prime:.4f}, gamma = {res.gamma:.6g}, "
                     f"{res.simulations} simulations", U)]
    if U > 0:
        tr = simulate(sc.params, PulseInput.impulse(res.t_prime, 2 * U, sc.basal), sc.disturbance,
                      x0=sc.x0, t_end=res.trajectory.times[-1], h=settings.h, strict_grid=False)
        low = float(tr.g.min())
        checks.append(_check("doubled_bolus_undercuts", low < sc.lam,
                             f"min g with 2U = {low:.6g} against lambda = {sc.lam}", low))
    return checks, U


def _verify_bergman(sc) -> list[dict]:
    p, w, h = sc.params, sc.disturbance, sc.grid.h
    settings = sc.settings()
    out = [_guard("basal_equilibrium", lambda: check_equilibrium(p, sc.basal, w, h))]
    u = sc.pulse()
    out.append(_guard("step_halving", lambda: check_step_halving(p, u, w, h, sc.x0, sc.grid.t_end)))
    if u.amount > 0:
        out.append(_guard("impulse_vs_narrow_pulse", lambda: check_narrow_pulse(
            p, u.t_on, u.amount, w, h, sc.basal, sc.x0, sc.grid.t_end)))
    try:
        checks, required = check_required_bolus(sc, settings)
        out.extend(checks)
    except BolusOptError as e:
        out.append(_check("required_bolus_interlaced", False, f"{type(e).__name__}: {e}"))
        required = None
    if sc.amount is not None and sc.sweep is not None and required is not None:
        try:
            res = opt.bergman_constrained_sweep(sc.amount, sc.sweep.durations, sc.lam, w, p, sc.basal,
                                                settings, t_grid=sc.sweep.t_grid(), required=required,
                                                x0=sc.x0, t_end=sc.grid.t_end, refine=sc.sweep.refine)
            ok = res.monotone and res.argmin_tau == min(sc.sweep.durations)
            out.append(_check("sweep_monotone", ok, f"monotone = {res.monotone}, argmin tau = "
                              f"{res.argmin_tau}", res.argmin_tau))
        except BolusOptError as e:
            out.append(_check("sweep_monotone", False, f"{type(e).__name__}: {e}"))
    return out


def verify_scenario(sc, seed: int = 0, n_pairs: int = 200) -> list[dict]:
    """Run the invariant suite for ``sc``; randomised parts draw from ``seed``."""
    if sc.model == MAGDELAINE:
        return _verify_magdelaine(sc, np.random.default_rng(seed), n_pairs)
    return _verify_bergman(sc)
