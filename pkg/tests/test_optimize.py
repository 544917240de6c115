import numpy as np
import pytest

from bolusopt import closed_form
from bolusopt.analysis import Shape
from bolusopt.config import Scenario
from bolusopt.errors import Infeasible, NoIncidentInput, NotConverged
from bolusopt.models import MagdelaineParams
from bolusopt.optimize import (
    SolverSettings,
    brute_force_oracle,
    feasibility_check,
    grid_slack,
    min_duration_at_fixed_time,
    min_time_at_fixed_duration,
    optimize_magdelaine,
    required_amount_magdelaine,
)
from bolusopt.signals import FilteredDisturbance, PulseInput, RectangularDisturbance
from bolusopt.simulate import simulate

ORANGE = Scenario.load("numerical_example_orange.toml")
BLUE = Scenario.load("numerical_example_blue.toml")
ZERO = RectangularDisturbance()


def ratio_params(r):
    return MagdelaineParams(alpha2=1.0, alpha3=0.05, alpha4=r, alpha5=0.1)


def test_required_amount_examples():
    assert required_amount_magdelaine(ZERO, ratio_params(0.059)) == 0.0
    assert required_amount_magdelaine(ORANGE.disturbance, ratio_params(0.059)) == pytest.approx(2.36)
    assert required_amount_magdelaine(BLUE.disturbance, ratio_params(0.0945)) == pytest.approx(23.625)


def test_required_amount_rejects_offset():
    with pytest.raises(ValueError):
        required_amount_magdelaine(FilteredDisturbance(), ratio_params(0.1))


def test_feasibility_examples():
    p, d = ORANGE.params, ORANGE.disturbance
    bound = -p.b * 40.0
    assert feasibility_check(0.0, d, p).feasible
    f = feasibility_check(bound, d, p)
    assert f.feasible and f.bound == pytest.approx(bound)
    assert not feasibility_check(bound - 1e-9, d, p).feasible
    assert not feasibility_check(0.1, d, p).feasible


def test_min_time_orange_impulse():
    t, res = min_time_at_fixed_duration(0.0, ORANGE.lam, ORANGE.disturbance, ORANGE.params,
                                        settings=ORANGE.settings())
    assert t == pytest.approx(158.0, abs=2.0)
    assert res.incident and res.amount == pytest.approx(2.36, rel=0.02)


def test_min_time_blue_pulse():
    t, res = min_time_at_fixed_duration(315.0, BLUE.lam, BLUE.disturbance, BLUE.params,
                                        settings=BLUE.settings())
    assert t == pytest.approx(133.0, abs=2.0)
    assert res.incident


def test_min_duration_blue():
    tau, res = min_duration_at_fixed_time(133.0, BLUE.lam, BLUE.disturbance, BLUE.params,
                                          settings=BLUE.settings())
    assert tau == pytest.approx(315.0, abs=2.0)
    assert res.lambda_attained >= BLUE.lam


def test_min_duration_impulse_when_early_disturbance():
    # the disturbance is long gone by t' = 400; any lambda the impulse meets gives tau = 0
    d = RectangularDisturbance(5.0, 10.0, 14.0)
    p = ORANGE.params
    lam = 0.9 * feasibility_check(0.0, d, p).bound
    tau, res = min_duration_at_fixed_time(400.0, lam, d, p)
    assert tau == 0.0 and res.input.is_impulse


@pytest.mark.parametrize("fn,arg", [(min_time_at_fixed_duration, 0.0), (min_duration_at_fixed_time, 150.0)])
def test_below_bound_is_infeasible(fn, arg):
    bound = feasibility_check(0.0, ORANGE.disturbance, ORANGE.params).bound
    with pytest.raises(Infeasible) as e:
        fn(arg, bound - 0.01, ORANGE.disturbance, ORANGE.params)
    assert e.value.bound == pytest.approx(bound)


def test_very_long_pulse_has_no_incident_time():
    # with t' >= 0 a very long pulse delivers too little insulin early on to reach the bound
    p, d = ORANGE.params, ORANGE.disturbance
    lam = 0.98 * feasibility_check(0.0, d, p).bound
    with pytest.raises(NoIncidentInput):
        min_time_at_fixed_duration(5000.0, lam, d, p, settings=SolverSettings(t_min=0.0))


def test_min_time_is_minimal():
    s = ORANGE.settings()
    for tau in (0.0, 20.0):
        t, _ = min_time_at_fixed_duration(tau, ORANGE.lam, ORANGE.disturbance, ORANGE.params, settings=s)
        u = PulseInput.pulse(t - s.t_tol, tau, 2.36)
        g = simulate(ORANGE.params, u, ORANGE.disturbance, h=s.h, strict_grid=False).g
        assert g.min() < ORANGE.lam


def test_min_duration_is_minimal():
    s = BLUE.settings()
    tau, _ = min_duration_at_fixed_time(133.0, BLUE.lam, BLUE.disturbance, BLUE.params, settings=s)
    U = required_amount_magdelaine(BLUE.disturbance, BLUE.params)
    g = simulate(BLUE.params, PulseInput.pulse(133.0, tau - s.tau_tol, U), BLUE.disturbance,
                 h=s.h, strict_grid=False).g
    assert g.min() < BLUE.lam


def test_optimize_orange_type1():
    res = optimize_magdelaine(ORANGE.lam, ORANGE.disturbance, ORANGE.params, ORANGE.settings())
    assert res.converged and res.certificate.shape == Shape.TYPE1 and res.input.is_impulse
    assert res.t_prime == pytest.approx(158.0, abs=2.0)
    assert res.amount == pytest.approx(2.36, rel=0.02)


def test_optimize_blue_type2():
    res = optimize_magdelaine(BLUE.lam, BLUE.disturbance, BLUE.params, BLUE.settings())
    assert res.converged and res.certificate.shape == Shape.TYPE2
    assert (res.t_prime, res.tau) == (pytest.approx(133.0, abs=2.0), pytest.approx(315.0, abs=2.0))
    assert res.input.bolus == pytest.approx(0.075, rel=0.02)
    assert res.lambda_attained == pytest.approx(-1.5, abs=1e-3)
    gap = res.certificate.gap
    assert gap <= 1e-3 * abs(res.gamma)


def test_duration_brackets_contract():
    s = BLUE.settings()
    res = optimize_magdelaine(BLUE.lam, BLUE.disturbance, BLUE.params, s)
    brackets = [h["bracket"] for h in res.history if "bracket" in h]
    runs = [[brackets[0]]]
    for prev, cur in zip(brackets, brackets[1:]):
        if prev[0] <= cur[0] and cur[1] <= prev[1]:
            runs[-1].append(cur)
        else:
            runs.append([cur])
    # balancing bisection, then one pass per side of the balanced band
    assert len(runs) <= 3
    assert all(r[-1][1] - r[-1][0] <= 2 * s.tau_tol for r in runs[1:])


BLUE_BAND = (274.0, 356.0)  # durations whose incident response has gamma = 0


def test_optimize_zero_disturbance():
    res = optimize_magdelaine(0.0, ZERO, ORANGE.params)
    assert res.amount == 0.0 and res.gamma == 0.0 and res.converged


def test_optimize_infeasible_lambda():
    with pytest.raises(Infeasible):
        optimize_magdelaine(-100.0, ORANGE.disturbance, ORANGE.params)


def test_averaging_sequence_reaches_the_same_duration():
    s = BLUE.settings(paper_sequence=True, max_iter=400)
    try:
        res = optimize_magdelaine(BLUE.lam, BLUE.disturbance, BLUE.params, s)
    except NotConverged as e:
        pytest.fail(f"averaging sequence did not converge: {e}")
    assert res.certificate.shape == Shape.TYPE2
    assert BLUE_BAND[0] <= res.tau <= BLUE_BAND[1]
    assert res.gamma == pytest.approx(0.0, abs=1e-3)


def test_gamma_monotone_in_lambda_at_fixed_duration():
    bound = feasibility_check(0.0, ORANGE.disturbance, ORANGE.params).bound
    gammas = []
    for frac in (0.2, 0.4, 0.6, 0.8):
        _, res = min_time_at_fixed_duration(0.0, frac * bound, ORANGE.disturbance, ORANGE.params)
        gammas.append(res.gamma)
    assert all(b <= a + 1e-9 for a, b in zip(gammas, gammas[1:]))


def test_total_response_area_is_affine_in_input_mean_time():
    p, d = BLUE.params, BLUE.disturbance
    U = required_amount_magdelaine(d, p)
    t = np.arange(0.0, 4000.0, 0.05)
    for t_on, tau in ((120.0, 0.0), (100.0, 300.0), (200.0, 40.0)):
        g = closed_form.glucose(t, p, PulseInput.pulse(t_on, tau, U), d)
        area = np.trapezoid(g, t)
        mean_shift = (t_on + tau / 2 + 2 / p.alpha3) - ((d.start + d.end) / 2 + 2 / p.alpha5)
        assert area == pytest.approx(p.b * d.excess_integral() * mean_shift, rel=1e-5)


def test_oracle_on_blue_window():
    t_grid, tau_grid = BLUE.oracle.grids()
    o = brute_force_oracle(BLUE.lam, BLUE.disturbance, BLUE.params, t_grid=t_grid, tau_grid=tau_grid)
    res = optimize_magdelaine(BLUE.lam, BLUE.disturbance, BLUE.params, BLUE.settings())
    # gamma ties across the band go to the shortest duration
    assert BLUE_BAND[0] <= o.tau <= BLUE_BAND[1]
    assert o.gamma == pytest.approx(res.gamma, abs=1e-6)
    assert o.gamma >= res.gamma - grid_slack(res.trajectory, 1.0)


def test_oracle_zero_disturbance():
    o = brute_force_oracle(0.0, ZERO, ORANGE.params)
    assert o.amount == 0.0 and o.gamma == 0.0


def test_oracle_lattice_matches_direct_evaluation():
    p, d = ORANGE.params, ORANGE.disturbance
    t_grid, tau_grid = np.arange(140.0, 171.0), np.array([0.0, 3.0, 7.0])
    o = brute_force_oracle(ORANGE.lam, d, p, t_grid=t_grid, tau_grid=tau_grid)
    U = required_amount_magdelaine(d, p)
    times = np.arange(0.0, 171.0 + 7.0 + 15.0 / 0.05 + 1e-9, 0.25)
    best = None
    for tau in tau_grid:
        for t in t_grid:
            g = closed_form.glucose(times, p, PulseInput.pulse(t, tau, U), d)
            if g.min() >= ORANGE.lam - 1e-9 and (best is None or g.max() < best[0] - 1e-9):
                best = (g.max(), tau, t)
    assert (o.gamma, o.tau, o.t_prime) == (pytest.approx(best[0], abs=1e-12), best[1], best[2])


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(t_tol=0.0)
    with pytest.raises(ValueError):
        SolverSettings(max_iter=0)


def test_result_serialises():
    res = optimize_magdelaine(ORANGE.lam, ORANGE.disturbance, ORANGE.params, ORANGE.settings())
    d = res.to_dict()
    assert d["input"]["tau"] == 0.0 and d["input"]["bolus_rate"] is None
    assert d["certificate"]["shape"] == "Type1"
