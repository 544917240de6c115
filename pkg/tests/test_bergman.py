import numpy as np
import pytest

from bolusopt.analysis import Shape
from bolusopt.config import Scenario
from bolusopt.errors import ValidationError
from bolusopt.optimize import (
    SweepEntry,
    SweepResult,
    bergman_constrained_sweep,
    bergman_required_bolus,
    brute_force_oracle,
    interlacing,
)
from bolusopt.signals import FilteredDisturbance, PulseInput
from bolusopt.simulate import simulate

SC = Scenario.load("constrained_optimality_example.toml")
T_GRID = np.arange(120.0, 220.0)


@pytest.fixture(scope="module")
def required():
    return bergman_required_bolus(SC.lam, SC.disturbance, SC.params, SC.basal, SC.settings())


def sweep(durations, U=20.0, **kw):
    kw.setdefault("t_grid", T_GRID)
    return bergman_constrained_sweep(U, durations, SC.lam, SC.disturbance, SC.params, SC.basal,
                                     SC.settings(), **kw)


def test_required_bolus_calibration_targets(required):
    U, res = required
    assert U == pytest.approx(35.15, rel=0.01)
    assert res.t_prime == pytest.approx(175.0, abs=2.0)
    assert res.gamma == pytest.approx(8.5, rel=0.01)


def test_required_bolus_touches_floor_on_both_sides(required):
    _, res = required
    assert res.converged and res.certificate.shape == Shape.INTERLACED
    before, after = interlacing(res.trajectory)
    assert before == pytest.approx(SC.lam, abs=1e-3) and after == pytest.approx(SC.lam, abs=1e-3)


def test_doubled_bolus_undercuts_floor(required):
    U, res = required
    tr = simulate(SC.params, PulseInput.impulse(res.t_prime, 2 * U, SC.basal), SC.disturbance,
                  t_end=float(res.trajectory.times[-1]), strict_grid=False)
    assert tr.g.min() < SC.lam


def test_no_excess_needs_no_bolus():
    w = FilteredDisturbance(drive=0.0)
    U, res = bergman_required_bolus(SC.lam, w, SC.params, SC.basal, SC.settings())
    assert U == 0.0 and res.amount == 0.0


def test_floor_above_start_rejected():
    with pytest.raises(ValidationError):
        bergman_required_bolus(10.0, SC.disturbance, SC.params, SC.basal)


def test_sweep_single_duration():
    res = sweep([0.0])
    assert len(res.entries) == 1 and res.monotone and res.argmin_tau == 0.0


def test_sweep_argmin_at_impulse(required):
    res = sweep([0.0, 30.0, 60.0], required=required[0])
    assert res.monotone and res.argmin_tau == 0.0
    assert all(e.feasible and e.lambda_attained >= SC.lam for e in res.entries)


def test_sweep_rejects_required_amount(required):
    U = required[0]
    with pytest.raises(ValidationError, match="unconstrained"):
        sweep([0.0], U=U, required=U)


def test_sweep_rejects_bad_durations():
    with pytest.raises(ValidationError):
        sweep([30.0, 0.0])
    with pytest.raises(ValidationError):
        sweep([-1.0])


def test_refined_curve_strictly_increasing():
    res = sweep([0.0, 30.0, 60.0], refine=True)
    gammas = [e.gamma for e in res.entries]
    assert all(b > a for a, b in zip(gammas, gammas[1:]))
    plain = sweep([0.0, 30.0, 60.0])
    assert all(r.gamma <= p.gamma + 1e-12 for r, p in zip(res.entries, plain.entries))


def test_infeasible_entries_flagged():
    res = sweep([0.0], t_grid=np.arange(0.0, 5.0), U=60.0)
    assert not res.entries[0].feasible and res.argmin_tau is None


def test_sweep_matches_oracle_row():
    res = sweep([30.0])
    o = brute_force_oracle(SC.lam, SC.disturbance, SC.params, U=20.0, t_grid=T_GRID,
                           tau_grid=[30.0], basal=SC.basal)
    e = res.entries[0]
    assert (o.t_prime, o.gamma) == (e.t_prime, pytest.approx(e.gamma, abs=1e-12))


def test_sweep_csv():
    res = SweepResult([SweepEntry(0.0, 166.0, 10.4, 4.1, True, 0.3)], True, 20.0, 4.0)
    assert res.to_csv().splitlines() == ["tau,t_prime,gamma,lambda_attained,feasible",
                                         "0.0,166.0,10.4,4.1,true"]
