"""Randomised invariants (hypothesis)."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bolusopt import closed_form
from bolusopt.analysis import crossing_count
from bolusopt.models import BergmanParams, BergmanState, MagdelaineParams
from bolusopt.optimize import required_amount_magdelaine
from bolusopt.signals import FilteredDisturbance, PulseInput, RectangularDisturbance, is_nested
from bolusopt.simulate import simulate

FAST = settings(max_examples=40, deadline=None)

rates = st.floats(0.02, 0.3)
times = st.floats(-50.0, 300.0)
durations = st.floats(0.0, 200.0)
amounts = st.floats(0.0, 50.0)


@st.composite
def magdelaine(draw):
    a = draw(st.floats(0.3, 1.5))
    return MagdelaineParams(alpha2=a, alpha3=draw(st.floats(0.03, 0.1)),
                            alpha4=a * draw(st.floats(0.03, 0.12)), alpha5=draw(rates))


@st.composite
def rectangles(draw, min_span=0.5):
    start = draw(st.floats(0.0, 200.0))
    return RectangularDisturbance(draw(st.floats(0.0, 20.0)), start, start + draw(st.floats(min_span, 150.0)))


@st.composite
def pulses(draw):
    tau = draw(durations)
    tau = 0.0 if tau < 0.5 else tau
    return PulseInput.pulse(draw(times), tau, draw(amounts))


@FAST
@given(pulses(), st.floats(-1e3, 1e3))
def test_amount_translation_invariant(u, t):
    assert u.shifted(t).amount == u.amount


@FAST
@given(pulses(), pulses())
def test_nesting_is_strict_order(u, v):
    assert not is_nested(u, u)
    assert not (is_nested(u, v) and is_nested(v, u))


@FAST
@given(rectangles(), st.floats(-10.0, 500.0), st.floats(0.0, 100.0))
def test_partial_integrals_monotone(d, t, dt):
    assert 0.0 <= d.integral(t) <= d.integral(t + dt) <= d.integral() + 1e-12


@FAST
@given(magdelaine(), rectangles(), pulses())
def test_rk4_matches_closed_form(p, d, u):
    t0 = min(0.0, np.floor(u.t_on) - 1.0)
    tr = simulate(p, u, d, t0=t0, t_end=700.0, h=0.1, strict_grid=False)
    exact = closed_form.glucose(tr.times, p, u, d)
    scale = 1.0 + np.max(np.abs(exact))
    assert np.max(np.abs(tr.g - exact)) < 1e-6 * scale


@FAST
@given(magdelaine(), rectangles(min_span=2.0), st.floats(0.0, 300.0), durations)
def test_adequate_inputs_return_to_zero(p, d, t_on, tau):
    U = required_amount_magdelaine(d, p)
    u = PulseInput.pulse(t_on, tau if tau >= 1.0 else 0.0, U)
    t = np.array([max(d.end, u.t_off) + 60.0 / min(p.alpha3, p.alpha5)])
    assert abs(closed_form.glucose(t, p, u, d)[0]) < 1e-6 * (1.0 + p.b * d.integral())


@FAST
@given(magdelaine(), rectangles(min_span=2.0), durations, st.floats(0.0, 250.0), st.floats(0.1, 50.0))
def test_min_glucose_increases_with_later_input(p, d, tau, t1, dt):
    U = required_amount_magdelaine(d, p)
    t = np.arange(0.0, 2000.0, 0.5)
    g1 = closed_form.glucose(t, p, PulseInput.pulse(t1, tau, U), d).min()
    g2 = closed_form.glucose(t, p, PulseInput.pulse(t1 + dt, tau, U), d).min()
    assert g2 >= g1 - 1e-9


@settings(max_examples=30, deadline=None)
@given(magdelaine(), rectangles(min_span=2.0), pulses(), pulses())
def test_crossing_bounds(p, d, u, v):
    U = required_amount_magdelaine(d, p) or 1.0
    u = PulseInput.pulse(u.t_on, u.duration, U)
    v = PulseInput.pulse(v.t_on, v.duration, U)
    t0 = min(0.0, np.floor(min(u.t_on, v.t_on)) - 1.0)
    tu = simulate(p, u, d, t0=t0, t_end=1500.0, strict_grid=False)
    tv = simulate(p, v, d, t0=t0, t_end=1500.0, strict_grid=False)
    n, _ = crossing_count(tu, tv, tol=1e-6 * U * p.a)
    assert n <= (2 if is_nested(u, v) or is_nested(v, u) else 1)


@st.composite
def bergman(draw):
    return BergmanParams(a=draw(rates), b=draw(st.floats(0.5, 2.0)), c=draw(rates), d=draw(rates),
                         k=draw(st.floats(0.5, 3.0)), G=draw(st.floats(0.01, 0.1)))


@FAST
@given(bergman(), st.floats(0.0, 0.05), st.floats(0.0, 2.0), pulses(), st.floats(0.1, 20.0))
def test_bergman_positivity(p, basal, scale, u, g0):
    u = PulseInput.pulse(max(u.t_on, 0.0), u.duration, u.amount, basal)
    w = FilteredDisturbance(scale=scale)
    tr = simulate(p, u, w, x0=BergmanState(g=g0), t_end=600.0, strict_grid=False)
    assert np.all(tr.g > 0)
    assert np.all(tr.states[:, :3] >= -1e-12)
