import numpy as np
import pytest

from bolusopt.models import (
    BergmanParams,
    BergmanState,
    MagdelaineParams,
    MagdelaineState,
    basal_for_steady_state,
    bergman_equilibrium,
    bergman_vector_field,
    magdelaine_equilibrium,
    magdelaine_vector_field,
    model_of,
    params_hash,
)
from bolusopt.signals import FilteredDisturbance, PulseInput, RectangularDisturbance
from bolusopt.simulate import _deriv, _encode_params, simulate

P = MagdelaineParams(alpha2=1.0, alpha3=0.05, alpha4=0.06, alpha5=0.2)
B = BergmanParams(a=0.02, b=1.0, c=0.03, d=0.025, k=2.0, G=0.05)


def test_magdelaine_zero_state_is_equilibrium():
    assert np.all(magdelaine_vector_field(MagdelaineState(), 0.0, 0.0, P) == 0.0)


def test_magdelaine_basal_holds_glucose():
    p = MagdelaineParams(alpha2=0.8, alpha3=0.05, alpha4=0.05, alpha5=0.1, E_raw=0.2)
    x0 = magdelaine_equilibrium(p)
    dx = magdelaine_vector_field(x0, basal_for_steady_state(p), 0.0, p)
    assert np.allclose(dx, 0.0, atol=1e-15)


def test_magdelaine_x3_substitution():
    dx = magdelaine_vector_field(MagdelaineState(x3=1.0), 0.0, 0.0, P)
    assert dx == pytest.approx([0.0, 0.05, -0.05, 0.0, 0.0])


def test_aliases_track_rates():
    assert P.a is P.alpha2 and P.b is P.alpha4
    assert P.ratio == P.alpha4 / P.alpha2


@pytest.mark.parametrize("field", ["alpha2", "alpha3", "alpha4", "alpha5"])
def test_magdelaine_rejects_nonpositive(field):
    kw = dict(alpha2=1.0, alpha3=1.0, alpha4=1.0, alpha5=1.0)
    kw[field] = 0.0
    with pytest.raises(ValueError):
        MagdelaineParams(**kw)


def test_bergman_rejects_nonpositive():
    with pytest.raises(ValueError):
        BergmanParams(a=1, b=1, c=1, d=1, k=1, G=0)


@pytest.mark.parametrize("a,b,E,expected", [(2.0, 1.0, 4.0, 2.0), (0.7, 0.7, 3.0, 3.0)])
def test_basal_for_steady_state(a, b, E, expected):
    # E given post-normalisation, so E_raw = b * E
    p = MagdelaineParams(alpha2=a, alpha3=0.05, alpha4=b, alpha5=0.1, E_raw=b * E)
    assert basal_for_steady_state(p) == pytest.approx(expected)


def test_basal_zero_without_production():
    assert basal_for_steady_state(P) == 0.0


def test_bergman_insulin_free_equilibrium():
    w = 0.3
    dx = bergman_vector_field(BergmanState(g=w / B.G), 0.0, w, B)
    assert dx[3] == pytest.approx(0.0, abs=1e-15)


def test_bergman_basal_equilibrium():
    x0 = bergman_equilibrium(B, basal=0.04, w_bar=1.0)
    assert x0.x == pytest.approx(B.b * B.k * 0.04)
    assert x0.g == pytest.approx(1.0 / (x0.x + B.G))
    assert np.allclose(bergman_vector_field(x0, 0.04, 1.0, B), 0.0, atol=1e-15)


def test_bergman_z_substitution():
    dx = bergman_vector_field(BergmanState(z=1.0), 0.0, 0.0, B)
    assert dx == pytest.approx([0.0, B.c, -B.d, 0.0])


def test_compiled_field_matches_reference():
    rng = np.random.default_rng(3)
    for params, n, ref in ((P, 5, magdelaine_vector_field), (B, 4, bergman_vector_field)):
        code, p = _encode_params(params)
        for _ in range(20):
            x = rng.normal(size=n)
            u, d = rng.uniform(0, 2, 2)
            out = np.empty(n)
            _deriv(code, p, x, u, d, out)
            assert np.allclose(out, ref(x, u, d, params), rtol=1e-14, atol=1e-15)


def test_offset_equivalence():
    phys = MagdelaineParams(alpha2=1.0, alpha3=0.05, alpha4=0.06, alpha5=0.2, E_raw=0.03)
    d = RectangularDisturbance(1.0, 20.0, 60.0)
    u = PulseInput.pulse(30.0, 40.0, 2.0)
    ub = basal_for_steady_state(phys)
    tp = simulate(phys, PulseInput.pulse(30.0, 40.0, 2.0, basal=ub), d, t_end=400.0)
    tn = simulate(phys.normalized(), u, d, t_end=400.0)
    diff = tp.g - tn.g
    assert np.max(np.abs(diff - diff[0])) < 1e-9


def test_bergman_positive_and_nonnegative_chain():
    w = FilteredDisturbance(scale=0.5)
    x0 = bergman_equilibrium(B, 0.01, w.offset)
    tr = simulate(B, PulseInput.pulse(150.0, 30.0, 50.0, basal=0.01), w, x0=x0, t_end=800.0)
    assert np.all(tr.g > 0)
    assert np.all(tr.states[:, :3] >= -1e-12)


def test_magdelaine_chain_nonnegative():
    d = RectangularDisturbance(2.0, 10.0, 30.0)
    tr = simulate(P, PulseInput.pulse(5.0, 10.0, 3.0), d, t_end=300.0)
    assert np.all(tr.states[:, 2:] >= -1e-12)


def test_hash_and_model_id():
    assert params_hash(P) == params_hash(MagdelaineParams(1.0, 0.05, 0.06, 0.2))
    assert params_hash(P) != params_hash(B)
    assert model_of(P) == "magdelaine" and model_of(B) == "bergman"
    with pytest.raises(TypeError):
        model_of(object())
