import subprocess
import sys
from pathlib import Path

import pytest

from bolusopt.config import GridSpec, OracleSpec, Scenario, SweepSpec, bundled_scenarios
from bolusopt.errors import ValidationError
from bolusopt.models import MagdelaineParams

ROOT = Path(__file__).resolve().parents[1]


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_round_trip(name):
    sc = Scenario.load(name)
    again = Scenario.loads(sc.dumps())
    assert again == sc
    assert again.dumps() == sc.dumps()


def test_bundled_files_are_current():
    r = subprocess.run([sys.executable, str(ROOT / "scripts" / "make_scenarios.py"), "--check"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stdout + r.stderr


def test_bundled_names():
    assert set(bundled_scenarios()) == {
        "constrained_optimality_example.toml", "numerical_example_blue.toml",
        "numerical_example_orange.toml", "zero_disturbance.toml"}


def test_calibration_recorded():
    for name in ("numerical_example_orange.toml", "numerical_example_blue.toml",
                 "constrained_optimality_example.toml"):
        assert Scenario.load(name).calibration


def test_save_and_load(tmp_path):
    sc = Scenario.load("numerical_example_orange.toml")
    path = tmp_path / "s.toml"
    sc.save(path)
    assert Scenario.load(path) == sc


MINIMAL = """
name = "m"
model = "magdelaine"
lam = -1.0
[params]
alpha2 = 1.0
alpha3 = 0.05
alpha4 = 0.05
alpha5 = 0.1
[disturbance]
kind = "rectangular"
magnitude = 1.0
start = 10.0
end = 20.0
"""


def test_minimal_defaults():
    sc = Scenario.loads(MINIMAL)
    assert sc.grid == GridSpec() and sc.input is None and sc.pulse().amount == 0.0
    assert sc.settings().h == 0.1


@pytest.mark.parametrize("text,match", [
    ("bogus = 1\n" + MINIMAL, "unknown scenario keys"),
    (MINIMAL.replace('model = "magdelaine"', 'model = "other"'), "unknown model"),
    (MINIMAL.replace("alpha5 = 0.1", "alpha5 = -0.1"), "alpha5"),
    (MINIMAL.replace("lam = -1.0\n", ""), "missing 'lam'"),
    (MINIMAL.replace('kind = "rectangular"', 'kind = "square"'), "disturbance kind"),
    (MINIMAL + "[grid]\nh = 0.0\n", "grid step"),
    (MINIMAL + "[solver]\nt_tol = -1.0\n", "t_tol"),
    (MINIMAL + "[solver]\nfoo = 1.0\n", "invalid scenario"),
    ("initial_state = [0.0, 0.0]\n" + MINIMAL, "needs 5 entries"),
    ("name = ", "cannot parse"),
])
def test_invalid_scenarios(text, match):
    with pytest.raises(ValidationError, match=match):
        Scenario.loads(text)


def test_params_must_match_model():
    sc = Scenario.load("constrained_optimality_example.toml")
    with pytest.raises(ValidationError):
        Scenario(name="x", model="magdelaine", params=sc.params, disturbance=sc.disturbance, lam=4.0)


def test_missing_file():
    with pytest.raises(ValidationError, match="not found"):
        Scenario.load("no_such_scenario.toml")


def test_solver_overrides_round_trip():
    sc = Scenario.loads(MINIMAL + "[solver]\ngap_rel = 0.01\nt_min = 0.0\npaper_sequence = true\n")
    s = sc.settings()
    assert s.shape.gap_rel == 0.01 and s.t_min == 0.0 and s.paper_sequence
    assert Scenario.loads(sc.dumps()) == sc


def test_grid_specs():
    assert SweepSpec(t_start=0.0, t_stop=3.0).t_grid() == [0.0, 1.0, 2.0, 3.0]
    t, tau = OracleSpec(t_start=100.0, t_stop=102.0, tau_max=2.0).grids()
    assert list(t) == [100.0, 101.0, 102.0] and list(tau) == [0.0, 1.0, 2.0]
    assert OracleSpec().grids() == (None, None)
    with pytest.raises(ValidationError):
        SweepSpec(t_start=5.0, t_stop=1.0)


def test_e_raw_survives_round_trip():
    p = MagdelaineParams(1.0, 0.05, 0.05, 0.1, E_raw=0.02)
    sc = Scenario(name="e", model="magdelaine", params=p,
                  disturbance=Scenario.loads(MINIMAL).disturbance, lam=-0.5)
    assert Scenario.loads(sc.dumps()).params.E == pytest.approx(0.4)
