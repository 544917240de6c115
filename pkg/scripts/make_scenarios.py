"""Regenerate the bundled scenario files from the calibrated parameter sets.

Run from the repository root:

    python scripts/make_scenarios.py [--check]

With ``--check`` nothing is written; the script exits 1 if a bundled file
differs from what it would generate.
"""
import argparse
import sys
from pathlib import Path

from bolusopt.config import GridSpec, InputSpec, OracleSpec, Scenario, SweepSpec
from bolusopt.models import BERGMAN, MAGDELAINE, BergmanParams, MagdelaineParams
from bolusopt.signals import FilteredDisturbance, RectangularDisturbance

OUT = Path(__file__).resolve().parents[1] / "src" / "bolusopt" / "scenarios"

# Magdelaine: alpha3 is shared; b/a is fixed by the reported amounts (2.36 / 40
# and 23.625 / 250), the remaining rates were fitted to the reported times.
ORANGE = MagdelaineParams(alpha2=1.008, alpha3=0.05, alpha4=0.059 * 1.008, alpha5=0.2)
BLUE = MagdelaineParams(alpha2=0.4771, alpha3=0.05, alpha4=0.0945 * 0.4771, alpha5=0.02202)

# Bergman: slow uniform chain, set point g* = 5 mmol/L, meal scale fitted so the
# required bolus lands near 35.15 units at t' = 175 with peak 8.5.
RATE, GAIN, G, G_STAR = 0.01505, 2.403, 0.05, 5.0
BERG = BergmanParams(a=RATE, b=1.0, c=RATE, d=RATE, k=GAIN, G=G)
BASAL = (1.0 / G_STAR - G) / (BERG.b * GAIN)
MEAL = FilteredDisturbance(scale=0.9675)


def scenarios():
    yield "numerical_example_orange.toml", Scenario(
        name="numerical_example_orange", model=MAGDELAINE, params=ORANGE,
        disturbance=RectangularDisturbance(20.0, 200.0, 202.0), lam=-1.5,
        input=InputSpec(158.0, 0.0, 2.36), grid=GridSpec(h=0.1),
        description="Short strong disturbance; the optimum is an impulse (Type1).",
        calibration={"ratio_b_over_a": 0.059, "fitted": "alpha2, alpha5",
                     "targets": "t' = 158, tau = 0, amount = 2.36"},
    )
    yield "numerical_example_blue.toml", Scenario(
        name="numerical_example_blue", model=MAGDELAINE, params=BLUE,
        disturbance=RectangularDisturbance(1.0, 150.0, 400.0), lam=-1.5,
        input=InputSpec(133.0, 315.0, 23.625), grid=GridSpec(h=0.1),
        oracle=OracleSpec(t_start=100.0, t_stop=170.0, tau_max=400.0),
        description="Long weak disturbance; the optimum is a pulse with equal peaks (Type2).",
        calibration={"ratio_b_over_a": 0.0945, "fitted": "alpha2, alpha5",
                     "targets": "t' = 133, tau = 315, amount = 23.625"},
    )
    yield "zero_disturbance.toml", Scenario(
        name="zero_disturbance", model=MAGDELAINE, params=ORANGE,
        disturbance=RectangularDisturbance(0.0, 0.0, 0.0), lam=0.0, grid=GridSpec(h=0.1, t_end=300.0),
        description="No disturbance: zero input, flat response.",
    )
    yield "constrained_optimality_example.toml", Scenario(
        name="constrained_optimality_example", model=BERGMAN, params=BERG, disturbance=MEAL,
        lam=4.0, amount=20.0, basal=BASAL, input=InputSpec(175.0, 0.0, 35.15),
        grid=GridSpec(h=0.1),
        sweep=SweepSpec(durations=(0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0), t_stop=350.0),
        description="Meal response; U = 20 is below the required bolus, so tau = 0 is best.",
        calibration={"g_star": G_STAR, "fitted": "a = c = d, k, meal scale",
                     "targets": "required bolus 35.15 at t' = 175, peak 8.5"},
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="compare instead of writing")
    args = ap.parse_args(argv)
    stale = 0
    for name, sc in scenarios():
        path = OUT / name
        text = sc.dumps()
        if args.check:
            if not path.exists() or path.read_text() != text:
                print(f"stale: {name}")
                stale += 1
        else:
            path.write_text(text)
            print(f"wrote {path}")
    return 1 if stale else 0


if __name__ == "__main__":
    sys.exit(main())
