"""Command-line entry point: ``bolusopt {simulate,optimize,sweep,verify}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import optimize as opt
from .analysis import classify, extrema
from .config import Scenario, SweepSpec, bundled_scenarios
from .errors import AmbiguousShape, BolusOptError, Infeasible, NotConverged, ValidationError
from .models import MAGDELAINE
from .signals import PulseInput
from .simulate import simulate
from .verify import run_oracle, verify_scenario

EXIT_OK, EXIT_VERIFY, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _adequate(sc: Scenario, u) -> bool:
    if sc.model != MAGDELAINE:
        return False
    need = opt.required_amount_magdelaine(sc.disturbance, sc.params)
    return abs(u.amount - need) <= 1e-9 * max(need, 1.0)


# ------------------------------------------------------------------ commands


def run_simulate(sc: Scenario, out: Path, u=None) -> dict:
    u = u or sc.pulse()
    traj = simulate(sc.params, u, sc.disturbance, x0=sc.x0, t_end=sc.grid.t_end, h=sc.grid.h)
    report = extrema(traj).to_dict()
    limit = 0.0 if _adequate(sc, u) else None
    try:
        report["certificate"] = classify(traj, sc.lam, sc.solver.shape, limit=limit).to_dict()
    except AmbiguousShape as e:
        report["certificate"] = {"shape": "Ambiguous", "reason": str(e)}
    report["input"] = {"t_prime": u.t_on, "tau": u.duration, "amount": u.amount, "basal": u.basal}
    report["metadata"] = traj.metadata
    _write(out, sc.outputs.get("trajectory", "trajectory.csv"), traj.to_csv())
    _write(out, sc.outputs.get("extrema", "extrema.json"), _json(report))
    return report


def run_optimize(sc: Scenario, out: Path, oracle: bool = False, paper_sequence: bool = False):
    settings = sc.settings(paper_sequence=paper_sequence)
    if sc.model == MAGDELAINE:
        res = opt.optimize_magdelaine(sc.lam, sc.disturbance, sc.params, settings)
        payload = res.to_dict()
        if oracle:
            o = run_oracle(sc)
            res.oracle_gap = abs(res.gamma - o.gamma)
            slack = opt.grid_slack(res.trajectory, sc.oracle.t_step)
            payload = res.to_dict()
            payload["oracle"] = {**o.to_dict(), "slack": slack, "agrees": res.oracle_gap <= slack}
    else:
        U, res = opt.bergman_required_bolus(sc.lam, sc.disturbance, sc.params, sc.basal, settings,
                                            x0=sc.x0, t_end=sc.grid.t_end)
        payload = res.to_dict()
        payload["required_bolus"] = U
    _write(out, sc.outputs.get("result", "result.json"), _json(payload))
    if res.trajectory is not None:
        _write(out, sc.outputs.get("trajectory", "optimal_trajectory.csv"), res.trajectory.to_csv())
    return payload


def run_sweep(sc: Scenario, out: Path, durations=None) -> opt.SweepResult:
    if sc.model == MAGDELAINE:
        raise ValidationError("sweeps are defined for the Bergman model")
    if sc.amount is None:
        raise ValidationError("the sweep needs an amount (top-level key 'amount')")
    spec = sc.sweep or SweepSpec()
    durations = spec.durations if durations is None else durations
    settings = sc.settings()
    required, _ = opt.bergman_required_bolus(sc.lam, sc.disturbance, sc.params, sc.basal, settings,
                                             x0=sc.x0, t_end=sc.grid.t_end)
    res = opt.bergman_constrained_sweep(sc.amount, durations, sc.lam, sc.disturbance, sc.params,
                                        sc.basal, settings, t_grid=spec.t_grid(), required=required,
                                        x0=sc.x0, t_end=sc.grid.t_end, refine=spec.refine)
    payload = res.to_dict()
    payload["required_bolus"] = required
    _write(out, sc.outputs.get("sweep", "sweep.csv"), res.to_csv())
    _write(out, sc.outputs.get("sweep_summary", "sweep.json"), _json(payload))
    if not any(e.feasible for e in res.entries):
        raise Infeasible(f"no duration keeps the response above {sc.lam}", bound=sc.lam)
    return res


def run_verify(sc: Scenario, out: Path, seed: int = 0, n_pairs: int = 200) -> list[dict]:
    checks = verify_scenario(sc, seed=seed, n_pairs=n_pairs)
    _write(out, sc.outputs.get("verify", "verify.json"), _json(checks))
    return checks


# ------------------------------------------------------------------ entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bolusopt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True,
                        help="scenario TOML path, or a bundled file name: " + ", ".join(bundled_scenarios()))
        sp.add_argument("--out", default="out", help="output directory (default: out)")

    s = sub.add_parser("simulate", help="simulate the scenario input")
    common(s)
    s.add_argument("--t-prime", type=float, help="override input time")
    s.add_argument("--tau", type=float, help="override input duration")
    s.add_argument("--amount", type=float, help="override bolus amount")

    o = sub.add_parser("optimize", help="optimal bolus for the scenario")
    common(o)
    o.add_argument("--oracle", action="store_true", help="cross-check against the brute-force oracle")
    o.add_argument("--paper-sequence", action="store_true",
                   help="use the running-average duration iteration instead of bisection")

    w = sub.add_parser("sweep", help="peak glucose against bolus duration (Bergman)")
    common(w)
    w.add_argument("--durations", type=float, nargs="+", help="override durations (minutes)")

    v = sub.add_parser("verify", help="run the invariant checks on the scenario")
    common(v)
    v.add_argument("--seed", type=int, default=0, help="seed for randomised batches")
    v.add_argument("--pairs", type=int, default=200, help="random pulse pairs for the crossing check")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        sc = Scenario.load(args.scenario)
        if args.command == "simulate":
            u = sc.pulse()
            if args.t_prime is not None or args.tau is not None or args.amount is not None:
                u = PulseInput.pulse(args.t_prime if args.t_prime is not None else u.t_on,
                                     args.tau if args.tau is not None else u.duration,
                                     args.amount if args.amount is not None else u.amount, sc.basal)
            rep = run_simulate(sc, out, u)
            print(f"gamma = {rep['gamma']:.6g}, min = {rep['lambda_attained']:.6g}, "
                  f"shape = {rep['certificate']['shape']}")
        elif args.command == "optimize":
            res = run_optimize(sc, out, oracle=args.oracle, paper_sequence=args.paper_sequence)
            u = res["input"]
            cert = res["certificate"]["shape"] if res["certificate"] else "none"
            print(f"t' = {u['t_prime']:.4f}, tau = {u['tau']:.4f}, amount = {u['amount']:.6g}, "
                  f"gamma = {res['gamma']:.6g}, min = {res['lambda_attained']:.6g}, certificate = {cert}")
            if "oracle" in res:
                o = res["oracle"]
                print(f"oracle: t' = {o['t_prime']}, tau = {o['tau']}, gamma = {o['gamma']:.6g}, "
                      f"gap = {res['oracle_gap']:.3g} (slack {o['slack']:.3g})")
                if not o["agrees"]:
                    print("oracle disagreement beyond grid slack", file=sys.stderr)
                    return EXIT_VERIFY
        elif args.command == "sweep":
            res = run_sweep(sc, out, args.durations)
            for e in res.entries:
                print(f"tau = {e.tau:g}: t' = {e.t_prime:g}, gamma = {e.gamma:.6g}, "
                      f"min = {e.lambda_attained:.6g}{'' if e.feasible else ' (infeasible)'}")
            print(f"monotone = {res.monotone}, argmin tau = {res.argmin_tau}")
        else:
            checks = run_verify(sc, out, seed=args.seed, n_pairs=args.pairs)
            for c in checks:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
            if not all(c["passed"] for c in checks):
                return EXIT_VERIFY
    except NotConverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Infeasible as e:
        bound = f" (bound {e.bound:.6g})" if e.bound is not None else ""
        print(f"infeasible: {e}{bound}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BolusOptError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
