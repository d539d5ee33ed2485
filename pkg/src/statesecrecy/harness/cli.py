"""Command-line interface.

Exit codes: 0 success, 1 secrecy verification failed, 2 invalid input,
3 numerical failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from .. import __version__
from ..channel import ChannelTrace
from ..codec import VARIANTS, fixed_point_residual
from ..errors import DesyncError, InvalidInputError, NumericalError
from ..estimators import bound_trajectory, divergence_rate_check, open_loop_sequence, stable_gap_check
from ..sysmodel import gain_limit_diagnostics
from . import csvio
from .report import verify_secrecy
from .runner import run_monte_carlo, run_trial
from .scenario import load_scenario, example_scenario

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("statesecrecy")


def _matrix(M):
    return [[float(v) for v in row] for row in np.atleast_2d(M)]


def _scenario(args):
    sc = load_scenario(args.scenario) if args.scenario else example_scenario()
    return sc.with_overrides(
        trials=getattr(args, "trials", None),
        horizon=getattr(args, "horizon", None),
        base_seed=getattr(args, "seed", None),
        variant=getattr(args, "variant", None),
        force_critical_at_zero=True if getattr(args, "force_critical", False) else None,
    )


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def cmd_design(args):
    sc = _scenario(args)
    code = sc.code
    eig = np.linalg.eigvals(code.L)
    _print_json({
        "variant": code.variant,
        "n_unstable": sc.system.n_u,
        "n_stable": sc.system.n_s,
        "L": _matrix(code.L),
        "H": _matrix(code.H),
        "Y_inf": _matrix(code.Y_inf),
        "P_s_inf": _matrix(code.P_s_inf) if code.P_s_inf.size else [],
        "eig_L": [[float(e.real), float(e.imag)] for e in eig],
        "eig_L_abs": sorted(float(abs(e)) for e in eig),
        "fixed_point_residual": fixed_point_residual(code, sc.system) if code.invertible else None,
    })
    return EXIT_OK


def cmd_simulate(args):
    sc = _scenario(args)
    if args.trial is not None:
        trace = None
        if args.trace:
            with open(args.trace) as fh:
                trace = ChannelTrace.from_text(fh.read())
            sc = sc.with_overrides(horizon=trace.horizon)
        records = [run_trial(sc, args.trial, trace=trace)]
        summary = {"trial": args.trial, "seed": records[0].seed, "k0": records[0].k0}
    else:
        result = run_monte_carlo(sc, workers=args.workers)
        records, summary = result.records, result.summary
        summary["failures"] = {str(k): v for k, v in result.failures.items()}
    rows = csvio.emit_csv(records, args.output)
    summary["rows_written"] = rows
    _print_json(summary)
    return EXIT_OK


def cmd_bound(args):
    sc = _scenario(args)
    sys_, code = sc.system, sc.code
    if args.k0 < 0 or args.k0 > sc.horizon:
        raise InvalidInputError(f"k0 must lie in [0, {sc.horizon}]")
    P_op = open_loop_sequence(sys_, sc.horizon)
    anchor = sys_.Sigma0 if args.anchor == "sigma0" else P_op[args.k0]
    traj = bound_trajectory(anchor, args.k0, sc.horizon, code, sys_)
    rows = csvio.emit_bound_csv(traj, P_op, args.output)
    out = {"k0": args.k0, "rows_written": rows}
    if len(traj) - 1 >= 20:
        out["divergence"] = [r._asdict() for r in divergence_rate_check(traj, sys_)]
        out["stable_gap"] = [r._asdict() for r in stable_gap_check(traj, sys_)]
    _print_json(out)
    return EXIT_OK


def cmd_verify(args):
    sc = _scenario(args)
    result = run_monte_carlo(sc, workers=args.workers, verify=False)
    if not result.records:
        log.error("all %d trials failed numerically", len(result.failures))
        return EXIT_NUMERIC
    report = verify_secrecy(result.records, sc)
    if args.json:
        _print_json(report.to_dict())
    else:
        print(report.to_text())
    if result.failures:
        log.error("%d trials failed numerically", len(result.failures))
        return EXIT_NUMERIC
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_compare(args):
    base = _scenario(args)
    full = run_trial(base.with_overrides(variant="full"), args.trial)
    diag = run_trial(base.with_overrides(variant="diagonal_baseline"), args.trial)
    rows = csvio.emit_compare_csv(full, diag, args.output)
    T = base.horizon
    nu = base.system.n_u
    gaps = {
        f"state_{i + 1}": {
            "full_final_gap": float(full.eav_mmse[T, i] - full.open_loop_mmse[T, i]),
            "diagonal_final_gap": float(diag.eav_mmse[T, i] - diag.open_loop_mmse[T, i]),
        }
        for i in range(nu, base.system.n)
    }
    _print_json({"trial": args.trial, "k0": full.k0, "rows_written": rows, "stable_gaps": gaps})
    return EXIT_OK


def cmd_diagnostics(args):
    sc = _scenario(args)
    g = gain_limit_diagnostics(sc.system, args.steps)
    _print_json({
        "steps": args.steps,
        "gain_error": g.gain_error,
        "closed_loop_error": g.closed_loop_error,
        "K": _matrix(g.K),
        "K_limit": _matrix(g.K_limit),
        "F_closed": _matrix(g.F_closed),
        "F_closed_limit": _matrix(g.F_closed_limit),
    })
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="statesecrecy", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, output=False, mc=False):
        sp.add_argument("-s", "--scenario", help="scenario JSON file (default: two-state example)")
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--seed", type=int, help="override base_seed")
        sp.add_argument("--variant", choices=VARIANTS)
        sp.add_argument("--force-critical", action="store_true",
                        help="force a critical event at step 0")
        if output:
            sp.add_argument("-o", "--output", required=True, help="CSV output path")
        if mc:
            sp.add_argument("--trials", type=int)
            sp.add_argument("-j", "--workers", type=int, default=1)

    sp = sub.add_parser("design", help="print the weighting matrix and steady information")
    common(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("simulate", help="run Monte-Carlo trials and write the trial CSV")
    common(sp, output=True, mc=True)
    sp.add_argument("--trial", type=int, help="replay a single trial id")
    sp.add_argument("--trace", help="trace file to inject (with --trial)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bound", help="write the covariance/information bound from k0")
    common(sp, output=True)
    sp.add_argument("--k0", type=int, required=True)
    sp.add_argument("--anchor", choices=("open_loop", "sigma0"), default="open_loop",
                    help="initial bound: open-loop covariance at k0 or Sigma0")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("verify", help="check the secrecy conditions; exit 1 on failure")
    common(sp, mc=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("compare", help="full code vs diagonal baseline on one trial")
    common(sp, output=True)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("diagnostics", help="open-loop information gain limits")
    common(sp)
    sp.add_argument("--steps", type=int, default=100)
    sp.set_defaults(func=cmd_diagnostics)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NumericalError, DesyncError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (InvalidInputError, ValueError, OSError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
