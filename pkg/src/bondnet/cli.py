"""Command line interface.

Exit codes: 0 success, 1 solver non-convergence (or a failed Jacobian
check), 2 input error.
"""
import argparse
import json
import logging
from pathlib import Path
import sys

import numpy as np

from . import kernels
from .equilibrium import assemble_state
from .errors import InputError, StepFailure
from .network import validate_network
from .scenario import (
    EXAMPLES,
    ResultBundle,
    emit_results,
    emit_scenario,
    generate_example,
    load_scenario,
    write_history_csv,
)
from .solver import check_jacobian, load_sweep, solve

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("bondnet")


def _diag(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _options(sc, args):
    prob, opts = sc.to_problem()
    if getattr(args, "tol", None) is not None:
        opts.tol_residual = args.tol
    if getattr(args, "max_iter", None) is not None:
        opts.max_iterations = args.max_iter
    if getattr(args, "steps", None) is not None:
        opts.load_steps = args.steps
    opts.__post_init__()
    return prob, opts


def _run(sc, args, sweep):
    prob, opts = _options(sc, args)
    try:
        if sweep or opts.load_steps > 1:
            report = load_sweep(prob, opts)
        else:
            report = solve(prob, opts)
    except StepFailure as exc:
        report = exc.report
        _diag("StepFailure", str(exc), last_converged_step=exc.last_converged_step)
    return prob, report


def cmd_solve(args):
    sc = load_scenario(args.scenario)
    prob, report = _run(sc, args, sweep=False)
    bundle = ResultBundle.from_report(report, sc, prob)
    emit_results(bundle, args.out, timestamp=not args.no_timestamp,
                 history=len(report.per_step_history) > 1)
    print(f"{report.status.value}: {report.iterations} iterations, "
          f"residual {report.residual_norm:.3e}, broken bonds {bundle.broken_bonds}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_sweep(args):
    sc = load_scenario(args.scenario)
    prob, report = _run(sc, args, sweep=True)
    bundle = ResultBundle.from_report(report, sc, prob)
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        write_history_csv(bundle, out)
    else:
        emit_results(bundle, out, timestamp=not args.no_timestamp, history=True)
    print(f"{report.status.value}: {len(report.per_step_history)} steps, "
          f"broken bonds {bundle.broken_bonds}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_check_jacobian(args):
    sc = load_scenario(args.scenario)
    prob, _ = sc.to_problem()
    rng = np.random.default_rng(args.seed)
    scale = float(np.mean(prob.net.rest_lengths))
    x = prob.reference_free_positions() + args.perturb * scale * rng.standard_normal((prob.p, 3))
    st = assemble_state(prob, x)
    disc = check_jacobian(prob, x, fd_step=args.fd_step)
    print(json.dumps({"max_discrepancy": disc, "threshold": args.threshold,
                      "max_abs_extension": float(np.abs(st.ext).max())}))
    return EXIT_OK if disc < args.threshold else EXIT_NONCONVERGED


def cmd_generate(args):
    sc = generate_example(args.name, args.nx, args.ny, args.nz)
    text = emit_scenario(sc)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args):
    sc = load_scenario(args.scenario)
    prob, _ = sc.to_problem()
    diags = validate_network(prob.net)
    for d in diags:
        _diag(d.code, d.message)
    if diags:
        return EXIT_INPUT
    print(f"valid: {prob.net.n} nodes, {prob.net.m} bonds, "
          f"{prob.p} free, {prob.q} prescribed")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="bondnet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--tol", type=float, help="residual tolerance")
        p.add_argument("--max-iter", type=int, help="Newton iterations per level")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp from report.json")

    p = sub.add_parser("solve", help="solve a scenario")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, help="load steps")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="load sweep with force-extension history")
    common(p)
    p.add_argument("--out", required=True,
                   help="history CSV path (*.csv) or output directory")
    p.add_argument("--steps", type=int, help="load steps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-jacobian", help="compare analytic and FD Jacobians")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=1e-2,
                   help="random perturbation relative to the mean rest length")
    p.add_argument("--fd-step", type=float, default=None)
    p.add_argument("--threshold", type=float, default=1e-5)
    p.set_defaults(func=cmd_check_jacobian)

    p = sub.add_parser("generate", help="write a built-in example scenario")
    p.add_argument("name", choices=EXAMPLES)
    p.add_argument("--nx", type=int, default=2)
    p.add_argument("--ny", type=int, default=2)
    p.add_argument("--nz", type=int, default=2)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a scenario and its network")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)
    return ap


def run_cli(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        _diag(type(exc).__name__, str(exc))
        return EXIT_INPUT


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
