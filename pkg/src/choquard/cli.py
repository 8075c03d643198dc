"""Command line entry point: ``choquard <subcommand>``."""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .asymptotics import identity_checks, predict_rates, testfunction_expansion
from .closed_forms import bubble, extremal_W, normalization_report, sobolev_constants
from .harness import (SweepAborted, load_sweep_config, read_manifest, read_records, report,
                      run_sweep)
from .problem import InadmissibleError, PowerTerm, ProblemParams, validate_hypotheses
from .radial import build_grid
from .riesz import build_kernel
from .solver import make_workspace, solve_ground_state

EXIT_OK, EXIT_INADMISSIBLE, EXIT_NONCONVERGED, EXIT_GATE = 0, 2, 3, 4


def _emit(obj, as_json: bool) -> None:
    if as_json:
        print(json.dumps(obj, indent=2, default=float))
    else:
        for k, v in obj.items():
            print(f"{k}: {v}")


def _reference_setup(args):
    grid = build_grid(args.N, args.Rmax, args.M, "loglinear", core=args.core)
    return grid, build_kernel(grid, args.alpha, cache_dir=args.cache_dir)


def cmd_constants(args) -> int:
    grid, kernel = _reference_setup(args)
    out = sobolev_constants(grid, kernel).as_dict()
    out["normalization"] = normalization_report(grid, kernel)
    _emit(out, args.json)
    return EXIT_OK


def cmd_reference(args) -> int:
    grid = build_grid(args.N, args.Rmax, args.M, "loglinear", core=args.core)
    data = np.column_stack([grid.r, bubble(grid), extremal_W(grid, args.alpha)])
    np.savetxt(args.out, data, delimiter=",", header="r,U1,W1", comments="", fmt="%.17g")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_sweep_config(args.config)
    ws = make_workspace(cfg.params, [args.eps], cfg.solver)
    gs = solve_ground_state(cfg.params, args.eps, cfg.solver, workspace=ws)
    if args.dump_profile:
        gs.w.to_csv(args.dump_profile)
    _emit(gs.to_json() if args.json else gs.record(), args.json)
    return EXIT_OK if gs.converged else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)

    def log(rec):
        print(f"eps={rec.eps:.6g} m_eps={rec.m_eps:.10g} gap={rec.gap:.6g} "
              f"iters={rec.iterations} converged={rec.converged}", flush=True)

    try:
        run_sweep(cfg, out_dir=args.out, log=None if args.quiet else log)
    except SweepAborted as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NONCONVERGED
    print(f"wrote {Path(args.out) / 'sweep.csv'} and manifest.json (config hash {cfg.hash})")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_sweep_config(args.config)
    pred = predict_rates(cfg.params)
    if args.json:
        print(json.dumps({"sigma": pred.sigma, "rates": pred.as_rows()}, indent=2))
        return EXIT_OK
    print(f"sigma = {pred.sigma:.10g}")
    print(f"{'observable':<20}{'eps exp':>14}{'ln eps exp':>14}  {'model':<14}relation")
    for e in pred.entries:
        print(f"{e.observable:<20}{e.eps_exponent:>14.8g}{e.log_exponent:>14.8g}  {e.model:<14}{e.relation}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = load_sweep_config(args.config)
    run = Path(args.run)
    manifest = read_manifest(run / "manifest.json")
    if manifest.get("config_hash") != cfg.hash:
        print(f"config hash mismatch: run has {manifest.get('config_hash')}, config has {cfg.hash}",
              file=sys.stderr)
        return 1
    rep = report(read_records(run / "sweep.csv"), predict_rates(cfg.params))
    if args.json:
        print(json.dumps(rep.as_dict(), indent=2))
    else:
        print(rep.text())
    if args.gate and not rep.passed:
        return EXIT_GATE
    return EXIT_OK


def random_admissible(rng: random.Random) -> tuple[int, Fraction, Fraction]:
    """(N, alpha, q2) as exact rationals with q2 strictly inside the admissible window."""
    while True:
        N = rng.choice([3, 4, 5, 6, 7])
        alpha = Fraction(rng.randint(1, 20 * N - 1), 20)
        lo, hi = (N + alpha) / N, (N + alpha) / (N - 2)
        q2 = lo + (hi - lo) * Fraction(rng.randint(1, 999), 1000)
        params = ProblemParams(N, float(alpha), (PowerTerm(float(q2), 1.0),))
        if validate_hypotheses(params).admissible:
            return N, alpha, q2


def cmd_verify(args) -> int:
    rng = random.Random(args.seed)
    failures = 0
    for _ in range(args.draws):
        N, alpha, q2 = random_admissible(rng)
        checks = identity_checks(N, alpha, q2)
        if not all(checks.values()):
            failures += 1
            print(f"FAIL N={N} alpha={alpha} q2={q2}: {checks}")
    print(f"{args.draws - failures}/{args.draws} random admissible draws satisfy every identity")
    return EXIT_OK if failures == 0 else 1


def cmd_expand(args) -> int:
    grid, kernel = _reference_setup(args)
    scales = [float(s) for s in args.scales.split(",")]
    table = testfunction_expansion(grid, kernel, args.which, scales)
    if args.json:
        print(json.dumps({"rows": table.rows(), "fits": table.fits}, indent=2))
        return EXIT_OK
    cols = list(table.columns)
    print("scale," + ",".join(cols))
    for row in table.rows():
        print(",".join(f"{row[c]:.10g}" for c in ["scale", *cols]))
    for k, v in table.fits.items():
        print(f"fit {k}: {v:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choquard",
                                 description="Radial ground states of the Choquard equation at large eps")
    sub = ap.add_subparsers(dest="command", required=True)

    def reference_opts(p, alpha=True):
        p.add_argument("--N", type=int, required=True)
        if alpha:
            p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--M", type=int, default=1024)
        p.add_argument("--Rmax", type=float, default=200.0)
        p.add_argument("--core", type=float, default=0.1)
        p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("constants", help="reference constants and normalisation residuals")
    reference_opts(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("reference", help="dump U_1 and W_1 profiles as CSV")
    reference_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("solve", help="ground state at one eps")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--dump-profile", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="warm-started sweep over eps")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="predicted exponents")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fit", help="fit a sweep and compare with the prediction")
    p.add_argument("--config", required=True)
    p.add_argument("--run", required=True, help="directory holding sweep.csv and manifest.json")
    p.add_argument("--gate", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="exact exponent identities on random admissible parameters")
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("expand", help="cut-off test-function integrals")
    reference_opts(p)
    p.add_argument("--which", choices=["u_kappa", "eta_l_W1"], required=True)
    p.add_argument("--scales", required=True, help="comma-separated kappa or l values")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_expand)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InadmissibleError as exc:
        print(f"inadmissible configuration: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
