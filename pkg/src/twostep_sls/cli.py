"""Command-line interface.

Exit status: 0 on success, 2 when an infeasibility occurred that the config
marks as expected (``[run] expect_infeasible = true``), 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys as _sys

import numpy as np

from . import bench, textio
from .clsyn import achievability_residual, dare_optimal_cost, lqr_cost, synthesize_clmaps
from .evalsim import implementation_cost, simulate_controller
from .exceptions import InfeasibleError
from .implsyn import (ImplementationMatrices, closed_loop_difference,
                      constraint_residual, lambda_schedule, synthesize_implementation)
from .lti import norm_l1
from .stability import build_internal_dynamics, distributed_stability_check, trace_to_csv

log = logging.getLogger("twostep_sls")

EXIT_OK, EXIT_ERROR, EXIT_EXPECTED_INFEASIBLE = 0, 1, 2


def _load_config(args) -> bench.ExperimentConfig:
    if args.config:
        cfg = bench.ExperimentConfig.from_file(args.config)
    else:
        cfg = bench.ExperimentConfig.from_text(bench.DEFAULT_CONFIG, os.getcwd())
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects section.key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    flag_map = {"T": "synthesis.T", "lam": "synthesis.lam", "l1_weight": "synthesis.l1_weight",
                "locality": "mask.locality", "comm_speed": "mask.comm_speed",
                "processors": "stability.processors", "out": "run.out"}
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "no_mask", False):
        overrides["mask.enabled"] = "false"
    cfg.apply(overrides)
    return cfg


def _clmaps(cfg, args):
    if getattr(args, "clmaps", None):
        return textio.load_clmaps(args.clmaps)
    return synthesize_clmaps(cfg.system(), cfg.T, cfg.weights())


def cmd_synth_cl(cfg, args):
    sys, w = cfg.system(), cfg.weights()
    mask = cfg.controller_mask(cfg.T) if args.constrained else None
    out = cfg.out_dir()
    try:
        cl = synthesize_clmaps(sys, cfg.T, w, mask)
    except InfeasibleError as exc:
        print(f"status = Infeasible ({exc})")
        return EXIT_EXPECTED_INFEASIBLE if cfg.expect_infeasible else EXIT_ERROR
    textio.save_system(os.path.join(out, "system.txt"), sys)
    textio.save_weights(os.path.join(out, "weights.txt"), w)
    textio.save_clmaps(os.path.join(out, "clmaps.txt"), cl)
    print("status = ok")
    print(f"achievability_residual = {achievability_residual(sys, cl)!r}")
    print(f"normalized_cost = {lqr_cost(cl, w) / dare_optimal_cost(sys, w)!r}")
    return EXIT_OK


def cmd_synth_impl(cfg, args):
    sys = cfg.system()
    cl = _clmaps(cfg, args)
    T_c = args.Tc if args.Tc is not None else cfg.T
    mask = cfg.controller_mask(T_c) if cfg.mask_enabled else None
    kwargs = dict(l1_weight=cfg.l1_weight, penalties=cfg.penalties(T_c), rtol=cfg.rtol,
                  max_iter=cfg.max_iter)
    lam = cfg.lam
    if cfg.lambda_schedule:
        impl, lam = lambda_schedule(sys, cl, T_c, mask, cfg.lam, cfg.lambda_factor,
                                    max_escalations=cfg.max_escalations, **kwargs)
    impl, delta_c, diag = synthesize_implementation(sys, cl, T_c, mask, lam=lam, **kwargs)
    out = cfg.out_dir()
    textio.save_implementation(os.path.join(out, "impl.txt"), impl)
    textio.write_blocks(os.path.join(out, "delta_c.txt"), [delta_c], "Delta_c")
    dx, du = closed_loop_difference(cl, impl, sys)
    text = diag.to_text() + (f"constraint_residual = {constraint_residual(cl, impl, sys)!r}\n"
                             f"dx_h2 = {dx!r}\ndu_h2 = {du!r}\n"
                             f"l1_norm = {norm_l1(impl.stacked())!r}\n")
    with open(os.path.join(out, "diagnostics.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def _impl(cfg, args):
    if args.impl:
        return textio.load_implementation(args.impl)
    return ImplementationMatrices.from_clmaps(_clmaps(cfg, args))


def cmd_check_stability(cfg, args):
    sys = cfg.system()
    impl = _impl(cfg, args)
    dyn = build_internal_dynamics(sys, impl)
    outcome, trace = distributed_stability_check(dyn, cfg.processors, cfg.transient_bound,
                                                 cfg.check_max_iter)
    trace_to_csv(trace, os.path.join(cfg.out_dir(), "stability_trace.csv"))
    print(f"verdict = {outcome.verdict}")
    print(f"iterations = {outcome.iterations}")
    print(f"final_norm = {outcome.final_norm!r}")
    print(f"spectral_radius = {dyn.spectral_radius()!r}")
    analytic = build_internal_dynamics(sys, impl, cfg.zero_tol).spectral_radius()
    print(f"spectral_radius_analytic = {analytic!r}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    sys = cfg.system()
    impl = _impl(cfg, args)
    w = np.zeros((args.horizon, sys.n))
    w[0, args.impulse - 1] = 1.0
    traj = simulate_controller(sys, impl, w)
    traj.to_csv(os.path.join(cfg.out_dir(), "trajectory.csv"))
    cost = implementation_cost(sys, impl, cfg.weights(), T=cfg.T)
    print(f"normalized_cost = {cost / dare_optimal_cost(sys, cfg.weights())!r}")
    return EXIT_OK


def cmd_bench(cfg, args):
    out = cfg.out_dir()
    if args.experiment == "fig2":
        path = os.path.join(out, "fig2.csv")
        rows = bench.run_fig2_sweep(cfg, path)
        if args.plot:
            bench.plot_fig2(path, os.path.join(out, "fig2.svg"))
        print(f"wrote {path} ({len(rows)} rows)")
        return EXIT_OK
    path = os.path.join(out, "table1.csv")
    rows = bench.run_table1(cfg, path)
    print(f"wrote {path}")
    for r in rows:
        cost = r.get("lqr_cost")
        print(f"  {r['controller']:<20} {r['status']:<12} "
              + (f"cost={cost:.4f} rho={r['spectral_radius']:.3f} l1={r['l1_norm']:.3f}"
                 if isinstance(cost, float) else ""))
    infeasible = any(r["status"] == "Infeasible" for r in rows)
    if infeasible:
        return EXIT_EXPECTED_INFEASIBLE if cfg.expect_infeasible else EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment file (defaults mirror the chain example)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override any config key; repeatable")
    common.add_argument("--T", type=int, help="closed-loop FIR horizon")
    common.add_argument("--lam", type=float, help="Delta regularization weight")
    common.add_argument("--l1-weight", dest="l1_weight", type=float)
    common.add_argument("--locality", type=int)
    common.add_argument("--comm-speed", dest="comm_speed", type=float)
    common.add_argument("--processors", type=int)
    common.add_argument("--no-mask", action="store_true", help="drop controller constraints")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="twostep-sls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-cl", parents=[common], help="synthesize closed-loop maps")
    p.add_argument("--constrained", action="store_true",
                   help="impose the controller mask on the closed-loop maps")
    p.set_defaults(func=cmd_synth_cl)

    p = sub.add_parser("synth-impl", parents=[common], help="synthesize implementation matrices")
    p.add_argument("--clmaps", help="closed-loop maps file (default: synthesize)")
    p.add_argument("--Tc", type=int, help="implementation order (default T)")
    p.set_defaults(func=cmd_synth_impl)

    p = sub.add_parser("check-stability", parents=[common], help="certify internal stability")
    p.add_argument("--impl", help="implementation file (default: self-implementation)")
    p.add_argument("--clmaps")
    p.set_defaults(func=cmd_check_stability)

    p = sub.add_parser("simulate", parents=[common], help="impulse response simulation")
    p.add_argument("--impl")
    p.add_argument("--clmaps")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--impulse", type=int, default=1, help="one-based disturbed node")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark experiment")
    p.add_argument("experiment", choices=["fig2", "table1"])
    p.add_argument("--plot", action="store_true", help="also render fig2.svg")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        return args.func(cfg, args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    _sys.exit(main())
