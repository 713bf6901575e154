"""Command-line front end.

Verbs: run, postprocess, check, mesh-dump, version.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, emit_config, load_config

CASE_PRESETS = {
    # Per-case overrides applied on top of the schema defaults when a preset
    # config is generated (see `ebfsi mesh-dump --emit-config`).
    "sod": {"case": "sod", "gas.gamma": 1.4, "gas.R": 287.0,
            "gas.mu_v_ratio": 0.0, "fluid.viscous": "false"},
    "bluffbody": {"case": "bluffbody", "gas.mu_v_ratio": 0.0,
                  "fluid.viscous": "true", "phases.rigid": 0.05,
                  "mesh.resolution": 32, "domain.x0": -4.0, "domain.x1": 6.0,
                  "domain.y0": -4.0, "domain.y1": 4.0},
    "porous_membrane": {"case": "porous_membrane", "fluid.viscous": "false",
                        "mesh.resolution": 48},
    "coupon": {"case": "coupon"},
    "piston": {"case": "piston", "gas.R": 287.0, "gas.gamma": 1.4,
               "gas.mu_v_ratio": 0.0, "freestream.rho": 1.2,
               "freestream.p": 100000.0, "freestream.mach": 0.0,
               "piston.mass": 0.2, "coupling.dt": 2e-5,
               "piston.duration": 0.03},
    "parachute2d": {"case": "parachute2d", "gas.mu_v_ratio": 0.0,
                    "fluid.viscous": "false", "mesh.resolution": 40,
                    "domain.x0": -3.0, "domain.x1": 9.0, "domain.y0": -5.0,
                    "domain.y1": 5.0, "phases.rigid": 0.004,
                    "phases.fixed": 0.004, "phases.coupled": 0.01,
                    "coupling.dt": 2e-5, "mesh.adapt_every": 50},
}


def preset_text(case: str) -> str:
    from .config import SCHEMA
    over = CASE_PRESETS[case]
    lines = [f"# preset configuration for case '{case}'"]
    for key in SCHEMA:
        if key in over:
            lines.append(f"{key} = {over[key]}")
    return "\n".join(lines) + "\n"


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    from .runner import RunError, run
    try:
        artifacts = run(cfg, outdir=args.out, restart_from=args.restart)
    except RunError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    rows = artifacts.get("history")
    if rows:
        last = rows[-1]
        print(f"finished t={last['t']:.6g}  drag_total={last.get('drag_total', 0.0):.6g}")
    else:
        print("finished")
    return 0


def _cmd_postprocess(args) -> int:
    from .ioformats import read_history
    try:
        hist = read_history(args.history)
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = args.out or os.path.dirname(os.path.abspath(args.history))
    os.makedirs(out, exist_ok=True)
    t = hist["t"]
    np.savetxt(os.path.join(out, "drag_table.txt"),
               np.column_stack([t, hist["drag_total"], hist["drag_canopy"], hist["drag_cable"]]),
               header="t drag_total drag_canopy drag_cable")
    np.savetxt(os.path.join(out, "vm_table.txt"),
               np.column_stack([t, hist["vm_max"], hist["vm_topk_mean"]]),
               header="t vm_max vm_topk_mean")
    np.savetxt(os.path.join(out, "work_table.txt"),
               np.column_stack([t, hist["work_fluid"], hist["work_struct"]]),
               header="t work_fluid work_struct")
    if len(t):
        print(f"rows: {len(t)}  peak drag: {hist['drag_total'].max():.6g}  "
              f"peak vm: {hist['vm_max'].max():.6g}")
    else:
        print("empty history")
    return 0


def _cmd_check(args) -> int:
    from . import acceptance
    results = acceptance.run_all(quick=args.quick)
    failed = [r for r in results if not r["passed"]]
    return 0 if not failed else 3


def _cmd_mesh_dump(args) -> int:
    if args.emit_config:
        case = args.config
        if case not in CASE_PRESETS:
            print(f"config error: unknown case {case!r}", file=sys.stderr)
            return 2
        sys.stdout.write(preset_text(case))
        return 0
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    from . import cases
    from .ioformats import write_mesh
    builders = {
        "sod": lambda c: cases.build_sod(c)[0],
        "bluffbody": lambda c: cases.build_bluffbody(c)[0],
        "porous_membrane": lambda c: cases.build_porous_membrane(c)[0],
        "coupon": lambda c: cases.build_coupon(c)[1],
        "piston": lambda c: cases.build_piston(c)[0],
        "parachute2d": lambda c: cases.build_parachute2d(c)[0],
    }
    mesh = builders[cfg.case](cfg)
    out = args.out or "mesh.txt"
    write_mesh(mesh, out)
    print(f"wrote {out}: {mesh.num_vertices} vertices, {mesh.num_triangles} triangles")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ebfsi",
        description="2D embedded-boundary compressible flow / structure kit",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a scenario configuration")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--restart", default=None,
                       help="phase-B checkpoint to resume the coupled phase from")
    p_run.set_defaults(fn=_cmd_run)

    p_post = sub.add_parser("postprocess", help="emit plot-ready tables from a history file")
    p_post.add_argument("history")
    p_post.add_argument("--out", default=None)
    p_post.set_defaults(fn=_cmd_postprocess)

    p_check = sub.add_parser("check", help="run the acceptance suite")
    p_check.add_argument("--quick", action="store_true",
                         help="skip the long-running flow criteria")
    p_check.set_defaults(fn=_cmd_check)

    p_mesh = sub.add_parser("mesh-dump", help="build and write a case mesh")
    p_mesh.add_argument("config", help="config path (or case name with --emit-config)")
    p_mesh.add_argument("--out", default=None)
    p_mesh.add_argument("--emit-config", action="store_true",
                        help="print a preset configuration for the named case")
    p_mesh.set_defaults(fn=_cmd_mesh_dump)

    p_ver = sub.add_parser("version", help="print the package version")
    p_ver.set_defaults(fn=lambda a: (print(__version__), 0)[1])

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
