"""Command-line entry point: ``hygrofem <command> <config>``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import appio
from .domain import admissibility_report
from .errors import HygroError
from .materials import LinearParams, StateSample, check_linear_conditions, check_structure_conditions, state_grid
from .stepper import simulate

log = logging.getLogger("hygrofem")


def _out_dir(args, cfg):
    d = Path(args.out or cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_run(args):
    cfg = appio.load_config(args.config)
    problem, init = appio.build_problem(cfg)
    out = _out_dir(args, cfg)
    n_steps = int(round(cfg.t_end / cfg.h_t))
    log.info("mesh: %d nodes, %d triangles; %d steps of %g s (%s)", problem.mesh.n_nodes,
             problem.mesh.n_triangles, n_steps, cfg.h_t, cfg.strategy)

    def progress(state, rep):
        if state.n % max(1, n_steps // 10) == 0:
            log.info("step %d/%d t=%g s, picard=%d", state.n, n_steps, state.t, rep.picard_iters)

    traj = simulate(problem, init, cfg.h_t, cfg.t_end, cfg.strategy, cfg.eps_fp, cfg.k_max,
                    cfg.snapshot_times, cfg.probes, on_step=progress)
    appio.write_probe_csv(traj.times, traj.probes, out / "probes.csv")
    with open(out / "steps.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t_s", "picard_iters", "max_ratio", "final_delta", "linear_residual"])
        for k, r in enumerate(traj.reports, start=1):
            rmax = max(r.contraction_ratios) if r.contraction_ratios else ""
            w.writerow([k, "%.17g" % traj.times[k], r.picard_iters, rmax, r.final_delta,
                        r.linear_residual])
    if cfg.write_vtk:
        for t, f in traj.snapshots:
            appio.write_vtk(problem.mesh, f, out / f"snapshot_{int(round(t)):010d}.vtk")
    if cfg.figures:
        from .plotting import plot_probes, plot_ratios

        if traj.probes:
            plot_probes(traj.times, traj.probes, out / "probes.png")
        if traj.reports and cfg.strategy == "picard":
            plot_ratios(traj.reports, out / "picard_ratios.png")
    for msg in traj.warnings:
        print(f"warning: {msg}")
    print(f"wrote {len(traj.times)} samples and {len(traj.snapshots)} snapshots to {out}")
    return 0


def cmd_verify_mms(args):
    from .mms import CASES, mms_verify

    cfg = appio.load_config(args.config)
    if cfg.mms is None:
        raise HygroError("config has no [mms] section")
    case = CASES[cfg.mms.case]()
    table = mms_verify(case, cfg.mms.h_list, cfg.mms.ht_list, threads=args.threads)
    out = _out_dir(args, cfg)
    appio.write_convergence_report(table, out / "convergence.csv")
    if cfg.figures:
        from .plotting import plot_convergence

        plot_convergence(table, out / "convergence.png")
    print(f"case {table.case}")
    print(f"{'h':>10} {'h_t':>10} {'error':>14}")
    for h, ht, e in table.rows:
        print(f"{h:10.5g} {ht:10.5g} {e:14.6e}")
    print("spatial orders:", " ".join(f"{o:.3f}" for o in table.spatial_orders) or "-")
    print("temporal orders:", " ".join(f"{o:.3f}" for o in table.temporal_orders) or "-")
    return 0


def cmd_check_materials(args):
    cfg = appio.load_config(args.config)
    ok = True
    for name, spec in cfg.materials.items():
        model = appio.build_material(spec, cfg.base_dir, f"material.{name}")
        print(f"[{name}]")
        if isinstance(model, LinearParams):
            r = check_linear_conditions(model)
            print(f"  parabolicity: {'pass' if r.parabolicity else 'FAIL'} {r.parabolicity_sides}")
            print(f"  ellipticity: {'pass' if r.ellipticity else 'FAIL'} {r.ellipticity_sides}")
            ok &= r.passed
            continue
        (tlo, thi), (mlo, mhi) = model.state_bounds()
        th = args.theta_range or (max(tlo, 273.0), min(thi, 313.0))
        mr = args.m_range or (max(mlo, 0.05), min(mhi, 0.95))
        rep = check_structure_conditions(model, state_grid(th, mr, args.n))
        for line in rep.lines():
            print("  " + line)
        essential = [c for k, c in rep.checks.items() if k != "parabolicity"]
        ok &= all(c.passed for c in essential)
    return 0 if ok else 1


def _frozen_eps(cfg):
    eps = []
    for L in cfg.layers:
        model = appio.build_material(cfg.materials[L.material], cfg.base_dir, f"material.{L.material}")
        c = model.evaluate(StateSample(np.array([L.initial[0]]), np.array([L.initial[1]])), clip=True)
        eps.append(c.a[0])
    return eps


def cmd_analyze_corner(args):
    from .pencil import analyze_corners

    cfg = appio.load_config(args.config)
    problem, _ = appio.build_problem(cfg)
    results = analyze_corners(problem.mesh.domain, _frozen_eps(cfg),
                              re_window=(-args.re_max, args.re_max))
    names = [L.name for L in cfg.layers]
    print(f"{'corner':>18} {'layers':>22} {'w_l/pi':>7} {'w_l1/pi':>7} {'verdict':>9} {'regime':>12} roots")
    for c in results:
        layers = "/".join(names[k] for k in c.layers)
        if c.problem is None:
            print(f"{str(c.point):>18} {layers:>22} {'-':>7} {'-':>7} {'n/a':>9} {'-':>12} {c.note}")
            continue
        v = c.verdict
        roots = ", ".join(f"{r.lam.imag:+.9f}i (x{r.multiplicity_hint})" for r in v.roots_in_strip)
        print(f"{str(c.point):>18} {layers:>22} {c.problem.omega_l / math.pi:7.3f} "
              f"{c.problem.omega_l1 / math.pi:7.3f} {'regular' if v.regular else 'SINGULAR':>9} "
              f"{v.regime:>12} {roots or '-'}")
    return 0


def cmd_mesh_info(args):
    cfg = appio.load_config(args.config)
    problem, _ = appio.build_problem(cfg, h_target=args.h)
    m = problem.mesh
    d = m.domain
    print(f"layers: {len(d.layers)}  area: {d.area:.6g}")
    print(f"nodes: {m.n_nodes}  triangles: {m.n_triangles}  h_mesh: {m.h_mesh:.6g}")
    print(f"interface segments: {len(d.interface_segments)}  exterior segments: {len(d.exterior_segments)}")
    print(f"interface edges: {len(m.interface_edges)}  exterior edges: {len(m.exterior_edges)}")
    for r in admissibility_report(d):
        print(f"  {r.condition:>6} {'pass' if r.passed else 'FAIL'} {r.note}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="hygrofem", description=__doc__)
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="run configuration file")
        s.set_defaults(func=fn)
        return s

    s = add("run", cmd_run, "simulate and write probes, snapshots and figures")
    s.add_argument("--out", help="output directory (overrides the config)")
    s = add("verify-mms", cmd_verify_mms, "manufactured-solution convergence study")
    s.add_argument("--out", help="output directory (overrides the config)")
    s = add("check-materials", cmd_check_materials, "structure conditions on a state grid")
    s.add_argument("--theta-range", type=float, nargs=2)
    s.add_argument("--m-range", type=float, nargs=2)
    s.add_argument("--n", type=int, default=11)
    s = add("analyze-corner", cmd_analyze_corner, "pencil regularity verdicts at corners")
    s.add_argument("--re-max", type=float, default=12.0)
    s = add("mesh-info", cmd_mesh_info, "mesh statistics and admissibility report")
    s.add_argument("--h", type=float, default=None, help="override the target mesh size")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HygroError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
