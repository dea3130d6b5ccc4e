"""Command-line entry point: ``shellopt optimize|analyze|offset|fixture``."""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import fixtures
from .density import compute_densities, extract_isosurface, write_obj
from .errors import DesignMismatchError, ShellOptError
from .heat import HeatSolver
from .mesh import write_mesh
from .optimizer import ShellOptimizer

log = logging.getLogger("shellopt")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_ITERATION_CAP = 3


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def write_temperatures(path, mesh, values):
    with open(path, "w") as fh:
        fh.write("# vertex temperature\n")
        for v, t in zip(mesh.boundary, values):
            fh.write(f"{v} {t:.17g}\n")


def read_temperatures(path, mesh):
    """Boundary temperatures ordered like ``mesh.boundary``."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DesignMismatchError(f"cannot read design {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise DesignMismatchError(f"{path}: expected 'vertex temperature' rows")
    ids = data[:, 0].astype(np.int64)
    if len(ids) != len(mesh.boundary) or not np.array_equal(np.sort(ids), mesh.boundary):
        raise DesignMismatchError(f"{path}: gives {len(ids)} temperatures for {len(mesh.boundary)} boundary vertices")
    out = np.empty(len(mesh.boundary))
    out[mesh.boundary_local[ids]] = data[:, 1]
    return out


def write_densities(path, rho):
    with open(path, "w") as fh:
        fh.write("# tet density\n")
        for k, r in enumerate(rho):
            fh.write(f"{k} {r:.17g}\n")


def read_densities(path):
    data = np.loadtxt(path, ndmin=2)
    out = np.empty(len(data))
    out[data[:, 0].astype(np.int64)] = data[:, 1]
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_dict(result):
    return {
        "status": result.status,
        "feasible": bool(result.feasible),
        "initial_volume": result.initial_mass,
        "final_volume": result.mass,
        "reduction_percent": result.reduction,
        "iterations": result.iterations,
        "best_iteration": result.best_iteration,
        "sigma_cr": result.sigma_cr,
        "sigma_solid": result.sigma_solid,
        "allowable": result.allowable,
    }


def summary_text(s):
    return (f"status            {s['status']}\n"
            f"feasible          {s['feasible']}\n"
            f"volume initial    {s['initial_volume']:.6g}\n"
            f"volume optimized  {s['final_volume']:.6g}\n"
            f"reduction %       {s['reduction_percent']:.2f}\n"
            f"iterations        {s['iterations']}\n"
            f"sigma_cr          {s['sigma_cr']:.6g}\n"
            f"sigma_cr solid    {s['sigma_solid']:.6g}\n"
            f"allowable         {s['allowable']:.6g}\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _config(path):
    from .config import ProblemConfig  # imported late so --help stays fast
    return ProblemConfig.load(path)


def cmd_optimize(args):
    cfg = _config(args.config)
    problem = cfg.problem()
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    result = ShellOptimizer(problem, cfg.optimizer(args.threads)).run()
    summary = summary_dict(result)
    _write_json(os.path.join(out, "summary.json"), summary)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(summary_text(summary))
    with open(os.path.join(out, "convergence.csv"), "w", newline="") as fh:
        fh.write(result.log_csv())
    if result.status == "infeasible":
        log.error("fully solid design exceeds the allowable stress (%.6g > %.6g)",
                  result.sigma_solid, result.allowable)
        return EXIT_INFEASIBLE
    write_temperatures(os.path.join(out, "boundary_temperatures.txt"), problem.mesh, result.boundary_temperatures)
    write_densities(os.path.join(out, "densities.txt"), result.density.rho)
    write_obj(os.path.join(out, "inner_surface.obj"), result.surface)
    print(summary_text(summary), end="")
    if not result.feasible:
        return EXIT_INFEASIBLE
    return EXIT_OK if result.status == "converged" else EXIT_ITERATION_CAP


def cmd_analyze(args):
    cfg = _config(args.config)
    problem = cfg.problem()
    mesh = problem.mesh
    tb = read_temperatures(args.design, mesh)
    opt = ShellOptimizer(problem, cfg.optimizer(args.threads))
    ev = opt.analyze(tb)
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    names = [c.name for c in problem.cases] if problem.cases else [f"contact {v}" for v in problem.region.candidates]
    _, dens = opt.design(tb)
    solid = np.nan
    if problem.solid_fraction is not None:
        solid = opt.analyze(np.full(len(mesh.boundary), opt.config.t_upper)).sigma_cr
    report = {
        "sigma_cr": ev.sigma_cr,
        "allowable": opt.resolve_allowable(solid),
        "mass": dens.mass(mesh),
        "cases": {n: float(p) for n, p in zip(names, ev.case_peaks)},
    }
    _write_json(os.path.join(out, "analysis.json"), report)
    with open(os.path.join(out, "envelope.csv"), "w") as fh:
        fh.write("vertex,sigma_vm,case\n")
        for v, (s, c) in enumerate(zip(ev.envelope.values, ev.envelope.case_index)):
            fh.write(f"{v},{s:.17g},{c}\n")
    print(f"sigma_cr {ev.sigma_cr:.10g}")
    for n, p in report["cases"].items():
        print(f"  {n}: {p:.10g}")
    return EXIT_OK


def cmd_offset(args):
    cfg = _config(args.config)
    mesh = cfg.mesh()
    opt = cfg.optimizer(args.threads)
    if "design.file" in cfg.entries:
        tb = read_temperatures(cfg.resolve(cfg.entries["design.file"]), mesh)
    else:
        tb = np.full(len(mesh.boundary), cfg.get("design.temperature", opt.t_upper, float))
    heat = HeatSolver(mesh, opt.laplacian, t_cut=opt.t_cut, t_upper=opt.t_upper)
    field = heat(tb)
    dens = compute_densities(mesh, field, opt.t_cut)
    surface = extract_isosurface(mesh, field, opt.t_cut)
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    write_obj(os.path.join(out, "inner_surface.obj"), surface)
    write_densities(os.path.join(out, "densities.txt"), dens.rho)
    _write_json(os.path.join(out, "offset.json"), {
        "initial_volume": mesh.total_volume, "final_volume": dens.mass(mesh),
        "triangles": int(len(surface.triangles)), "clamped_vertices": field.clamped})
    print(f"volume {dens.mass(mesh):.6g} of {mesh.total_volume:.6g}, {len(surface.triangles)} triangles")
    return EXIT_OK


FIXTURE_CONFIGS = {
    "bar": ("bar.mesh", """\
# hollow bar: clamped base, transverse tip load, axial skeleton
mesh = bar.mesh
output = bar_out
material.youngs_modulus = 1000
material.poisson_ratio = 0.3
solid_fraction = 0.9
load.tip.fixed = box:-1,-1,-0.001,7,7,0.001
load.tip.at = box:-1,-1,45.999,7,7,46.001
load.tip.force = 1,0,0
"""),
    "beam": ("beam.mesh", """\
# beam under three-point bending and tension
mesh = beam.mesh
output = beam_out
material.youngs_modulus = 1000
material.poisson_ratio = 0.3
solid_fraction = 0.9
load.bending.fixed = box:-1,2.999,-0.001,5,3.001,0.001 | box:-1,2.999,39.999,5,3.001,40.001
load.bending.at = box:-1,5.999,19,5,6.001,21
load.bending.force = 0,-1,0
load.tension.fixed = box:0.999,5.999,19.999,2.001,6.001,21.001
load.tension.at = box:-1,-1,-0.001,5,7,0.001
load.tension.force = 0,0,-2.5
load.tension.at.2 = box:-1,-1,39.999,5,7,40.001
load.tension.force.2 = 0,0,2.5
"""),
    "ball": ("ball.mesh", """\
# sphere pushed anywhere on an off-axis patch, resting on a bottom support
mesh = ball.mesh
output = ball_out
material.youngs_modulus = 1000
material.poisson_ratio = 0.3
solid_fraction = 0.9
uncertainty.region = file:ball_region.txt
uncertainty.fixed = box:-2,-2,-2,2,2,-0.8
uncertainty.force_magnitude = 1
"""),
    "limbs": ("limbs.mesh", """\
# multi-limb body; offset only
mesh = limbs.mesh
output = limbs_out
design.temperature = 3
"""),
}


def cmd_fixture(args):
    """Write one of the built-in test meshes plus a matching configuration."""
    builders = {"bar": fixtures.bar, "beam": lambda: fixtures.bar(nx=4, ny=6, nz=40),
                "ball": fixtures.ball, "limbs": fixtures.limbs}
    mesh = builders[args.name]()
    os.makedirs(args.directory, exist_ok=True)
    mesh_name, text = FIXTURE_CONFIGS[args.name]
    write_mesh(os.path.join(args.directory, mesh_name), mesh)
    if args.name == "ball":
        np.savetxt(os.path.join(args.directory, "ball_region.txt"), fixtures.contact_patch(mesh), fmt="%d")
    cfg_path = os.path.join(args.directory, f"{args.name}.cfg")
    with open(cfg_path, "w") as fh:
        fh.write(text)
    print(cfg_path)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="shellopt", description="Stress-constrained hollowing of solid models.")
    p.add_argument("--threads", type=int, default=None, help="worker threads for per-case FEA")
    p.add_argument("--log-level", default="WARNING", help="logging level (DEBUG, INFO, WARNING, ...)")
    p.add_argument("--seed", type=int, default=None, help="accepted for reproducibility records; the pipeline is deterministic")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="optimize boundary temperatures under the stress limit")
    o.add_argument("config")
    o.add_argument("--output", help="override the configured output directory")
    o.set_defaults(func=cmd_optimize)

    a = sub.add_parser("analyze", help="exact stresses of a given design")
    a.add_argument("config")
    a.add_argument("--design", required=True, help="boundary temperature file")
    a.add_argument("--output", help="override the configured output directory")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("offset", help="inner surface for given boundary temperatures, no FEA")
    f.add_argument("config")
    f.add_argument("--output", help="override the configured output directory")
    f.set_defaults(func=cmd_offset)

    x = sub.add_parser("fixture", help="write a built-in mesh and example configuration")
    x.add_argument("name", choices=sorted(FIXTURE_CONFIGS))
    x.add_argument("directory")
    x.set_defaults(func=cmd_fixture)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None:
        log.info("seed %d recorded; no step of the pipeline is random", args.seed)
    try:
        return args.func(args)
    except ShellOptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
