"""Boundary-temperature optimization of the shell under a stress constraint.

Each iteration solves the temperature field, derives densities, evaluates the
stress envelope, projects it onto the boundary, and redistributes a global
temperature budget toward highly stressed boundary regions.  The budget grows
while the design is overstressed and shrinks otherwise, with the step halved
on every change of direction.
"""

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .density import compute_densities, extract_isosurface
from .errors import ConfigError
from .fea import ElasticityModel, LoadCase
from .heat import T_CUTOFF, T_UPPER, HeatSolver
from .stress import DEFAULT_EXPONENT, BoundaryProjector, StressEnvelope, max_envelope
from .surrogate import (ContactRegion, boundary_force_magnitudes, build_bases, build_force_samples,
                        candidate_neighbors, estimate_envelope, fit_map, hierarchical_critical_search,
                        laplacian_eigenbasis, sample_contacts)

log = logging.getLogger(__name__)

LOG_COLUMNS = ("iteration", "mass", "sigma_cr", "budget", "step_size", "wall_time_s")


@dataclass(frozen=True)
class OptimizerConfig:
    t_cut: float = T_CUTOFF
    t_upper: float = T_UPPER
    radius: float = None  # EBS reach; None means 10 mean edge lengths
    exponent: float = DEFAULT_EXPONENT
    kappa: float = 5.0
    alpha: float = 0.5
    h_init: float = 0.1
    h_min: float = 1e-8
    max_iterations: int = 200
    case_threshold: int = 32
    samples: int = 40
    basis_size: int = 15
    ridge: float = None
    top_k: int = 10
    laplacian: str = "fem"
    element_order: int = 2
    threads: int = 1
    log_wall_time: bool = False

    def __post_init__(self):
        checks = [
            (0 <= self.t_cut < self.t_upper, "need 0 <= t_cut < t_upper"),
            (self.radius is None or self.radius > 0, "radius must be positive"),
            (self.exponent > 0, "exponent must be positive"),
            (self.kappa > 0, "kappa must be positive"),
            (0 < self.alpha <= 1, "alpha must lie in (0, 1]"),
            (0 < self.h_min < self.h_init <= 1, "need 0 < h_min < h_init <= 1"),
            (self.max_iterations >= 1, "max_iterations must be >= 1"),
            (self.case_threshold >= 1, "case_threshold must be >= 1"),
            (self.samples >= 2, "samples must be >= 2"),
            (self.basis_size >= 1, "basis_size must be >= 1"),
            (self.ridge is None or self.ridge >= 0, "ridge must be non-negative"),
            (self.top_k >= 1, "top_k must be >= 1"),
            (self.laplacian in ("fem", "graph"), "laplacian must be 'fem' or 'graph'"),
            (self.element_order in (1, 2), "element_order must be 1 or 2"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


@dataclass(eq=False)
class ShellProblem:
    """Mesh, material, loading, and the stress limit.

    The limit is ``allowable`` if given, else the fully solid critical stress
    divided by ``solid_fraction`` if given, else the material's yield
    strength over its safety factor.
    """

    mesh: object
    material: object
    cases: list = field(default_factory=list)
    region: ContactRegion = None
    allowable: float = None
    solid_fraction: float = None

    def __post_init__(self):
        if bool(self.cases) == (self.region is not None):
            raise ConfigError("give either explicit load cases or a contact region, not both")
        if self.allowable is not None and self.allowable < 0:
            raise ConfigError("allowable stress must be non-negative")
        if self.solid_fraction is not None and not 0 < self.solid_fraction <= 1:
            raise ConfigError("solid_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class Evaluation:
    envelope: StressEnvelope
    sigma_cr: float
    case_peaks: np.ndarray = None


@dataclass(eq=False)
class ShellResult:
    status: str  # converged, iteration_cap, infeasible
    boundary_temperatures: np.ndarray
    temperature: object
    density: object
    surface: object
    mass: float
    initial_mass: float
    sigma_cr: float
    sigma_solid: float
    allowable: float
    iterations: int
    best_iteration: int
    log: list

    @property
    def feasible(self):
        return self.status != "infeasible" and self.sigma_cr <= self.allowable

    @property
    def reduction(self):
        return 100.0 * (1.0 - self.mass / self.initial_mass)

    def log_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.log:
            w.writerow([row["iteration"]] + [_fmt(row[c]) for c in LOG_COLUMNS[1:]])
        return buf.getvalue()


def _fmt(x):
    return "" if x is None else f"{x:.17g}"


# ---------------------------------------------------------------------------
# budget arithmetic
# ---------------------------------------------------------------------------

def scale_temperatures(t_boundary, t_cut=T_CUTOFF, t_upper=T_UPPER):
    return (np.asarray(t_boundary, float) - t_cut) / (t_upper - t_cut)


def unscale_temperatures(scaled, t_cut=T_CUTOFF, t_upper=T_UPPER):
    return t_cut + np.asarray(scaled, float) * (t_upper - t_cut)


def update_budget(scaled_total, sigma_cr, allowable, n_boundary, step, direction=0):
    """New budget, step and direction.

    The budget moves up by ``step * n_boundary`` when overstressed and down
    otherwise.  The step is halved before use whenever the direction differs
    from the previous nonzero ``direction``.  The budget is clamped to
    ``[0, n_boundary]``.
    """
    new_dir = 1 if sigma_cr > allowable else -1
    if direction and new_dir != direction:
        step = 0.5 * step
    budget = min(max(scaled_total + new_dir * step * n_boundary, 0.0), float(n_boundary))
    return budget, step, new_dir


def distribute_budget(tau, budget, kappa):
    """Scaled boundary temperatures in ``[0, 1]`` summing to ``min(budget, n_b)``.

    Shares are proportional to ``tau**kappa``; shares above one are capped and
    the excess is re-spread over the remaining vertices.
    """
    tau = np.asarray(tau, float)
    n = len(tau)
    out = np.zeros(n)
    budget = min(float(budget), float(n))
    if budget <= 0 or n == 0:
        return out
    top = tau.max()
    w = (tau / top) ** kappa if top > 0 else np.ones(n)
    if w.sum() == 0:
        w = np.ones(n)
    free = np.ones(n, bool)
    remaining = budget
    while True:
        idx = np.flatnonzero(free)
        wf = w[idx]
        if wf.sum() == 0:
            wf = np.ones(len(idx))
        share = remaining * wf / wf.sum()
        over = share >= 1.0
        if not over.any():
            out[idx] = share
            return out
        out[idx[over]] = 1.0
        free[idx[over]] = False
        remaining = budget - (n - free.sum())
        if not free.any() or remaining <= 0:
            return out


def blend(previous, new, alpha):
    return alpha * np.asarray(new, float) + (1.0 - alpha) * np.asarray(previous, float)


# ---------------------------------------------------------------------------
# stress evaluation
# ---------------------------------------------------------------------------

def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class ExactEvaluator:
    """Per-case FEA, one factorization per distinct Dirichlet set."""

    def __init__(self, model, cases, threads=1):
        self.model = model
        self.cases = list(cases)
        self.threads = threads
        groups = {}
        for k, c in enumerate(self.cases):
            groups.setdefault(c.fixed.tobytes(), []).append(k)
        self.groups = list(groups.values())

    def fields(self, rho):
        out = [None] * len(self.cases)
        for members in self.groups:
            system = self.model.factorize(rho, self.cases[members[0]].fixed)

            def one(k):
                return self.model.von_mises(rho, system.solve(self.cases[k]))

            for k, f in zip(members, _map(one, members, self.threads)):
                out[k] = f
        return out

    def __call__(self, rho):
        fields = self.fields(rho)
        env = max_envelope(fields)
        return Evaluation(env, env.critical, np.array([f.max() for f in fields]))

    exhaustive = __call__


class SurrogateEvaluator:
    """Critical stress under an uncertain contact point via the reduced-order model."""

    def __init__(self, model, region, config):
        self.model = model
        self.region = region
        self.config = config
        mesh = model.mesh
        self.samples = build_force_samples(mesh, region, region.candidates)
        self.magnitudes = boundary_force_magnitudes(mesh, self.samples)
        p = min(config.samples, len(region))
        train = sample_contacts(mesh, region.candidates, p)
        self.train_idx = np.searchsorted(region.candidates, train)
        self.eigen = laplacian_eigenbasis(mesh, config.basis_size)
        self.neighbors = candidate_neighbors(mesh, region.candidates)
        # diagnostics of the latest call: surrogate estimate, exact peaks by candidate, critical candidate
        self.last_estimate, self.last_exact, self.last_critical = None, {}, None

    def _solver(self, rho):
        system = self.model.factorize(rho, self.region.fixed)

        def field(k):
            return self.model.von_mises(rho, system.solve(self.samples.load_case(k, self.region.fixed)))

        return field

    def __call__(self, rho):
        cfg = self.config
        field = self._solver(rho)
        train_fields = np.stack(_map(field, list(self.train_idx), cfg.threads))
        bases = build_bases(self.model.mesh, self.magnitudes[self.train_idx], train_fields,
                            cfg.basis_size, eigen=self.eigen)
        qmap = fit_map(bases, self.magnitudes[self.train_idx], train_fields, cfg.ridge)
        est = estimate_envelope(qmap, bases, self.magnitudes)
        exact_fields = dict(zip(self.train_idx.tolist(), train_fields))

        def peak(k):
            exact_fields[k] = field(k)
            return exact_fields[k].max()

        known = {k: float(f.max()) for k, f in exact_fields.items()}
        sigma_cr, best, exact = hierarchical_critical_search(est.peaks, peak, cfg.top_k, self.neighbors, known)
        self.last_estimate, self.last_exact, self.last_critical = est, exact, best
        values = np.max(np.vstack([est.envelope.values] + list(exact_fields.values())), axis=0)
        env = StressEnvelope(values, est.envelope.case_index)
        return Evaluation(env, sigma_cr)

    def exhaustive(self, rho):
        field = self._solver(rho)
        fields = _map(field, list(range(len(self.region))), self.config.threads)
        env = max_envelope(fields)
        return Evaluation(env, env.critical, np.array([f.max() for f in fields]))


def make_evaluator(problem, model, config):
    if problem.region is not None and len(problem.region) > config.case_threshold:
        return SurrogateEvaluator(model, problem.region, config)
    cases = problem.cases
    if problem.region is not None:
        samples = build_force_samples(problem.mesh, problem.region, problem.region.candidates)
        cases = [samples.load_case(k, problem.region.fixed) for k in range(len(problem.region))]
    return ExactEvaluator(model, cases, config.threads)


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

class ShellOptimizer:
    def __init__(self, problem, config=None):
        self.problem = problem
        self.config = config or OptimizerConfig()
        cfg = self.config
        mesh = problem.mesh
        self.heat = HeatSolver(mesh, cfg.laplacian, t_cut=cfg.t_cut, t_upper=cfg.t_upper)
        self.projector = BoundaryProjector(mesh, cfg.radius, cfg.exponent)
        self.model = ElasticityModel(mesh, problem.material, cfg.element_order)
        self.evaluator = make_evaluator(problem, self.model, cfg)

    def design(self, t_boundary):
        field = self.heat(t_boundary)
        return field, compute_densities(self.problem.mesh, field, self.config.t_cut)

    def analyze(self, t_boundary):
        """Exact stresses of the design induced by ``t_boundary`` over every load instant."""
        _, dens = self.design(t_boundary)
        return self.evaluator.exhaustive(dens.rho)

    def resolve_allowable(self, sigma_solid):
        p = self.problem
        if p.allowable is not None:
            return float(p.allowable)
        if p.solid_fraction is not None:
            return sigma_solid / p.solid_fraction
        return p.material.allowable

    def run(self):
        cfg, mesh = self.config, self.problem.mesh
        nb = len(mesh.boundary)
        clock = time.perf_counter()
        tb = np.full(nb, cfg.t_upper)
        field, dens = self.design(tb)
        solid = self.evaluator.exhaustive(dens.rho)
        allowable = self.resolve_allowable(solid.sigma_cr)
        initial_mass = mesh.total_volume
        log.info("solid critical stress %.6g, allowable %.6g", solid.sigma_cr, allowable)
        if solid.sigma_cr > allowable:
            log.warning("fully solid design exceeds the allowable stress")
            return ShellResult("infeasible", tb, field, dens, None, dens.mass(mesh), initial_mass,
                               solid.sigma_cr, solid.sigma_cr, allowable, 0, 0, [])

        rows = []
        step, direction = cfg.h_init, 0
        best = (dens.mass(mesh), 0, tb)
        candidates = []
        ev = solid
        status = "iteration_cap"
        iteration = 0
        for iteration in range(1, cfg.max_iterations + 1):
            if iteration > 1:
                field, dens = self.design(tb)
                ev = self.evaluator(dens.rho)
            mass = dens.mass(mesh)
            feasible = ev.sigma_cr <= allowable
            if feasible:
                candidates.append((mass, iteration, tb))
                if mass < best[0]:
                    best = (mass, iteration, tb)
            scaled = scale_temperatures(tb, cfg.t_cut, cfg.t_upper)
            budget, step, direction = update_budget(scaled.sum(), ev.sigma_cr, allowable, nb, step, direction)
            rows.append({"iteration": iteration, "mass": mass, "sigma_cr": ev.sigma_cr, "budget": budget,
                         "step_size": step,
                         "wall_time_s": time.perf_counter() - clock if cfg.log_wall_time else None})
            log.info("iter %d mass %.6g sigma_cr %.6g budget %.6g h %.3g", iteration, mass, ev.sigma_cr, budget, step)
            if step < cfg.h_min:
                status = "converged"
                break
            tau = self.projector(ev.envelope).values
            new = unscale_temperatures(distribute_budget(tau, budget, cfg.kappa), cfg.t_cut, cfg.t_upper)
            tb_next = np.clip(blend(tb, new, cfg.alpha), cfg.t_cut, cfg.t_upper)
            if np.array_equal(tb_next, tb):
                status = "converged"
                break
            tb = tb_next

        mass, best_it, tb_best = best
        final = None
        if isinstance(self.evaluator, SurrogateEvaluator):
            # surrogate feasibility is only a lower bound; confirm exactly, lightest first
            for mass, best_it, tb_best in sorted(candidates, key=lambda c: (c[0], c[1])):
                final = self.analyze(tb_best)
                if final.sigma_cr <= allowable:
                    break
            else:
                mass, best_it, tb_best, final = initial_mass, 0, np.full(nb, cfg.t_upper), solid
        field, dens = self.design(tb_best)
        if final is None:
            final = self.evaluator.exhaustive(dens.rho)
        surface = extract_isosurface(mesh, field, cfg.t_cut)
        return ShellResult(status, tb_best, field, dens, surface, dens.mass(mesh), initial_mass, final.sigma_cr,
                           solid.sigma_cr, allowable, iteration, best_it, rows)


def optimize(problem, config=None):
    return ShellOptimizer(problem, config).run()


__all__ = ["OptimizerConfig", "ShellProblem", "ShellResult", "ShellOptimizer", "Evaluation", "LoadCase",
           "update_budget", "distribute_budget", "blend", "optimize", "scale_temperatures",
           "unscale_temperatures", "LOG_COLUMNS"]
