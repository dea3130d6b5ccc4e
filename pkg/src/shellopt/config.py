"""Flat ``key = value`` problem configuration.

Vertex selections are written as ``box:xmin,ymin,zmin,xmax,ymax,zmax``,
``ids:3,7,12``, ``file:path`` (whitespace separated ids), ``boundary``, or a
union of those joined by ``|``.
"""

import dataclasses
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fea import LoadCase, MaterialModel, traction_load, uniform_load
from .mesh import load_mesh
from .optimizer import OptimizerConfig, ShellProblem
from .surrogate import ContactRegion

DEFAULT_SPREAD_EDGES = 4.0

_OPTIMIZER_KEYS = {f.name: f.type for f in dataclasses.fields(OptimizerConfig)}
_TOP_KEYS = {"mesh", "output", "allowable", "solid_fraction", "design.temperature", "design.file",
             "material.youngs_modulus", "material.poisson_ratio", "material.yield_strength",
             "material.safety_factor", "material.void_scale", "material.penalty",
             "uncertainty.region", "uncertainty.fixed", "uncertainty.force_magnitude",
             "uncertainty.spread_radius"}
_LOAD_KEY = re.compile(r"^load\.([A-Za-z0-9_-]+)\.(fixed|at|force|distribution)(?:\.(\d+))?$")


def parse_text(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


@dataclass(eq=False)
class ProblemConfig:
    path: str
    entries: dict
    base_dir: str = field(init=False)

    def __post_init__(self):
        self.base_dir = os.path.dirname(os.path.abspath(self.path))
        for key in self.entries:
            if key in _TOP_KEYS or key in _OPTIMIZER_KEYS or _LOAD_KEY.match(key):
                continue
            raise ConfigError(f"unknown configuration key {key!r}")
        if "mesh" not in self.entries:
            raise ConfigError("configuration lacks 'mesh'")
        if "allowable" in self.entries and "solid_fraction" in self.entries:
            raise ConfigError("give at most one of 'allowable' and 'solid_fraction'")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls(path, parse_text(text))

    def resolve(self, relpath):
        return relpath if os.path.isabs(relpath) else os.path.join(self.base_dir, relpath)

    def get(self, key, default=None, kind=str):
        if key not in self.entries:
            return default
        raw = self.entries[key]
        try:
            if kind is bool:
                if raw.lower() in ("1", "true", "yes", "on"):
                    return True
                if raw.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc

    @property
    def output_dir(self):
        return self.resolve(self.get("output", "out"))

    def mesh(self):
        return load_mesh(self.resolve(self.entries["mesh"]))

    def material(self):
        try:
            return MaterialModel(
                youngs_modulus=self.get("material.youngs_modulus", 1.0, float),
                poisson_ratio=self.get("material.poisson_ratio", 0.3, float),
                yield_strength=self.get("material.yield_strength", 1.0, float),
                safety_factor=self.get("material.safety_factor", 1.0, float),
                void_scale=self.get("material.void_scale", 1e-8, float),
                penalty=self.get("material.penalty", 3.0, float),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def optimizer(self, threads=None):
        kw = {}
        for key, typ in _OPTIMIZER_KEYS.items():
            if key in self.entries:
                kind = {"int": int, "bool": bool, "str": str}.get(getattr(typ, "__name__", str(typ)), float)
                kw[key] = self.get(key, kind=kind)
        if threads is not None:
            kw["threads"] = threads
        return OptimizerConfig(**kw)

    def select(self, mesh, spec):
        return select_vertices(mesh, spec, self.resolve)

    def load_cases(self, mesh):
        """Cases from ``load.<name>.*`` keys.

        A case may carry several force groups: ``at``/``force`` plus numbered
        ``at.2``/``force.2`` and so on, each with an optional ``distribution``.
        """
        groups = {}
        for key in self.entries:
            m = _LOAD_KEY.match(key)
            if m:
                groups.setdefault(m.group(1), set()).add(m.group(3) or "")
        cases = []
        for name in sorted(groups):
            pre = f"load.{name}."
            if pre + "fixed" not in self.entries:
                raise ConfigError(f"load case {name!r} lacks 'fixed'")
            fixed = self.select(mesh, self.entries[pre + "fixed"])
            nodes, values = [], []
            for tag in sorted(groups[name], key=lambda t: int(t) if t else 0):
                sfx = f".{tag}" if tag else ""
                for part in ("at", "force"):
                    if pre + part + sfx not in self.entries:
                        raise ConfigError(f"load case {name!r} lacks '{part}{sfx}'")
                at = self.select(mesh, self.entries[pre + "at" + sfx])
                at = at[mesh.vertex_class[at] == 0]
                if len(at) == 0:
                    raise ConfigError(f"load case {name!r} selects no boundary vertex")
                force = _floats(self.entries[pre + "force" + sfx], 3, pre + "force" + sfx)
                dist = self.get(pre + "distribution" + sfx, "area")
                if dist == "area":
                    n, v = traction_load(mesh, at, force)
                elif dist == "uniform":
                    n, v = uniform_load(at, force)
                else:
                    raise ConfigError(f"unknown distribution {dist!r} for load case {name!r}")
                nodes.append(n)
                values.append(v)
            cases.append(LoadCase(fixed, np.concatenate(nodes), np.concatenate(values), name=name))
        return cases

    def region(self, mesh):
        cand = self.select(mesh, self.entries["uncertainty.region"])
        cand = cand[mesh.vertex_class[cand] == 0]
        if "uncertainty.fixed" not in self.entries:
            raise ConfigError("uncertainty region needs 'uncertainty.fixed'")
        fixed = self.select(mesh, self.entries["uncertainty.fixed"])
        cand = np.setdiff1d(cand, fixed)
        radius = self.get("uncertainty.spread_radius", DEFAULT_SPREAD_EDGES * mesh.mean_edge_length, float)
        return ContactRegion(cand, fixed, self.get("uncertainty.force_magnitude", 1.0, float), radius)

    def problem(self, mesh=None):
        has_loads = any(_LOAD_KEY.match(k) for k in self.entries)
        has_region = "uncertainty.region" in self.entries
        if has_loads == has_region:
            raise ConfigError("give either load.* cases or uncertainty.region, not both")
        mesh = self.mesh() if mesh is None else mesh
        solid_fraction = self.get("solid_fraction", None, float)
        allowable = self.get("allowable", None, float)
        return ShellProblem(mesh, self.material(),
                            cases=[] if has_region else self.load_cases(mesh),
                            region=self.region(mesh) if has_region else None,
                            allowable=allowable, solid_fraction=solid_fraction)


def _floats(text, count, key):
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad numbers for {key!r}: {text!r}") from exc
    if len(vals) != count:
        raise ConfigError(f"{key!r} needs {count} numbers, got {len(vals)}")
    return np.array(vals)


def select_vertices(mesh, spec, resolve=lambda p: p):
    """Sorted vertex ids matched by a selection expression."""
    out = []
    for part in (s.strip() for s in spec.split("|")):
        kind, _, arg = part.partition(":")
        kind = kind.strip().lower()
        if kind == "box":
            lo_hi = _floats(arg, 6, "box")
            tol = 1e-9 * max(np.ptp(mesh.vertices, axis=0).max(), 1.0)
            inside = np.all((mesh.vertices >= lo_hi[:3] - tol) & (mesh.vertices <= lo_hi[3:] + tol), axis=1)
            out.append(np.flatnonzero(inside))
        elif kind == "ids":
            try:
                ids = np.array([int(t) for t in arg.replace(",", " ").split()], np.int64)
            except ValueError as exc:
                raise ConfigError(f"bad vertex ids in {part!r}") from exc
            out.append(ids)
        elif kind == "file":
            try:
                with open(resolve(arg.strip())) as fh:
                    ids = np.array([int(t) for t in fh.read().split()], np.int64)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read vertex ids from {arg!r}: {exc}") from exc
            out.append(ids)
        elif kind == "boundary":
            out.append(mesh.boundary)
        else:
            raise ConfigError(f"unknown selection {part!r}")
    ids = np.unique(np.concatenate(out)) if out else np.zeros(0, np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= mesh.n_vertices):
        raise ConfigError(f"selection {spec!r} refers to vertices outside the mesh")
    return ids
