"""Stress-constrained hollowing of solid models via a harmonic temperature field."""

from .density import (DensityField, TriangleSurface, compute_densities, extract_isosurface, is_watertight,
                      read_obj, self_intersections, void_component_count, write_obj)
from .errors import ShellOptError
from .fea import ElasticityModel, LoadCase, MaterialModel, traction_load
from .heat import HeatSolver, TemperatureField, solve_temperature
from .mesh import VertexClass, VolumetricMesh, build_mesh, load_mesh, write_mesh
from .optimizer import OptimizerConfig, ShellOptimizer, ShellProblem, ShellResult, optimize
from .stress import BoundaryProjector, StressEnvelope, effective_boundary_stress, max_envelope
from .surrogate import ContactRegion

__version__ = "0.1.0"
