"""Stress envelope over load cases and its projection onto the outer boundary."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import EmptyEnvelopeError, OrphanVertexError
from .mesh import boundary_distance_table

DEFAULT_RADIUS_EDGES = 10.0
DEFAULT_EXPONENT = 3.0
SELF_DISTANCE_FLOOR = 1e-3  # in mean edge lengths


@dataclass(frozen=True, eq=False)
class StressEnvelope:
    values: np.ndarray
    case_index: np.ndarray

    @property
    def critical(self):
        return float(self.values.max())

    @property
    def critical_vertex(self):
        return int(np.argmax(self.values))


@dataclass(frozen=True, eq=False)
class BoundaryStress:
    values: np.ndarray  # one entry per mesh.boundary vertex


def max_envelope(fields):
    fields = [np.asarray(f, float) for f in fields]
    if not fields:
        raise EmptyEnvelopeError("no stress fields to reduce")
    if len({f.shape for f in fields}) != 1:
        raise ValueError("stress fields differ in length")
    stack = np.stack(fields)
    idx = np.argmax(stack, axis=0)
    return StressEnvelope(np.take_along_axis(stack, idx[None], 0)[0], idx)


class BoundaryProjector:
    """Sparse map from per-vertex stress to effective boundary stress.

    Every vertex spreads its stress over the boundary vertices within graph
    distance ``radius`` with weights ``d**-exponent`` normalized per source.
    A boundary vertex reaches itself at a floored distance so it keeps the
    dominant share of its own stress.
    """

    def __init__(self, mesh, radius=None, exponent=DEFAULT_EXPONENT):
        h = mesh.mean_edge_length
        self.radius = DEFAULT_RADIUS_EDGES * h if radius is None else float(radius)
        self.exponent = float(exponent)
        ptr, targets, dists = boundary_distance_table(mesh, self.radius)
        rows = np.repeat(np.arange(len(mesh.boundary)), np.diff(ptr))
        dists = np.maximum(dists, SELF_DISTANCE_FLOOR * h)
        w = dists ** -self.exponent
        covered = np.bincount(targets, minlength=mesh.n_vertices) > 0
        if not covered.all():
            v = int(np.flatnonzero(~covered)[0])
            raise OrphanVertexError(v, self.radius)
        norm = np.bincount(targets, weights=w, minlength=mesh.n_vertices)
        self.matrix = sparse.csr_matrix((w / norm[targets], (rows, targets)),
                                        shape=(len(mesh.boundary), mesh.n_vertices))
        self.matrix.sum_duplicates()

    def __call__(self, stress):
        values = stress.values if isinstance(stress, StressEnvelope) else np.asarray(stress, float)
        return BoundaryStress(self.matrix @ values)


def effective_boundary_stress(envelope, mesh, radius=None, exponent=DEFAULT_EXPONENT):
    return BoundaryProjector(mesh, radius, exponent)(envelope)
