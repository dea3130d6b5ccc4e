class ShellOptError(Exception):
    """Base class for every error raised by shellopt."""


class MeshParseError(ShellOptError):
    pass


class NonManifoldBoundaryError(ShellOptError):
    pass


class SkeletonMissingError(ShellOptError):
    pass


class DisconnectedSkeletonError(ShellOptError):
    pass


class DegenerateTetError(ShellOptError):
    pass


class BoundaryTagMismatchError(ShellOptError):
    pass


class SingularInteriorError(ShellOptError):
    pass


class JacobianError(ShellOptError):
    pass


class SingularSystemError(ShellOptError):
    pass


class LoadCaseError(ShellOptError):
    pass


class EmptyEnvelopeError(ShellOptError):
    pass


class OrphanVertexError(ShellOptError):
    def __init__(self, vertex, radius):
        super().__init__(f"vertex {vertex} has no boundary vertex within graph distance {radius:g}")
        self.vertex = vertex
        self.radius = radius


class SampleCountError(ShellOptError):
    pass


class EigenSolverError(ShellOptError):
    pass


class ConfigError(ShellOptError):
    pass


class DesignMismatchError(ShellOptError):
    pass
