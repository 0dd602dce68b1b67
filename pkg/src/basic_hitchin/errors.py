"""Exception hierarchy shared by every module of the package."""


class BasicHitchinError(Exception):
    """Base class; ``module`` names the stage that raised it."""

    module = "core"


class GeometryError(BasicHitchinError):
    module = "transverse_geometry"


class InvalidGluing(GeometryError):
    pass


class GenusMismatch(GeometryError):
    pass


class DegreeOutOfRange(GeometryError):
    pass


class DegreeMismatch(GeometryError):
    pass


class ConfigError(GeometryError):
    pass


class FormsError(BasicHitchinError):
    module = "matrix_forms"


class RankMismatch(FormsError):
    pass


class NotUnitary(FormsError):
    pass


class CheckpointError(FormsError):
    pass


class SolverError(BasicHitchinError):
    module = "hitchin_solver"


class NonConvergence(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NaNDetected(SolverError):
    pass


class NewtonStall(SolverError):
    pass


class DeformationError(BasicHitchinError):
    module = "deformation_complex"


class GapTooSmall(DeformationError):
    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class AssemblyOverflow(DeformationError):
    pass


class CGDivergence(DeformationError):
    pass


class FixedPointDivergence(DeformationError):
    pass
