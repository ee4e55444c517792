"""Exception types raised across the package."""


class ScanPlanError(Exception):
    """Base class for all scanplan errors."""


class DegenerateDirection(ScanPlanError):
    """Look-at target coincides with the eye position."""


class OriginOutsideGrid(ScanPlanError):
    """Ray origin does not fall inside the voxel grid."""


class OutOfBounds(ScanPlanError):
    """Query point lies outside the grid extents."""


class FormatError(ScanPlanError):
    """Malformed scene or map file."""


class InvariantError(ScanPlanError):
    """File parsed cleanly but violates a structural invariant."""


class InfeasibleLayout(ScanPlanError):
    """Requested floorplan cannot be packed into the given extents."""


class PoseInsideSolid(ScanPlanError):
    """Camera pose placed inside solid matter."""


class PoseOutOfBounds(ScanPlanError):
    """Camera pose placed outside the mapped volume."""


class NoPath(ScanPlanError):
    """Goal unreachable under the clearance constraint."""


class MatrixNotSquare(ScanPlanError):
    """Tour solver handed a non-square cost matrix."""


class NoTasksAvailable(ScanPlanError):
    """Every task generator came back empty; the episode is finished."""


class EmptyMesh(ScanPlanError):
    """Metrics requested for a mesh with no triangles."""
