"""Hot numeric kernels with numba and pure-numpy implementations.

The active backend is chosen once at import from the SCANPLAN_BACKEND
environment variable (see _compat). Import the *_nb / *_np names directly
from the submodules to pin a specific implementation, e.g. in parity tests
or benchmarks.
"""

from ._compat import BACKEND, HAS_NUMBA, USE_NUMBA
from .edt import INF_D2

if USE_NUMBA:
    from .astar import astar_grid_nb as astar_grid
    from .astar import cost_matrix_nb as cost_matrix
    from .edt import edt_sq_nb as edt_sq
    from .integrate import integrate_rays_nb as integrate_rays
    from .mc import mc_extract_nb as mc_extract
    from .raycast import raycast_depths_nb as raycast_depths
    from .visibility import rays_blocked_nb as rays_blocked
else:
    from .astar import astar_grid_np as astar_grid
    from .astar import cost_matrix_np as cost_matrix
    from .edt import edt_sq_np as edt_sq
    from .integrate import integrate_rays_np as integrate_rays
    from .mc import mc_extract_np as mc_extract
    from .raycast import raycast_depths_np as raycast_depths
    from .visibility import rays_blocked_np as rays_blocked

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "USE_NUMBA",
    "INF_D2",
    "astar_grid",
    "edt_sq",
    "integrate_rays",
    "mc_extract",
    "raycast_depths",
    "rays_blocked",
    "cost_matrix",
]
