"""Reactive blobs: minimally resolved absorbing particles on a cell-centered grid.

Set ``REACTIVE_BLOBS_THREADS`` before import to cap the BLAS/OpenMP thread
count; the stencil kernels themselves are single threaded.
"""

import os as _os

_threads = _os.environ.get("REACTIVE_BLOBS_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from ._backend import NAME as backend  # noqa: E402
from .grid import (  # noqa: E402
    PERIODIC,
    Dirichlet,
    GridSpec,
    Periodic,
    ScalarField,
    apply_helmholtz,
    apply_laplacian,
    dot,
    mean,
    subtract_mean,
    write_field_csv,
)
from .kernels import (  # noqa: E402
    BlobSet,
    BlobStencil,
    KernelKind,
    blob_volume,
    interpolate,
    kernel_volume,
    kernel_weight,
    spread,
)
from .krylov import ConvergenceHistory, KrylovConfig, fgmres, gmres_fixed  # noqa: E402
from .multigrid import MultigridHierarchy, SolvabilityError, solve_approx, v_cycle  # noqa: E402
from .packing import Packing, SaturationError, generate_packing  # noqa: E402
from .solvers import (  # noqa: E402
    ReactionSystem,
    SaddlePointProblem,
    apply_reaction_operator,
    compute_gamma,
    solve_saddle,
    solve_steady_finite_kappa,
    step_backward_euler,
)

__version__ = "0.1.0"
