"""Error-state convex MPC on SE(3).

Subpackages: ``lie`` (group operators), ``dynamics`` (rigid-body plant),
``mpc`` (error-state controller), ``qp`` (ADMM solver), ``quadruped``
(stance GRF MPC) and ``bench`` (CLI experiment harness).  The hot kernels
live in a compiled extension with a pure-numpy fallback selected at import;
``se3mpc.KERNEL_BACKEND`` reports which one is active.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
