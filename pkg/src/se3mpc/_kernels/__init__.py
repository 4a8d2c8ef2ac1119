"""Kernel backend selection.

Imports the compiled extension if it is available, otherwise falls back to
the pure-numpy twin.  Set ``SE3MPC_PURE_PYTHON=1`` to force the fallback
(used by the backend parity tests and the kernel benchmark).
"""

import os

from . import _purepy

try:
    from . import _core
except ImportError:
    _core = None

if os.environ.get("SE3MPC_PURE_PYTHON", "") == "1" or _core is None:
    _impl = _purepy
else:
    _impl = _core

BACKEND = _impl.BACKEND
exp_so3 = _impl.exp_so3
log_so3 = _impl.log_so3
exp_se3 = _impl.exp_se3
log_se3 = _impl.log_se3
rollout = _impl.rollout

#: Every importable backend, for parity tests and the kernel benchmark.
AVAILABLE = {"python": _purepy}
if _core is not None:
    AVAILABLE["compiled"] = _core
