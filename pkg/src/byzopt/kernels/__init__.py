"""Hot-loop numeric kernels with a compiled core and a numpy fallback.

The compiled Cython extension is preferred; if it is missing (source
checkout without a build step) the numpy fallback is used.  Set the
environment variable ``BYZOPT_FORCE_FALLBACK=1`` to skip the extension,
e.g. for the kernel benchmark or to debug a suspected codegen issue.
"""

import os

if os.environ.get("BYZOPT_FORCE_FALLBACK", "0").lower() not in ("", "0", "false"):
    from byzopt.kernels._fallback import (
        IMPL,
        lasso_component_grad,
        penalty_direction_sum,
        saga_update,
        soft_threshold,
    )
else:
    try:
        from byzopt.kernels._core import (
            IMPL,
            lasso_component_grad,
            penalty_direction_sum,
            saga_update,
            soft_threshold,
        )
    except ImportError:
        from byzopt.kernels._fallback import (
            IMPL,
            lasso_component_grad,
            penalty_direction_sum,
            saga_update,
            soft_threshold,
        )

__all__ = [
    "IMPL",
    "lasso_component_grad",
    "penalty_direction_sum",
    "saga_update",
    "soft_threshold",
]
