"""JIT shim: numba-compiled kernels with an interpreted fallback.

Hot inner loops (plant sub-stepping, controller closed-loop sims) are
decorated with :func:`njit`. Setting the environment variable
``GRIDEM_NO_NJIT=1`` before import replaces the decorator with a no-op so
the same code runs under the plain interpreter. Useful for debugging and
for the kernel benchmark (``benchmarks/bench_kernels.py``).
"""

import os

JIT_ENABLED = os.environ.get("GRIDEM_NO_NJIT", "").strip().lower() not in (
    "1",
    "true",
    "yes",
)

if JIT_ENABLED:
    from numba import njit
else:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper


def python_impl(func):
    """Return the interpreted implementation behind a kernel.

    Compiled dispatchers expose the original function as ``py_func``;
    with JIT disabled the kernel already is the plain function.
    """
    return getattr(func, "py_func", func)
