"""Numba switch for the hot kernels.

Every kernel in the package is written in the numba-compatible subset of
Python/numpy and decorated with :func:`njit` from this module.  Setting the
environment variable ``EXCLSPREAD_DISABLE_NUMBA=1`` before import (or running
without numba installed) turns the decorator into the identity, so the very
same source runs under the interpreter on plain numpy arrays.
"""

import contextlib
import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

ENV_FLAG = "EXCLSPREAD_DISABLE_NUMBA"

_disabled = os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")

numba = None
if not _disabled:
    try:
        import numba
    except ImportError:  # pragma: no cover
        logger.warning("numba not importable, falling back to the interpreter")
        numba = None

USING_NUMBA = numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` with the package defaults, or a null decorator."""
    if USING_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def kernel_context():
    """Context for calling a kernel.

    The interpreter path does uint64 arithmetic on numpy scalars, which warns
    on the (intended) wrap-around; compiled code wraps silently.
    """
    if USING_NUMBA:
        return contextlib.nullcontext()
    return np.errstate(over="ignore")


def backend_name():
    return "numba" if USING_NUMBA else "python"
