"""Hot numeric kernels with two interchangeable backends.

The FFT butterflies and the direct 1-D convolution are the only loops in
the package that are not already BLAS-bound, so they get numba-compiled
versions alongside vectorized pure-numpy twins.  The backend is chosen at
import time: numba when importable, unless the environment variable
``STGNN_NUMBA=0`` forces the numpy path.  ``set_backend`` switches
explicitly (tests and the benchmark use it).

All kernels operate on 2-d row batches; callers reshape around them.
"""

import os

from . import _numpy as _numpy_impl

try:
    from . import _numba as _numba_impl
except ImportError:  # pragma: no cover - numba missing entirely
    _numba_impl = None

_BACKENDS = {"numpy": _numpy_impl}
if _numba_impl is not None:
    _BACKENDS["numba"] = _numba_impl


def _default_backend() -> str:
    if os.environ.get("STGNN_NUMBA", "1") == "0":
        return "numpy"
    return "numba" if "numba" in _BACKENDS else "numpy"


_impl = _BACKENDS[_default_backend()]


def set_backend(name: str):
    """Select 'numba' or 'numpy' for all subsequent kernel calls."""
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    _impl = _BACKENDS[name]


def active_backend() -> str:
    return "numba" if _impl is _numba_impl else "numpy"


def available_backends():
    return sorted(_BACKENDS)


def fft_rows(x, sign: int = -1):
    """Unnormalized DFT of each row of a complex128 (m, n) array.

    sign=-1 is the forward transform; any row length n >= 1 is supported
    (radix-2 for powers of two, Bluestein otherwise).
    """
    return _impl.fft_rows(x, sign)


def ifft_rows(x):
    """Exact inverse of `fft_rows(..., sign=-1)`, including the 1/n factor."""
    n = x.shape[1]
    if n == 0:
        return x.copy()
    return _impl.fft_rows(x, +1) / n


def conv1d_rows(x, k):
    """Same-padded cross-correlation of each row of x with 1-d kernel k."""
    return _impl.conv1d_rows(x, k)


def conv1d_kernel_grad(x, g, klen: int):
    """Gradient of `conv1d_rows` with respect to the kernel."""
    return _impl.conv1d_kernel_grad(x, g, klen)
