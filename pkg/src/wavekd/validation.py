"""Input validation helpers shared across the package."""

import numpy as np


def check_finite_1d(a, name="array"):
    """Coerce to a 1-D float64/complex128 array and reject NaN/Inf."""
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name} must be non-empty")
    a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=False)
    if not np.all(np.isfinite(a if not np.iscomplexobj(a) else np.abs(a))):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_kernel(h, name="kernel"):
    """Validate an even-length FIR kernel (2L taps, tau = index - L)."""
    h = check_finite_1d(h, name)
    if len(h) % 2 != 0:
        raise ValueError(f"{name} must have even length 2L, got {len(h)}")
    return h


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_stride(stride):
    s = int(stride)
    if s < 1 or s != stride:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    return s
