"""Sampled-signal types and the strided convolution / analytic-signal primitives.

Kernel convention used throughout: an FIR of length 2L is stored as an array
``h`` with ``h[c]`` holding the tap at lag ``tau = c - L``, so the center of
the filter sits at index L.
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import check_finite_1d, check_kernel, check_positive, check_stride


@dataclass(frozen=True)
class Signal:
    """A finite real-valued discrete-time waveform with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = check_finite_1d(self.samples, "samples")
        if np.iscomplexobj(samples):
            raise ValueError("Signal samples must be real; use ComplexSignal")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", check_positive(self.sample_rate, "sample_rate"))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ComplexSignal:
    """A complex-valued sequence stored as one complex128 array."""

    values: np.ndarray

    def __post_init__(self):
        v = check_finite_1d(self.values, "values")
        object.__setattr__(self, "values", v.astype(np.complex128, copy=False))

    @property
    def real(self):
        return self.values.real

    @property
    def imag(self):
        return self.values.imag

    def __len__(self):
        return len(self.values)


def _as_array(x):
    if isinstance(x, Signal):
        return x.samples
    if isinstance(x, ComplexSignal):
        return x.values
    return check_finite_1d(x, "signal")


def strided_windows(x, half_length, stride):
    """Windows of the zero-padded signal so that ``windows @ h[::-1]`` equals
    the strided convolution. Shape (ceil(T/stride), 2L); rows may be complex."""
    x = _as_array(x)
    L = int(half_length)
    s = check_stride(stride)
    T = len(x)
    n_out = -(-T // s)
    pad = np.zeros(L, dtype=x.dtype)
    xp = np.concatenate([pad, x, pad])
    if 2 * L > len(xp):
        raise ValueError(f"kernel length {2 * L} exceeds padded signal length {len(xp)}")
    view = np.lib.stride_tricks.sliding_window_view(xp, 2 * L)
    return view[1 :: s][:n_out]


def strided_conv(x, h, stride):
    """Convolve with an even-length FIR and subsample.

    output[t] = sum_{tau=-L}^{L-1} x[stride*t - tau] * h[tau], with x
    zero-padded by L samples at both ends; output length ceil(T/stride).
    """
    h = check_kernel(h)
    L = len(h) // 2
    w = strided_windows(x, L, stride)
    return w @ h[::-1]


def analytic_signal(x):
    """x + i*H(x) via one-sided spectrum doubling; the real part is x itself.

    Odd-length inputs are zero-padded internally and trimmed back.
    """
    arr = _as_array(x)
    if np.iscomplexobj(arr):
        raise ValueError("analytic_signal expects a real signal")
    n = len(arr)
    padded = arr if n % 2 == 0 else np.concatenate([arr, [0.0]])
    m = len(padded)
    spec = np.fft.fft(padded)
    gain = np.zeros(m)
    gain[0] = 1.0
    gain[m // 2] = 1.0
    gain[1 : m // 2] = 2.0
    z = np.fft.ifft(spec * gain)[:n]
    return ComplexSignal(arr + 1j * z.imag)


def fft_convolve(x, h):
    """Linear convolution via FFTs sized to the next power of two.

    Matches np.convolve(x, h) to roundoff; intended for long teacher FIRs.
    """
    x = _as_array(x)
    h = check_finite_1d(h, "kernel")
    n = len(x) + len(h) - 1
    nfft = 1 << (n - 1).bit_length()
    out = np.fft.ifft(np.fft.fft(x, nfft) * np.fft.fft(h, nfft))[:n]
    if not (np.iscomplexobj(x) or np.iscomplexobj(h)):
        return out.real
    return out
