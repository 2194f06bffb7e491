"""Dual-tree complex wavelet transform with octave subbands decimated by 2^j.

Band ``j`` (0-indexed) covers the octave (2^-(j+1)*pi, 2^-j*pi] in normalized
frequency and is kept at decimation 2^j, i.e. twice the density of the
critically sampled transform; the lowpass chain is decimated normally.  This
makes every band exactly ceil(T/2^j) samples long (T a multiple of 2^J), so a
further stride of 2^(J-j) lands all bands on a common frame grid.

Conventions (fixed, exercised by the round-trip tests):

* Periodic (circular) boundary handling at every level.  Signals are
  zero-padded up to the next multiple of 2^J first, so the wrap only touches
  the padding for interior content.
* Band 0 pairs the level-0 highpass output with its one-sample delay; deeper
  bands pair tree B (real) with tree A (imaginary, negated).
* Each stored band is rotated by a fixed per-sample phase (an exact DFT-bin
  frequency close to 0.34*pi) so the octave plus its filter transition bands
  sit wholly in the positive-frequency half at the stored rate; the rotation
  is unit-modulus, exactly invertible, and transparent to magnitudes.
* Bands are scaled by 1/2 and the lowpass by 1/sqrt(2) so that total pyramid
  energy matches signal energy (near-tight frame).
"""

from dataclasses import dataclass, field

import numpy as np

from .signal import Signal
from .validation import check_finite_1d
from .wavelets import DEFAULT_FILTERS, WaveletFilterSet

_QSHIFT_OFFSET = 7  # placement of the 14-tap q-shift filters, paired with 13-7 at synthesis
_THETA_TARGET = 0.34 * np.pi

_fft_cache = {}


def _kernel_fft(h, n, shift):
    key = (h.tobytes(), n, shift)
    spec = _fft_cache.get(key)
    if spec is None:
        buf = np.zeros(n)
        idx = (np.arange(len(h)) - shift) % n
        np.add.at(buf, idx, h)
        spec = np.fft.fft(buf)
        _fft_cache[key] = spec
    return spec


def _cconv(x, h, shift):
    out = np.fft.ifft(np.fft.fft(x) * _kernel_fft(h, len(x), shift))
    return out if np.iscomplexobj(x) else out.real


def band_rotation(n_samples):
    """Per-sample phase increment applied to a band of the given length.

    Quantized to an exact DFT bin of the band so the rotation is a clean
    circular frequency shift even for very short bands.
    """
    k = round(_THETA_TARGET * n_samples / (2.0 * np.pi))
    return 2.0 * np.pi * k / n_samples


@dataclass
class MRAPyramid:
    """Octave subbands (complex, band j decimated by 2^j) plus the real
    lowpass residual (two polyphase tree components interleaved, each tree
    at decimation 2^J)."""

    bands: list
    lowpass: np.ndarray
    original_length: int
    sample_rate: float = 0.0

    @property
    def levels(self):
        return len(self.bands)

    @property
    def padded_length(self):
        return len(self.bands[0])

    def band_lengths(self):
        return [len(b) for b in self.bands]


def band_center_frequencies(levels, sample_rate):
    """Nominal (low, high) edges in Hz per band: octave (2^-(j+1)pi, 2^-j pi]."""
    return [
        (sample_rate / 2 ** (j + 2), sample_rate / 2 ** (j + 1))
        for j in range(levels)
    ]


def _pad_length(n, levels):
    block = 1 << levels
    return -(-n // block) * block


def dtcwt_forward(x, levels, filters=DEFAULT_FILTERS, sample_rate=0.0):
    """Decompose a real signal into `levels` quasi-analytic octave bands.

    Requires len(x) >= 2^levels; the signal is zero-padded to the next
    multiple of 2^levels, so band j has ceil(T/2^J) * 2^(J-j) samples
    (equal to ceil(T/2^j) whenever 2^J divides T).
    """
    if isinstance(x, Signal):
        sample_rate = x.sample_rate
        x = x.samples
    x = check_finite_1d(x, "signal")
    if np.iscomplexobj(x):
        raise ValueError("dtcwt_forward expects a real signal")
    J = int(levels)
    if J < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    T = len(x)
    if T < (1 << J):
        raise ValueError(f"signal length {T} is shorter than 2^levels = {1 << J}")
    Tp = _pad_length(T, J)
    if Tp != T:
        x = np.concatenate([x, np.zeros(Tp - T)])

    f = filters
    hi_full = _cconv(x, f.h1, (len(f.h1) - 1) // 2)
    lo_full = _cconv(x, f.h0, (len(f.h0) - 1) // 2)
    bands = [0.5 * (hi_full - 1j * np.roll(hi_full, 1))]
    tree_a = lo_full[0::2]
    tree_b = lo_full[1::2]
    for _ in range(1, J):
        da = _cconv(tree_a, f.h1a, _QSHIFT_OFFSET)
        db = _cconv(tree_b, f.h1b, _QSHIFT_OFFSET)
        z = 0.5 * (db - 1j * da)
        theta = band_rotation(len(z))
        bands.append(z * np.exp(-1j * theta * np.arange(len(z))))
        tree_a = _cconv(tree_a, f.h0a, _QSHIFT_OFFSET)[0::2]
        tree_b = _cconv(tree_b, f.h0b, _QSHIFT_OFFSET)[0::2]
    lowpass = np.empty(2 * len(tree_a))
    lowpass[0::2] = tree_a
    lowpass[1::2] = tree_b
    lowpass /= np.sqrt(2.0)
    return MRAPyramid(bands=bands, lowpass=lowpass, original_length=T, sample_rate=sample_rate)


def dtcwt_inverse(pyramid, filters=DEFAULT_FILTERS):
    """Reconstruct the signal from a pyramid produced by :func:`dtcwt_forward`."""
    bands = pyramid.bands
    J = len(bands)
    n0 = len(bands[0])
    for j, b in enumerate(bands):
        if len(b) * (1 << j) != n0:
            raise ValueError(
                f"band {j} has length {len(b)}, expected {n0 >> j} for a "
                f"{J}-level pyramid over {n0} samples"
            )
    if len(pyramid.lowpass) != 2 * (n0 >> J):
        raise ValueError(
            f"lowpass has length {len(pyramid.lowpass)}, expected {2 * (n0 >> J)}"
        )
    f = filters
    lo = pyramid.lowpass * np.sqrt(2.0)
    tree_a = lo[0::2]
    tree_b = lo[1::2]
    rev = len(f.h0a) - 1 - _QSHIFT_OFFSET
    for j in range(J - 1, 0, -1):
        z = bands[j]
        theta = band_rotation(len(z))
        z = 2.0 * z * np.exp(1j * theta * np.arange(len(z)))
        db = z.real
        da = -z.imag
        up_a = np.zeros(2 * len(tree_a))
        up_a[0::2] = tree_a
        up_da = np.zeros(2 * len(tree_a))
        up_da[0::2] = da[0::2]
        up_b = np.zeros(2 * len(tree_b))
        up_b[0::2] = tree_b
        up_db = np.zeros(2 * len(tree_b))
        up_db[0::2] = db[0::2]
        tree_a = _cconv(up_a, f.h0a[::-1], rev) + _cconv(up_da, f.h1a[::-1], rev)
        tree_b = _cconv(up_b, f.h0b[::-1], rev) + _cconv(up_db, f.h1b[::-1], rev)
    hi_full = 2.0 * bands[0].real
    lo_full = np.empty(2 * len(tree_a))
    lo_full[0::2] = tree_a
    lo_full[1::2] = tree_b
    x = 0.5 * (
        _cconv(lo_full, f.g0, (len(f.g0) - 1) // 2)
        + _cconv(hi_full, f.g1, (len(f.g1) - 1) // 2)
    )
    x = x[: pyramid.original_length]
    if pyramid.sample_rate > 0:
        return Signal(x, pyramid.sample_rate)
    return x
