"""Trainable waveform front ends: plain convolution, Gabor-parametric, and
multiresolution (learnable convolutions inside fixed octave subbands).

Each student maps a signal to an F x N complex response at hop 2**J and
exposes a flat parameter vector for the optimizer.  The estimator API
(``get_params``/``set_params``/``transform``) follows scikit-learn
conventions; training itself lives in :mod:`wavekd.distill`.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .dtcwt import band_center_frequencies, dtcwt_forward
from .signal import Signal, strided_windows
from .teachers import Spectrogram, normalize_frames
from .validation import check_positive

MEL_SCALE = 2595.0
MEL_BREAK = 700.0


def hz_to_mel(freq_hz):
    return MEL_SCALE * np.log10(1.0 + np.asarray(freq_hz) / MEL_BREAK)


def mel_to_hz(mel):
    return MEL_BREAK * (np.power(10.0, np.asarray(mel) / MEL_SCALE) - 1.0)


@dataclass
class StudentOutput:
    """Complex filter responses plus the squared-magnitude views."""

    response: np.ndarray  # (F, N) complex128
    hop: int

    @property
    def n_frames(self):
        return self.response.shape[1]

    def power(self):
        return Spectrogram(np.abs(self.response) ** 2, self.hop)

    def normalized(self):
        return normalize_frames(self.power())


def gabor_kernel(amplitude, width, center, half_length):
    """Gaussian-envelope complex exponential over lags [-L, L).

    phi[tau] = a/(sqrt(2 pi) sigma) * exp(-tau^2 / (2 sigma^2)) * exp(2 pi i eta tau)
    """
    if amplitude <= 0 or width <= 0:
        raise ValueError("amplitude and width must be positive")
    if not 0.0 < center < 0.5:
        raise ValueError(f"center frequency must lie in (0, 1/2), got {center}")
    tau = np.arange(-half_length, half_length)
    envelope = amplitude / (np.sqrt(2.0 * np.pi) * width) * np.exp(-(tau**2) / (2.0 * width**2))
    return envelope * np.exp(2j * np.pi * center * tau)


def mel_init(n_filters, sample_rate, f_min, f_max):
    """Mel-spaced (center, width) initialization for the Gabor student.

    Centers are equally spaced on the mel scale including both endpoints;
    widths are set so the Gaussian's -3 dB bandwidth matches the local mel
    triangle width (spacing between the two neighboring centers).
    """
    if n_filters < 2:
        raise ValueError("need at least 2 filters for a mel grid")
    if not 0.0 < f_min < f_max <= sample_rate / 2.0:
        raise ValueError("need 0 < f_min < f_max <= Nyquist")
    mels = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters)
    freqs = mel_to_hz(mels)
    step = mels[1] - mels[0]
    lower = mel_to_hz(mels - step)
    upper = mel_to_hz(mels + step)
    widths_hz = upper - lower
    centers = freqs / sample_rate
    widths = np.sqrt(np.log(2.0)) * sample_rate / (np.pi * widths_hz)
    return centers, widths


def assign_octaves(center_freqs, sample_rate, levels):
    """Map each center frequency to the octave band containing it.

    Assignment treats band j as [sr/2^(j+2), sr/2^(j+1)) (closed at the
    bottom, so a geometric grid anchored on a band edge fills each octave
    evenly); a center exactly at Nyquist counts as band 0, and centers
    below the lowest band clamp to the deepest band.  Returns (band index
    per filter, filter count per band).
    """
    centers = np.asarray(center_freqs, dtype=float)
    if np.any(np.diff(centers) <= 0):
        raise ValueError("center frequencies must be strictly increasing")
    edges = band_center_frequencies(levels, sample_rate)
    assignment = np.empty(len(centers), dtype=np.int64)
    for i, f in enumerate(centers):
        if f > sample_rate / 2.0:
            raise ValueError(f"center {f:g} Hz exceeds the Nyquist frequency")
        for j, (lo, hi) in enumerate(edges):
            if lo <= f < hi or (j == 0 and f == hi):
                assignment[i] = j
                break
        else:
            assignment[i] = levels - 1
    counts = np.bincount(assignment, minlength=levels)
    return assignment, counts


class ConvStudent(BaseEstimator):
    """F real FIR kernels of length 2L applied at stride 2**J."""

    def __init__(self, n_filters=64, half_length=512, hop_exponent=9, random_state=0):
        self.n_filters = n_filters
        self.half_length = half_length
        self.hop_exponent = hop_exponent
        self.random_state = random_state
        rng = np.random.default_rng(random_state)
        scale = np.sqrt(1.0 / np.sqrt(n_filters))  # i.i.d. Gaussian, variance 1/sqrt(F)
        self.kernels_ = rng.normal(0.0, scale, size=(n_filters, 2 * half_length))

    kind = "conv"

    @property
    def hop(self):
        return 1 << self.hop_exponent

    @property
    def n_parameters(self):
        return self.kernels_.size

    @property
    def weights(self):
        return self.kernels_.ravel().copy()

    @weights.setter
    def weights(self, flat):
        self.kernels_ = np.asarray(flat, dtype=float).reshape(self.kernels_.shape).copy()

    def _forward(self, x):
        windows = strided_windows(x, self.half_length, self.hop)
        response = windows @ self.kernels_[:, ::-1].T
        return response.T.astype(np.complex128), {"windows": windows}

    def transform(self, x):
        response, _ = self._forward(x)
        return StudentOutput(response, self.hop)


class GaborStudent(BaseEstimator):
    """Gabor-parametrized kernels: 3 parameters (a, sigma, eta) per filter."""

    def __init__(
        self,
        n_filters=64,
        half_length=512,
        hop_exponent=9,
        sample_rate=16000.0,
        f_min=60.0,
        f_max=None,
        random_state=0,
    ):
        self.n_filters = n_filters
        self.half_length = half_length
        self.hop_exponent = hop_exponent
        self.sample_rate = sample_rate
        self.f_min = f_min
        self.f_max = f_max
        self.random_state = random_state
        top = f_max if f_max is not None else 0.4875 * sample_rate
        centers, widths = mel_init(n_filters, sample_rate, f_min, top)
        self.amplitudes_ = np.ones(n_filters)
        self.widths_ = widths
        self.centers_ = centers
        self._kernel_cache = None
        self.clamp_parameters()

    kind = "gabor"

    @property
    def hop(self):
        return 1 << self.hop_exponent

    @property
    def n_parameters(self):
        return 3 * self.n_filters

    @property
    def weights(self):
        return np.concatenate([self.amplitudes_, self.widths_, self.centers_])

    @weights.setter
    def weights(self, flat):
        flat = np.asarray(flat, dtype=float)
        f = self.n_filters
        self.amplitudes_ = flat[:f].copy()
        self.widths_ = flat[f : 2 * f].copy()
        self.centers_ = flat[2 * f :].copy()

    def clamp_parameters(self):
        """Keep every kernel non-degenerate after an optimizer step."""
        L = self.half_length
        np.clip(self.amplitudes_, 1e-6, None, out=self.amplitudes_)
        np.clip(self.widths_, 1.0, 4.0 * L, out=self.widths_)
        np.clip(self.centers_, 1.0 / (4.0 * L), 0.5 - 1.0 / (4.0 * L), out=self.centers_)

    def materialize_kernels(self):
        # kernels depend only on the 3F parameters; reuse between optimizer
        # steps (the cache is keyed on parameter content, so direct attribute
        # edits are picked up too)
        params = self.weights
        if self._kernel_cache is not None and np.array_equal(self._kernel_cache[0], params):
            return self._kernel_cache[1]
        tau = np.arange(-self.half_length, self.half_length)
        sig = self.widths_[:, None]
        env = (
            self.amplitudes_[:, None]
            / (np.sqrt(2.0 * np.pi) * sig)
            * np.exp(-(tau[None, :] ** 2) / (2.0 * sig**2))
        )
        kernels = env * np.exp(2j * np.pi * self.centers_[:, None] * tau[None, :])
        self._kernel_cache = (params, kernels)
        return kernels

    def _forward(self, x):
        kernels = self.materialize_kernels()
        windows = strided_windows(x, self.half_length, self.hop)
        rev = kernels[:, ::-1]
        # two real matmuls beat one complex-promoted one
        response = (windows @ rev.real.T + 1j * (windows @ rev.imag.T)).T
        return response, {"windows": windows, "kernels": kernels}

    def transform(self, x):
        response, _ = self._forward(x)
        return StudentOutput(response, self.hop)


class MultiresStudent(BaseEstimator):
    """Learnable real kernels applied per octave subband of the fixed
    multiresolution front stage, with per-level kernel size 8 * M_j taps
    (half-length) and stride 2**(J - j), for a uniform overall hop of 2**J."""

    def __init__(
        self,
        center_freqs=None,
        sample_rate=16000.0,
        hop_exponent=9,
        taps_per_band_filter=8,
        level_scaled_init=True,
        random_state=0,
    ):
        if center_freqs is None:
            raise ValueError("center_freqs (the teacher's centers) are required")
        self.center_freqs = np.asarray(center_freqs, dtype=float)
        self.sample_rate = sample_rate
        self.hop_exponent = hop_exponent
        self.taps_per_band_filter = taps_per_band_filter
        self.level_scaled_init = level_scaled_init
        self.random_state = random_state

        J = hop_exponent
        self.band_of_filter_, self.filters_per_band_ = assign_octaves(
            self.center_freqs, sample_rate, J
        )
        self.half_lengths_ = taps_per_band_filter * self.filters_per_band_
        rng = np.random.default_rng(random_state)
        base = np.sqrt(1.0 / np.sqrt(len(self.center_freqs)))
        self.kernels_ = []
        for j in range(J):
            m = int(self.filters_per_band_[j])
            if m == 0:
                self.kernels_.append(np.zeros((0, 0)))
                continue
            two_l = 2 * int(self.half_lengths_[j])
            scale = base / np.sqrt(two_l) if level_scaled_init else base
            self.kernels_.append(rng.normal(0.0, scale, size=(m, two_l)))
        self._row_index = [np.flatnonzero(self.band_of_filter_ == j) for j in range(J)]

    kind = "multires"

    @property
    def n_filters(self):
        return len(self.center_freqs)

    @property
    def hop(self):
        return 1 << self.hop_exponent

    @property
    def n_parameters(self):
        return int(sum(k.size for k in self.kernels_))

    @property
    def weights(self):
        parts = [k.ravel() for k in self.kernels_ if k.size]
        return np.concatenate(parts) if parts else np.zeros(0)

    @weights.setter
    def weights(self, flat):
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for j, k in enumerate(self.kernels_):
            if k.size:
                self.kernels_[j] = flat[pos : pos + k.size].reshape(k.shape).copy()
                pos += k.size
        if pos != flat.size:
            raise ValueError(f"weight vector has {flat.size} entries, expected {pos}")

    def receptive_field(self, f):
        """Effective receptive field of filter f in input samples."""
        j = int(self.band_of_filter_[f])
        return (1 << (j + 1)) * int(self.half_lengths_[j])

    def pyramid(self, x):
        return dtcwt_forward(x, self.hop_exponent)

    def _forward(self, x, pyramid=None):
        if pyramid is None:
            pyramid = self.pyramid(x)
        J = self.hop_exponent
        n = pyramid.padded_length >> J
        response = np.zeros((self.n_filters, n), dtype=np.complex128)
        ctx = {"windows": [None] * J, "pyramid": pyramid}
        for j in range(J):
            rows = self._row_index[j]
            if rows.size == 0:
                continue
            windows = strided_windows(pyramid.bands[j], int(self.half_lengths_[j]), 1 << (J - j))
            ctx["windows"][j] = windows
            rev_t = self.kernels_[j][:, ::-1].T
            response[rows] = (windows.real @ rev_t + 1j * (windows.imag @ rev_t)).T
        return response, ctx

    def transform(self, x, pyramid=None):
        response, _ = self._forward(x, pyramid=pyramid)
        return StudentOutput(response, self.hop)
