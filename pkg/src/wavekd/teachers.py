"""Engineered auditory filterbanks used as distillation teachers.

All teachers are banks of complex FIR filters of a common length, unit L2
norm, placed so that the envelope of each impulse response is centered in
the buffer (the distillation loss sees magnitudes only, so only alignment
with the centered student kernels matters, not absolute phase).
"""

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .signal import Signal, fft_convolve
from .validation import check_positive

HANN_3DB_FACTOR = 1.44  # full -3 dB width of a Hann window of duration D is ~1.44/D Hz


def erb_bandwidth(freq_hz):
    """Equivalent rectangular bandwidth at a given center frequency
    (Glasberg-Moore): 24.7 * (4.37 * f / 1000 + 1)."""
    return 24.7 * (4.37 * np.asarray(freq_hz) / 1000.0 + 1.0)


def erb_rate(freq_hz):
    """Frequency in Hz -> ERB-rate scale (number of ERBs below f)."""
    return 21.4 * np.log10(4.37 * np.asarray(freq_hz) / 1000.0 + 1.0)


def erb_rate_inverse(rate):
    return (np.power(10.0, np.asarray(rate) / 21.4) - 1.0) * 1000.0 / 4.37


@dataclass(frozen=True)
class TeacherSpec:
    """Parameters of one teacher filterbank.

    kind: 'synth-cqt', 'gammatone', 'vqt' or 'ansi-third-octave'.
    Fields irrelevant to a kind are ignored; None selects the kind default.
    """

    kind: str
    sample_rate: float
    fir_length: int = 4096
    bins_per_octave: int | None = None
    n_octaves: int = 8
    n_filters: int | None = None
    f_min: float | None = None
    f_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("synth-cqt", "gammatone", "vqt", "ansi-third-octave"):
            raise ValueError(f"unknown teacher kind {self.kind!r}")
        check_positive(self.sample_rate, "sample_rate")
        if self.fir_length < 2 or self.fir_length & (self.fir_length - 1):
            raise ValueError(f"fir_length must be a power of two, got {self.fir_length}")

    def cache_key(self):
        blob = repr(
            (self.kind, self.sample_rate, self.fir_length, self.bins_per_octave,
             self.n_octaves, self.n_filters, self.f_min, self.f_max)
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Filterbank:
    """An ordered bank of complex FIR filters with increasing center frequencies."""

    filters: np.ndarray  # (F, fir_length) complex128
    center_freqs: np.ndarray  # (F,) Hz, strictly increasing
    sample_rate: float
    kind: str = "custom"
    _fft_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.complex128)
        self.center_freqs = np.asarray(self.center_freqs, dtype=np.float64)
        if self.filters.ndim != 2 or self.filters.shape[0] != len(self.center_freqs):
            raise ValueError("filters must be (F, fir_length) matching center_freqs")
        if not np.all(np.isfinite(self.filters.view(np.float64))):
            raise ValueError("filter coefficients must be finite")
        energies = np.sum(np.abs(self.filters) ** 2, axis=1)
        if np.any(energies == 0):
            raise ValueError("every filter must have nonzero energy")
        if np.any(np.diff(self.center_freqs) <= 0):
            raise ValueError("center frequencies must be strictly increasing")

    @property
    def n_filters(self):
        return self.filters.shape[0]

    @property
    def fir_length(self):
        return self.filters.shape[1]

    def spectra(self, nfft):
        spec = self._fft_cache.get(nfft)
        if spec is None:
            spec = np.fft.fft(self.filters, nfft, axis=1)
            self._fft_cache[nfft] = spec
        return spec

    def content_hash(self):
        h = hashlib.sha256(self.filters.tobytes())
        h.update(np.float64(self.sample_rate).tobytes())
        return h.hexdigest()[:16]


@dataclass
class Spectrogram:
    """F x N matrix of squared filter-response magnitudes at a fixed hop."""

    values: np.ndarray
    hop: int
    zero_frames: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("spectrogram values must be 2-D (filters x frames)")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("spectrogram entries must be finite and nonnegative")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")

    @property
    def n_frames(self):
        return self.values.shape[1]


def _centered_windowed_tone(freq_hz, window_length, fir_length, sample_rate):
    """Hann-windowed complex exponential, centered in the buffer, unit L2."""
    ell = int(min(max(window_length, 4), fir_length))
    n = np.arange(ell)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * (n + 0.5) / ell)
    tau = n - (ell - 1) / 2.0
    kernel = window * np.exp(2j * np.pi * freq_hz * tau / sample_rate)
    buf = np.zeros(fir_length, dtype=np.complex128)
    start = (fir_length - ell) // 2
    buf[start : start + ell] = kernel
    return buf / np.linalg.norm(buf)


def _check_below_nyquist(centers, spec):
    nyquist = spec.sample_rate / 2.0
    bad = [f for f in np.atleast_1d(centers) if f >= nyquist]
    if bad:
        raise ValueError(
            f"teacher {spec.kind!r}: center frequencies above Nyquist "
            f"({nyquist:g} Hz): {', '.join(f'{b:g}' for b in bad)}"
        )


def _build_synth_cqt(spec):
    q = spec.bins_per_octave or 8
    f_min = spec.f_min if spec.f_min is not None else spec.sample_rate / 2.0**10
    n = spec.n_filters or q * spec.n_octaves
    centers = f_min * np.power(2.0, np.arange(n) / q)
    _check_below_nyquist(centers, spec)
    quality = 1.0 / (2.0 ** (1.0 / q) - 1.0)
    filters = [
        _centered_windowed_tone(f, round(quality * spec.sample_rate / f), spec.fir_length, spec.sample_rate)
        for f in centers
    ]
    return Filterbank(np.array(filters), centers, spec.sample_rate, spec.kind)


def _build_gammatone(spec):
    n = spec.n_filters or 42
    f_min = spec.f_min if spec.f_min is not None else 50.0
    f_max = spec.f_max if spec.f_max is not None else 0.45 * spec.sample_rate
    centers = erb_rate_inverse(np.linspace(erb_rate(f_min), erb_rate(f_max), n))
    _check_below_nyquist(centers, spec)
    sr = spec.sample_rate
    filters = np.zeros((n, spec.fir_length), dtype=np.complex128)
    for i, fc in enumerate(centers):
        b = 1.019 * erb_bandwidth(fc)
        t = np.arange(spec.fir_length) / sr
        envelope = t**3 * np.exp(-2.0 * np.pi * b * t)
        ir = envelope * np.exp(2j * np.pi * fc * t)
        peak = int(round(3.0 * sr / (2.0 * np.pi * b)))
        shift = spec.fir_length // 2 - peak
        buf = np.zeros(spec.fir_length, dtype=np.complex128)
        if shift >= 0:
            buf[shift:] = ir[: spec.fir_length - shift]
        else:
            buf[:shift] = ir[-shift:]
        filters[i] = buf / np.linalg.norm(buf)
    return Filterbank(filters, centers, sr, spec.kind)


def _build_vqt(spec):
    q = spec.bins_per_octave or 12
    f_min = spec.f_min if spec.f_min is not None else spec.sample_rate / 2.0**10
    n = spec.n_filters or q * spec.n_octaves
    centers = f_min * np.power(2.0, np.arange(n) / q)
    _check_below_nyquist(centers, spec)
    q_max = 1.0 / (2.0 ** (1.0 / q) - 1.0)
    # Q shrinks toward low frequencies: Q_f = q_max * f / (f + gamma), with
    # gamma fixed so the lowest band is at least two ERBs wide.
    gamma = max(0.0, 2.0 * float(erb_bandwidth(f_min)) * q_max - f_min)
    filters = []
    for f in centers:
        q_f = q_max * f / (f + gamma)
        filters.append(
            _centered_windowed_tone(f, round(q_f * spec.sample_rate / f), spec.fir_length, spec.sample_rate)
        )
    return Filterbank(np.array(filters), centers, spec.sample_rate, spec.kind)


def _build_ansi_third_octave(spec):
    f_max = spec.f_max if spec.f_max is not None else 0.45 * spec.sample_rate
    base = np.array([40.0, 50.0, 60.0])
    centers = []
    k = 0
    while True:
        block = base * 2.0**k
        block = block[block <= f_max]
        if block.size == 0:
            break
        centers.extend(block)
        k += 1
    if spec.n_filters is not None:
        centers = centers[: spec.n_filters]
    centers = np.array(centers)
    if centers.size == 0:
        raise ValueError("ANSI third-octave teacher has no bands below f_max")
    _check_below_nyquist(centers, spec)
    width = 2.0 ** (1.0 / 6.0) - 2.0 ** (-1.0 / 6.0)  # third-octave relative width
    filters = [
        _centered_windowed_tone(
            f, round(HANN_3DB_FACTOR * spec.sample_rate / (width * f)), spec.fir_length, spec.sample_rate
        )
        for f in centers
    ]
    return Filterbank(np.array(filters), centers, spec.sample_rate, spec.kind)


_BUILDERS = {
    "synth-cqt": _build_synth_cqt,
    "gammatone": _build_gammatone,
    "vqt": _build_vqt,
    "ansi-third-octave": _build_ansi_third_octave,
}


def build_teacher(spec):
    """Construct the filterbank described by a :class:`TeacherSpec`."""
    return _BUILDERS[spec.kind](spec)


def teacher_spectrogram(filterbank, x, hop_exponent):
    """Squared magnitudes of the filter responses at hop 2**hop_exponent.

    Y[f, t] = |(x * lambda_f)[2^J t]|^2 with the signal zero-padded by half
    the filter length at both ends (same grid as ``strided_conv``).
    """
    if isinstance(x, Signal):
        x = x.samples
    x = np.asarray(x, dtype=np.float64)
    half = filterbank.fir_length // 2
    if len(x) < filterbank.fir_length:
        warnings.warn(
            f"signal ({len(x)} samples) is shorter than the teacher FIRs "
            f"({filterbank.fir_length}); responses are dominated by edges",
            stacklevel=2,
        )
    hop = 1 << hop_exponent
    n_out = -(-len(x) // hop)
    n_lin = len(x) + filterbank.fir_length - 1
    nfft = 1 << (n_lin - 1).bit_length()
    xf = np.fft.fft(x, nfft)
    resp = np.fft.ifft(xf[None, :] * filterbank.spectra(nfft), axis=1)
    idx = half + hop * np.arange(n_out)
    return Spectrogram(np.abs(resp[:, idx]) ** 2, hop)


def normalize_frames(spectrogram, eps_rel=1e-12):
    """Scale each time frame to unit L2 norm; near-silent frames are zeroed
    and flagged instead of amplified."""
    v = spectrogram.values
    norms = np.linalg.norm(v, axis=0)
    eps = eps_rel * max(float(v.max()), np.finfo(np.float64).tiny)
    zero = norms <= eps
    safe = np.where(zero, 1.0, norms)
    out = v / safe
    out[:, zero] = 0.0
    return Spectrogram(out, spectrogram.hop, zero_frames=zero)
