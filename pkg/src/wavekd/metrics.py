"""Post-hoc analysis: time-frequency localization and model evaluation.

Frequency spreads are always computed over the one-sided spectrum
(omega in [0, pi] of a zero-padded DFT).  For real filters this is the
analytic magnitude spectrum, so Hermitian symmetry is not mistaken for
bandwidth; complex quasi-analytic filters already live on that side.  The
uncertainty product sigma_t * sigma_omega is dimensionless and invariant
under resampling, so multiresolution rows can be measured on their own
band grid.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .distill import cosine_loss, sample_excerpt
from .dtcwt import band_rotation, dtcwt_forward
from .students import ConvStudent, GaborStudent, MultiresStudent
from .teachers import Filterbank, teacher_spectrogram

UNCERTAINTY_BOUND = 0.5  # sigma_t [samples] * sigma_omega [rad/sample], Gaussian-attained


def heisenberg_ratio(h, min_fft_factor=8):
    """Time and one-sided frequency spreads of an FIR, and their product.

    sigma_t is the standard deviation of the |h|^2 mass in samples;
    sigma_omega the standard deviation of the one-sided |H|^2 mass in
    rad/sample, on a DFT zero-padded to at least ``min_fft_factor`` times
    the filter length.  Returns (sigma_t, sigma_omega, ratio).

    The product is bounded below by 1/2 (Gaussians attain it).  Caveat:
    filters whose band mass crosses 0 Hz have part of that mass clipped by
    the one-sided convention, so their measured ratio can fall slightly
    below the bound.
    """
    h = np.asarray(h)
    power = np.abs(h) ** 2
    total = power.sum()
    if not np.all(np.isfinite(power)) or total == 0.0:
        raise ValueError("filter must be finite with nonzero energy")
    taps = np.arange(len(h))
    t_mean = np.sum(taps * power) / total
    sigma_t = np.sqrt(np.sum((taps - t_mean) ** 2 * power) / total)

    nfft = 1 << (min_fft_factor * len(h) - 1).bit_length()
    spectrum = np.abs(np.fft.fft(h, nfft)) ** 2
    half = spectrum[: nfft // 2 + 1]
    omega = np.pi * np.arange(nfft // 2 + 1) / (nfft // 2)
    w_total = half.sum()
    w_mean = np.sum(omega * half) / w_total
    sigma_w = np.sqrt(np.sum((omega - w_mean) ** 2 * half) / w_total)
    return float(sigma_t), float(sigma_w), float(sigma_t * sigma_w)


@dataclass(frozen=True)
class LocalizationRow:
    filter_index: int
    center_hz: float
    sigma_t: float
    sigma_w: float
    ratio: float


@dataclass
class LocalizationReport:
    rows: list

    def ratios(self):
        return np.array([r.ratio for r in self.rows])

    def quantiles(self):
        r = self.ratios()
        return {
            "min": float(r.min()),
            "median": float(np.median(r)),
            "max": float(r.max()),
            "count": len(self.rows),
        }

    def median_ratio(self):
        return float(np.median(self.ratios()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["filter_index", "center_hz", "sigma_t", "sigma_w", "ratio"])
            for r in self.rows:
                writer.writerow([r.filter_index, repr(r.center_hz), repr(r.sigma_t),
                                 repr(r.sigma_w), repr(r.ratio)])

    def to_quantile_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.quantiles(), fh, indent=2)


def _spectral_center(h, rate_scale, sample_rate):
    nfft = 1 << (8 * len(h) - 1).bit_length()
    spectrum = np.abs(np.fft.fft(h, nfft)) ** 2
    half = spectrum[: nfft // 2 + 1]
    omega = np.pi * np.arange(nfft // 2 + 1) / (nfft // 2)
    center = np.sum(omega * half) / half.sum()
    center /= rate_scale
    if sample_rate:
        return float(center * sample_rate / (2.0 * np.pi))
    return float(center / (2.0 * np.pi))


def impulse_responses(model_or_bank, transient_samples=32):
    """Materialized complex impulse responses, one per filter.

    Returns a list of (ir, decimation) pairs: conv and Gabor kernels (and
    teacher FIRs) live at the input rate (decimation 1); multiresolution
    rows are materialized by driving the octave decomposition with a
    centered unit impulse and convolving the addressed band with the
    learned kernel at stride 1, so they live at the band's rate 2^j.  The
    stored band rotation is undone so spectral centers are physical.
    """
    if isinstance(model_or_bank, Filterbank):
        return [(f.copy(), 1) for f in model_or_bank.filters]
    if isinstance(model_or_bank, ConvStudent):
        return [(k.astype(np.complex128), 1) for k in model_or_bank.kernels_]
    if isinstance(model_or_bank, GaborStudent):
        return [(k.copy(), 1) for k in model_or_bank.materialize_kernels()]
    if isinstance(model_or_bank, MultiresStudent):
        return _multires_impulse_responses(model_or_bank, transient_samples)
    raise TypeError(f"cannot materialize {type(model_or_bank).__name__}")


def _multires_impulse_responses(model, transient_samples):
    J = model.hop_exponent
    rf = max(model.receptive_field(f) for f in range(model.n_filters))
    length = 1 << int(np.ceil(np.log2(max(4 * rf, 4 << J))))
    x = np.zeros(length)
    x[length // 2] = 1.0
    pyramid = dtcwt_forward(x, J)
    rows = []
    for f in range(model.n_filters):
        j = int(model.band_of_filter_[f])
        band = pyramid.bands[j]
        local = list(np.flatnonzero(model.band_of_filter_ == j)).index(f)
        kernel = model.kernels_[j][local]
        full = np.convolve(band, kernel[::-1], mode="same")
        theta = band_rotation(len(band))
        full = full * np.exp(1j * theta * np.arange(len(full)))
        half_span = int(model.half_lengths_[j]) + transient_samples
        center = length // 2 >> j
        lo = max(0, center - half_span)
        hi = min(len(full), center + half_span)
        rows.append((full[lo:hi], 1 << j))
    return rows


def localization_report(model_or_bank, sample_rate=None):
    """Heisenberg localization of every filter of a model or filterbank."""
    if sample_rate is None:
        sample_rate = getattr(model_or_bank, "sample_rate", 0.0) or 0.0
    rows = []
    for f, (ir, decim) in enumerate(impulse_responses(model_or_bank)):
        sigma_t, sigma_w, ratio = heisenberg_ratio(ir)
        rows.append(
            LocalizationRow(
                filter_index=f,
                center_hz=_spectral_center(ir, decim, sample_rate),
                sigma_t=sigma_t * decim,
                sigma_w=sigma_w / decim,
                ratio=ratio,
            )
        )
    return LocalizationReport(rows)


def evaluate(model, filterbank, test_items, excerpt_length=4096, cache=None):
    """Mean and standard deviation of the distillation loss over test items."""
    if not test_items:
        raise ValueError("test set is empty")
    losses = []
    for item in test_items:
        excerpt = sample_excerpt(item.signal, excerpt_length)
        teacher = (
            cache.get(filterbank, item, excerpt, model.hop_exponent)
            if cache is not None
            else teacher_spectrogram(filterbank, excerpt, model.hop_exponent)
        )
        losses.append(cosine_loss(model.transform(excerpt.samples), teacher).total)
    losses = np.array(losses)
    return float(losses.mean()), float(losses.std()), losses
