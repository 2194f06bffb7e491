"""Teacher filterbank construction and spectrogram tests."""

import numpy as np
import pytest

from wavekd.signal import Signal, strided_conv
from wavekd.teachers import (
    Filterbank,
    Spectrogram,
    TeacherSpec,
    build_teacher,
    erb_rate,
    normalize_frames,
    teacher_spectrogram,
)

SR = 16000.0


@pytest.fixture(scope="module")
def cqt():
    return build_teacher(TeacherSpec("synth-cqt", SR))


class TestSynthCQT:
    def test_filter_count(self, cqt):
        assert cqt.n_filters == 64

    def test_geometric_center_spacing(self, cqt):
        ratios = cqt.center_freqs[1:] / cqt.center_freqs[:-1]
        np.testing.assert_allclose(ratios, 2.0 ** 0.125, rtol=1e-12)

    def test_filters_are_unit_norm(self, cqt):
        np.testing.assert_allclose(
            np.linalg.norm(cqt.filters, axis=1), 1.0, atol=1e-12
        )

    def test_peak_response_at_center(self, cqt):
        k = 40
        spec = np.abs(np.fft.fft(cqt.filters[k], 1 << 14))
        freqs = np.fft.fftfreq(1 << 14, d=1.0 / SR)
        peak = freqs[np.argmax(spec)]
        fc = cqt.center_freqs[k]
        assert abs(peak - fc) <= fc * 0.02


class TestGammatone:
    def test_erb_spacing(self):
        fb = build_teacher(TeacherSpec("gammatone", SR, n_filters=42))
        rates = erb_rate(fb.center_freqs)
        steps = np.diff(rates)
        assert np.max(np.abs(steps - steps[0])) <= 1e-9

    def test_peak_within_one_erb_and_skewed_envelope(self):
        fb = build_teacher(TeacherSpec("gammatone", SR, n_filters=16))
        k = 8
        fc = fb.center_freqs[k]
        spec = np.abs(np.fft.fft(fb.filters[k], 1 << 15))
        freqs = np.fft.fftfreq(1 << 15, d=1.0 / SR)
        peak = abs(freqs[np.argmax(spec)])
        assert abs(peak - fc) <= 24.7 * (4.37 * fc / 1000 + 1)
        power = np.abs(fb.filters[k]) ** 2
        t = np.arange(len(power))
        mean = np.sum(t * power) / power.sum()
        var = np.sum((t - mean) ** 2 * power) / power.sum()
        skew = np.sum((t - mean) ** 3 * power) / power.sum() / var**1.5
        assert skew > 0.0


class TestVQT:
    def test_twelve_bins_per_octave(self):
        fb = build_teacher(TeacherSpec("vqt", SR))
        ratios = fb.center_freqs[1:] / fb.center_freqs[:-1]
        np.testing.assert_allclose(ratios, 2.0 ** (1.0 / 12.0), rtol=1e-12)

    def test_low_bands_have_lower_q(self):
        fb = build_teacher(TeacherSpec("vqt", SR))

        def support(h):
            mag = np.abs(h)
            return np.count_nonzero(mag > mag.max() * 1e-6)

        q_low = support(fb.filters[0]) * fb.center_freqs[0]
        q_high = support(fb.filters[-1]) * fb.center_freqs[-1]
        # support ~ Q / f, so support * f ~ Q; the low band must have smaller Q
        assert q_low < q_high


class TestANSIThirdOctave:
    def test_first_six_centers_exact(self):
        fb = build_teacher(TeacherSpec("ansi-third-octave", SR))
        np.testing.assert_array_equal(
            fb.center_freqs[:6], [40.0, 50.0, 60.0, 80.0, 100.0, 120.0]
        )

    def test_integer_grid_pattern(self):
        fb = build_teacher(TeacherSpec("ansi-third-octave", SR))
        assert np.all(fb.center_freqs == np.round(fb.center_freqs))
        assert np.all(fb.center_freqs <= 0.45 * SR)


class TestNyquistRejection:
    def test_center_above_nyquist_is_reported(self):
        spec = TeacherSpec("synth-cqt", SR, f_min=300.0, n_octaves=8)
        with pytest.raises(ValueError, match="Nyquist"):
            build_teacher(spec)


class TestTeacherSpectrogram:
    def test_zero_signal(self, cqt):
        y = teacher_spectrogram(cqt, np.zeros(4096), 9)
        assert not np.any(y.values)
        assert y.n_frames == 8

    def test_tone_maxes_matching_filter(self, cqt):
        k = 30
        fc = cqt.center_freqs[k]
        t = np.arange(4096)
        x = np.sin(2 * np.pi * fc * t / SR)
        y = teacher_spectrogram(cqt, x, 9)
        assert np.argmax(y.values.mean(axis=1)) == k

    def test_amplitude_squaring(self, cqt):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(4096)
        y1 = teacher_spectrogram(cqt, x, 9)
        y2 = teacher_spectrogram(cqt, 2.0 * x, 9)
        np.testing.assert_allclose(y2.values, 4.0 * y1.values, rtol=1e-10)

    def test_matches_strided_conv_path(self, cqt):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(4096)
        y = teacher_spectrogram(cqt, x, 9)
        for k in (0, 17, 63):
            rows = np.abs(strided_conv(x, cqt.filters[k], 512)) ** 2
            np.testing.assert_allclose(
                y.values[k], rows, rtol=1e-10, atol=1e-10 * rows.max()
            )

    def test_short_signal_warns(self, cqt):
        with pytest.warns(UserWarning):
            teacher_spectrogram(cqt, np.ones(512), 5)


class TestNormalizeFrames:
    def test_three_four_five(self):
        s = Spectrogram(np.array([[3.0], [4.0], [0.0]]), 1)
        out = normalize_frames(s)
        np.testing.assert_allclose(out.values[:, 0], [0.6, 0.8, 0.0])
        assert not out.zero_frames[0]

    def test_zero_column_flagged(self):
        s = Spectrogram(np.array([[1.0, 0.0], [1.0, 0.0]]), 1)
        out = normalize_frames(s)
        assert out.zero_frames[1]
        assert not np.any(out.values[:, 1])

    def test_unit_norm_columns(self):
        rng = np.random.default_rng(2)
        s = Spectrogram(rng.random((12, 7)), 4)
        out = normalize_frames(s)
        np.testing.assert_allclose(np.linalg.norm(out.values, axis=0), 1.0, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        s = Spectrogram(rng.random((6, 5)), 2)
        once = normalize_frames(s)
        twice = normalize_frames(once)
        np.testing.assert_allclose(once.values, twice.values, atol=1e-14)


class TestFilterbankValidation:
    def test_rejects_nonincreasing_centers(self):
        with pytest.raises(ValueError):
            Filterbank(np.ones((2, 8), dtype=complex), [200.0, 100.0], SR)

    def test_rejects_zero_energy_filter(self):
        filters = np.ones((2, 8), dtype=complex)
        filters[1] = 0.0
        with pytest.raises(ValueError):
            Filterbank(filters, [100.0, 200.0], SR)
