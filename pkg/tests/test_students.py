"""Tests for the three trainable front ends."""

import numpy as np
import pytest

from wavekd.dtcwt import dtcwt_forward
from wavekd.students import (
    ConvStudent,
    GaborStudent,
    MultiresStudent,
    assign_octaves,
    gabor_kernel,
    hz_to_mel,
    mel_init,
)
from wavekd.teachers import TeacherSpec, build_teacher, teacher_spectrogram

SR = 16000.0


def brute_force_strided(x, h, stride):
    L = len(h) // 2
    T = len(x)
    out = np.zeros(-(-T // stride), dtype=np.result_type(x, h))
    for t in range(len(out)):
        acc = 0.0
        for c, tap in enumerate(h):
            k = stride * t - (c - L)
            if 0 <= k < T:
                acc += x[k] * tap
        out[t] = acc
    return out


def negfrac(z):
    spec = np.fft.fft(z)
    n = len(spec)
    return np.sum(np.abs(spec[n // 2 + 1 :]) ** 2) / np.sum(np.abs(spec) ** 2)


class TestConvStudent:
    def test_impulse_kernel_subsamples_input(self):
        m = ConvStudent(n_filters=3, half_length=4, hop_exponent=3, random_state=0)
        m.kernels_[:] = 0.0
        m.kernels_[1, 4] = 1.0  # tau = 0 tap of filter 1
        rng = np.random.default_rng(0)
        x = rng.standard_normal(64)
        out = m.transform(x)
        np.testing.assert_allclose(out.response[1].real, x[::8], atol=1e-14)
        assert not np.any(out.response[0])

    def test_matches_brute_force(self):
        m = ConvStudent(n_filters=4, half_length=4, hop_exponent=2, random_state=1)
        rng = np.random.default_rng(2)
        x = rng.standard_normal(37)
        out = m.transform(x)
        for f in range(4):
            want = brute_force_strided(x, m.kernels_[f], 4)
            np.testing.assert_allclose(out.response[f].real, want, rtol=1e-12, atol=1e-14)

    def test_zero_input(self):
        m = ConvStudent(n_filters=2, half_length=8, hop_exponent=4)
        out = m.transform(np.zeros(128))
        assert not np.any(out.response)

    def test_parameter_count_and_roundtrip(self):
        m = ConvStudent(n_filters=6, half_length=16, hop_exponent=5)
        assert m.n_parameters == 2 * 16 * 6
        w = m.weights
        w[3] += 1.0
        m.weights = w
        assert m.kernels_.ravel()[3] == pytest.approx(w[3])

    def test_initialization_statistics(self):
        m = ConvStudent(n_filters=64, half_length=256, hop_exponent=9, random_state=7)
        var = m.kernels_.var()
        assert var == pytest.approx(1.0 / np.sqrt(64), rel=0.05)

    def test_linearity(self):
        m = ConvStudent(n_filters=3, half_length=8, hop_exponent=3, random_state=3)
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal(80), rng.standard_normal(80)
        lhs = m.transform(2.0 * x - 0.5 * y).response
        rhs = 2.0 * m.transform(x).response - 0.5 * m.transform(y).response
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.max(np.abs(rhs)))


class TestGaborKernel:
    def test_center_tap_value(self):
        a, sigma, L = 2.0, 12.0, 64
        phi = gabor_kernel(a, sigma, 0.25, L)
        assert phi[L] == pytest.approx(a / (np.sqrt(2 * np.pi) * sigma))

    def test_envelope_symmetry(self):
        phi = gabor_kernel(1.0, 9.0, 0.1, 32)
        mags = np.abs(phi)
        for tau in range(1, 31):
            assert mags[32 + tau] == pytest.approx(mags[32 - tau], rel=1e-12)

    def test_spectral_peak_at_center_frequency(self):
        L, eta = 1024, 0.137
        phi = gabor_kernel(1.0, 24.0, eta, L)
        spec = np.abs(np.fft.fft(phi))
        peak_bin = np.argmax(spec)
        assert abs(peak_bin - eta * 2 * L) <= 1.0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            gabor_kernel(0.0, 1.0, 0.2, 8)
        with pytest.raises(ValueError):
            gabor_kernel(1.0, -1.0, 0.2, 8)
        with pytest.raises(ValueError):
            gabor_kernel(1.0, 1.0, 0.7, 8)


class TestMelInit:
    def test_endpoints_anchored(self):
        centers, _ = mel_init(2, SR, 100.0, 8000.0)
        np.testing.assert_allclose(centers * SR, [100.0, 8000.0], rtol=1e-9)

    def test_near_identity_at_1khz(self):
        assert abs(float(hz_to_mel(1000.0)) - 1000.0) <= 0.5

    def test_constant_mel_spacing(self):
        centers, _ = mel_init(40, SR, 60.0, 7800.0)
        mels = hz_to_mel(centers * SR)
        steps = np.diff(mels)
        assert np.max(np.abs(steps - steps[0])) <= 1e-9

    def test_rejects_single_filter(self):
        with pytest.raises(ValueError):
            mel_init(1, SR, 100.0, 8000.0)


class TestGaborStudent:
    def test_tone_response_is_flat(self):
        m = GaborStudent(n_filters=8, half_length=128, hop_exponent=5, sample_rate=SR)
        f = 3
        eta = m.centers_[f]
        t = np.arange(4096)
        x = np.cos(2 * np.pi * eta * t)
        out = m.transform(x)
        row = np.abs(out.response[f])
        interior = row[8:-8]
        assert interior.max() / interior.min() <= 1.05

    def test_amplitude_scaling_is_linear(self):
        m = GaborStudent(n_filters=4, half_length=32, hop_exponent=4, sample_rate=SR)
        rng = np.random.default_rng(5)
        x = rng.standard_normal(256)
        base = m.transform(x).response[2].copy()
        m.amplitudes_[2] *= 3.0
        np.testing.assert_allclose(m.transform(x).response[2], 3.0 * base, rtol=1e-12)

    def test_matches_explicit_kernel_convolution(self):
        m = GaborStudent(n_filters=4, half_length=16, hop_exponent=3, sample_rate=SR)
        conv = ConvStudent(n_filters=4, half_length=16, hop_exponent=3)
        rng = np.random.default_rng(6)
        x = rng.standard_normal(100)
        kernels = m.materialize_kernels()
        out = m.transform(x).response
        for f in range(4):
            conv.kernels_[f] = kernels[f].real
            re = conv.transform(x).response[f].real
            conv.kernels_[f] = kernels[f].imag
            im = conv.transform(x).response[f].real
            np.testing.assert_allclose(out[f], re + 1j * im, rtol=1e-12, atol=1e-13)

    def test_parameter_count_and_clamping(self):
        m = GaborStudent(n_filters=5, half_length=64, hop_exponent=4, sample_rate=SR)
        assert m.n_parameters == 15
        m.widths_[0] = 1e9
        m.centers_[1] = 0.9
        m.clamp_parameters()
        assert m.widths_[0] == 4.0 * 64
        assert m.centers_[1] == 0.5 - 1.0 / (4.0 * 64)


class TestAssignOctaves:
    def test_top_octave(self):
        j, counts = assign_octaves([0.3 * SR], SR, 9)
        assert j[0] == 0

    def test_vqt_yields_twelve_per_octave(self):
        fb = build_teacher(TeacherSpec("vqt", SR))
        j, counts = assign_octaves(fb.center_freqs, SR, 9)
        assert counts[0] == 0
        np.testing.assert_array_equal(counts[1:9], 12)
        assert np.sum(counts) == fb.n_filters

    def test_synth_cqt_eight_per_band(self):
        fb = build_teacher(TeacherSpec("synth-cqt", SR))
        j, counts = assign_octaves(fb.center_freqs, SR, 9)
        assert counts[0] == 0
        np.testing.assert_array_equal(counts[1:9], 8)

    def test_low_centers_clamp_to_deepest_band(self):
        j, _ = assign_octaves([1.0, 2.0], SR, 5)
        np.testing.assert_array_equal(j, [4, 4])


class TestMultiresStudent:
    def make_student(self, J=3, random_state=0):
        centers = [500.0, 1500.0, 3000.0, 5000.0]
        return MultiresStudent(
            center_freqs=centers,
            sample_rate=SR,
            hop_exponent=J,
            random_state=random_state,
        )

    def test_impulse_kernel_subsamples_band(self):
        m = self.make_student()
        j = int(m.band_of_filter_[3])
        m.kernels_ = [np.zeros_like(k) for k in m.kernels_]
        row_in_level = np.flatnonzero(m.band_of_filter_ == j)
        local = list(row_in_level).index(3)
        L = int(m.half_lengths_[j])
        m.kernels_[j][local, L] = 1.0
        rng = np.random.default_rng(7)
        x = rng.standard_normal(256)
        p = dtcwt_forward(x, 3)
        out = m.transform(x)
        stride = 1 << (3 - j)
        np.testing.assert_allclose(out.response[3], p.bands[j][::stride], atol=1e-14)

    def test_matches_brute_force_composition(self):
        for seed in range(3):
            m = self.make_student(random_state=seed)
            rng = np.random.default_rng(seed + 10)
            x = rng.standard_normal(256)
            p = dtcwt_forward(x, 3)
            out = m.transform(x)
            for f in range(4):
                j = int(m.band_of_filter_[f])
                local = list(np.flatnonzero(m.band_of_filter_ == j)).index(f)
                want = brute_force_strided(p.bands[j], m.kernels_[j][local], 1 << (3 - j))
                np.testing.assert_allclose(out.response[f], want, rtol=1e-12, atol=1e-13)

    def test_uniform_row_length(self):
        m = self.make_student()
        out = m.transform(np.random.default_rng(8).standard_normal(250))
        assert out.response.shape == (4, 32)  # ceil(250 / 8)

    def test_parameter_count(self):
        m = self.make_student()
        expected = sum(2 * 8 * c * c for c in m.filters_per_band_ if c)
        assert m.n_parameters == expected
        w = m.weights
        assert w.size == expected
        m.weights = w + 1.0
        assert m.weights[0] == pytest.approx(w[0] + 1.0)

    def test_vanishing_moments_on_deep_bands(self):
        m = self.make_student()
        out = m.transform(np.ones(256))
        for f in range(4):
            if m.band_of_filter_[f] >= 1:
                rel = np.linalg.norm(out.response[f]) / np.sqrt(256.0)
                assert rel <= 1e-6

    def test_analyticity_inheritance_at_stride_one(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(2048)
        p = dtcwt_forward(x, 5)
        for j in (1, 2, 3):
            kernel = rng.standard_normal(16)
            row = np.convolve(p.bands[j], kernel, mode="same")
            assert negfrac(row) <= 0.02

    def test_linearity(self):
        m = self.make_student()
        rng = np.random.default_rng(11)
        x, y = rng.standard_normal(256), rng.standard_normal(256)
        lhs = m.transform(1.5 * x + 0.25 * y).response
        rhs = 1.5 * m.transform(x).response + 0.25 * m.transform(y).response
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.max(np.abs(rhs)))

    def test_frame_count_matches_teacher(self):
        fb = build_teacher(TeacherSpec("synth-cqt", SR))
        m = MultiresStudent(center_freqs=fb.center_freqs, sample_rate=SR, hop_exponent=9)
        rng = np.random.default_rng(12)
        x = rng.standard_normal(4096)
        assert m.transform(x).n_frames == teacher_spectrogram(fb, x, 9).n_frames
