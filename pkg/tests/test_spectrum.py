import math

import numpy as np
import pytest

from sonolab.common_entries import AudioClip, Segment
from sonolab.errors import SegmentTooShort, EmptySpectrum, DegenerateSpectrum
from sonolab.spectrum.entry import AveragedSpectrum, averaged_spectrum, spectral_moments, duration_ms, \
    analyze_sonorant, central_span, frame_count
from sonolab.synthkit.entry import synth_spectrum, FlatEnvelope, GaussianEnvelope, PointEnvelope, \
    discrete_uniform_moments


def _segment(start, end):
    return Segment(label='m', start_s=start, end_s=end)


class TestAveragedSpectrum:
    def test_frame_count(self, rng):
        clip = AudioClip(rng.standard_normal(44100), 44100)
        spec = averaged_spectrum(clip, _segment(0.0, 0.08))
        assert spec.n_frames_averaged == 5
        assert spec.n_fft == 1024
        assert spec.bin_hz == 44100 / 1024

    def test_frame_count_arithmetic(self):
        assert frame_count(2823, 882, 441) == 5
        assert frame_count(100, 882, 441) == 1

    def test_identical_frames_average_to_one_frame(self):
        period = np.sin(2.0 * np.pi * np.arange(48) / 48.0)
        clip = AudioClip(np.tile(period, 250), 48000)
        seg = _segment(0.0, 0.25)
        spec = averaged_spectrum(clip, seg)
        assert spec.n_frames_averaged > 10

        frame = central_span(clip, seg)[:960] * np.hamming(960)
        expected = np.abs(np.fft.rfft(frame, 1024)) ** 2
        expected[1:512] *= 2.0
        np.testing.assert_allclose(spec.power, expected, rtol=1e-9, atol=1e-12 * expected.max())

    def test_parseval(self, rng):
        clip = AudioClip(rng.standard_normal(22050), 44100)
        seg = _segment(0.0, 0.5)
        spec = averaged_spectrum(clip, seg)
        span = central_span(clip, seg)
        window = np.hamming(882)
        energies = [np.sum((span[i * 441:i * 441 + 882] * window) ** 2) for i in range(spec.n_frames_averaged)]
        assert spec.power.sum() / spec.n_fft == pytest.approx(np.mean(energies), rel=1e-9)

    def test_too_short(self, rng):
        clip = AudioClip(rng.standard_normal(4410), 44100)
        with pytest.raises(SegmentTooShort):
            averaged_spectrum(clip, _segment(0.0, 0.001))

    def test_single_short_window(self, rng):
        clip = AudioClip(rng.standard_normal(4410), 44100)
        spec = averaged_spectrum(clip, _segment(0.0, 0.01))
        assert spec.n_frames_averaged == 1
        assert spec.n_fft == 512

    def test_band_limited(self):
        spec = AveragedSpectrum(np.ones(11), 100.0)
        limited = spec.band_limited(exclude_dc=True, ceiling_hz=500.0)
        assert limited.power[0] == 0.0
        assert limited.power[1:6].tolist() == [1.0] * 5
        assert not np.any(limited.power[6:])
        assert spec.power[0] == 1.0


class TestSpectralMoments:
    def test_point_mass(self):
        spec = synth_spectrum(PointEnvelope(1000.0), 10.0, 513)
        with pytest.raises(DegenerateSpectrum) as info:
            spectral_moments(spec)
        assert info.value.m1 == pytest.approx(1000.0)
        assert info.value.m2 == 0.0

    def test_flat_spectrum(self):
        spec = synth_spectrum(FlatEnvelope(0.0, 4000.0), 10.0, 513)
        m1, m2, m3, m4 = spectral_moments(spec)
        mean, sd, skew, kurtosis = discrete_uniform_moments(0, 400, 10.0)
        assert m1 == pytest.approx(mean, rel=1e-12)
        assert m2 == pytest.approx(sd, rel=1e-12)
        assert m3 == pytest.approx(skew, abs=1e-10)
        assert m4 == pytest.approx(kurtosis, rel=1e-12)
        assert m1 == pytest.approx(2000.0, rel=0.01)
        assert m2 == pytest.approx(4000.0 / math.sqrt(12.0), rel=0.01)
        assert m4 == pytest.approx(-1.2, rel=0.01)

    def test_gaussian_envelope(self):
        m1, m2, m3, _ = spectral_moments(synth_spectrum(GaussianEnvelope(800.0, 200.0), 10.0, 513))
        assert m1 == pytest.approx(800.0, rel=0.02)
        assert m2 == pytest.approx(200.0, rel=0.02)
        assert abs(m3) < 0.05

    def test_frequency_shift(self):
        base = spectral_moments(synth_spectrum(GaussianEnvelope(800.0, 200.0), 10.0, 513))
        shifted = spectral_moments(synth_spectrum(GaussianEnvelope(1050.0, 200.0), 10.0, 513))
        assert shifted[0] - base[0] == pytest.approx(250.0, rel=1e-9)
        assert shifted[1] == pytest.approx(base[1], rel=1e-9)
        assert shifted[2] == pytest.approx(base[2], abs=1e-9)
        assert shifted[3] == pytest.approx(base[3], abs=1e-9)

    def test_kurtosis_bound(self, rng):
        for _ in range(50):
            power = rng.random(257) ** int(rng.integers(1, 6))
            _, _, m3, m4 = spectral_moments(AveragedSpectrum(power, 20.0))
            assert m4 >= m3 * m3 - 2.0 - 1e-9

    def test_zero_spectrum(self):
        with pytest.raises(EmptySpectrum):
            spectral_moments(AveragedSpectrum(np.zeros(10), 1.0))

    def test_amplitude_invariance(self, rng, sine_clip):
        noise = 0.05 * rng.standard_normal(8820)
        base = sine_clip(1200.0, 0.2)
        clip = AudioClip(base.samples + noise, base.sample_rate)
        seg = _segment(0.02, 0.16)
        reference, _ = analyze_sonorant(clip, seg)
        for factor in (1e-3, 1e3):
            moments, _ = analyze_sonorant(clip.scaled(factor), seg)
            assert moments.m1_cog == pytest.approx(reference.m1_cog, rel=1e-9)
            assert moments.m2_sd == pytest.approx(reference.m2_sd, rel=1e-9)
            assert moments.m3_skewness == pytest.approx(reference.m3_skewness, rel=1e-9, abs=1e-12)
            assert moments.m4_kurtosis == pytest.approx(reference.m4_kurtosis, rel=1e-9, abs=1e-12)

    def test_analyze_sonorant_of_a_tone(self, sine_clip):
        moments, spec = analyze_sonorant(sine_clip(1000.0, 0.2), _segment(0.05, 0.15))
        assert moments.m1_cog == pytest.approx(1000.0, rel=0.05)
        assert moments.duration_ms == pytest.approx(100.0)
        assert spec.n_frames_averaged >= 6


class TestDuration:
    def test_arithmetic(self):
        assert duration_ms(_segment(0.100, 0.184)) == pytest.approx(84.0)
        assert duration_ms(_segment(0.0, 0.02477)) == pytest.approx(24.77)

    def test_additivity(self):
        assert duration_ms(_segment(0.25, 0.5)) + duration_ms(_segment(0.5, 0.75)) == duration_ms(_segment(0.25, 0.75))
