import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

import sonolab.constants as constants
from sonolab.common_entries import AudioClip, Segment
from sonolab.errors import SegmentTooShort, EmptySpectrum, DegenerateSpectrum, AnalysisError
from sonolab.utils.utils import ms_to_samples, next_power_of_two, seconds_to_sample

logger = logging.getLogger(__name__)


class AveragedSpectrum(object):
    """One-sided power per bin, averaged over frames.

    Interior bins hold twice the squared DFT magnitude so that
    ``power.sum() / n_fft`` equals the mean windowed-frame energy.
    """

    def __init__(self, power, bin_hz: float, n_frames_averaged: int = 1, n_fft: int = 0):
        power = np.asarray(power, dtype=np.float64)
        if power.ndim != 1 or power.size == 0:
            raise AnalysisError('power spectrum must be a non-empty vector')
        if np.any(power < 0) or not np.all(np.isfinite(power)):
            raise AnalysisError('power spectrum must be finite and nonnegative')
        if not bin_hz > 0:
            raise AnalysisError('bin spacing must be positive, got {0}'.format(bin_hz))
        self._power = power
        self._bin_hz = float(bin_hz)
        self._n_frames_averaged = int(n_frames_averaged)
        self._n_fft = int(n_fft) if n_fft else 2 * (power.size - 1)

    @property
    def power(self) -> np.ndarray:
        return self._power

    @property
    def bin_hz(self) -> float:
        return self._bin_hz

    @property
    def n_frames_averaged(self) -> int:
        return self._n_frames_averaged

    @property
    def n_fft(self) -> int:
        return self._n_fft

    @property
    def nyquist_hz(self) -> float:
        return (self._power.size - 1) * self._bin_hz

    def frequencies(self) -> np.ndarray:
        return np.arange(self._power.size) * self._bin_hz

    def band_limited(self, exclude_dc=False, ceiling_hz=0.0) -> 'AveragedSpectrum':
        power = self._power.copy()
        if exclude_dc:
            power[0] = 0.0
        if ceiling_hz and ceiling_hz > 0:
            power[self.frequencies() > ceiling_hz] = 0.0
        return AveragedSpectrum(power, self._bin_hz, self._n_frames_averaged, self._n_fft)


class SpectralMoments(object):
    def __init__(self, m1_cog: float, m2_sd: float, m3_skewness: float, m4_kurtosis: float, duration_ms: float):
        self.m1_cog = m1_cog
        self.m2_sd = m2_sd
        self.m3_skewness = m3_skewness
        self.m4_kurtosis = m4_kurtosis
        self.duration_ms = duration_ms

    def to_dict(self) -> dict:
        return {'m1_cog_hz': self.m1_cog, 'm2_sd_hz': self.m2_sd, 'm3_skew': self.m3_skewness,
                'm4_kurt': self.m4_kurtosis, 'duration_ms': self.duration_ms}


def central_span(clip: AudioClip, seg: Segment, span=constants.DEFAULT_SPAN) -> np.ndarray:
    low, high = span
    start = seconds_to_sample(seg.start_s + low * seg.duration_s, clip.sample_rate)
    end = seconds_to_sample(seg.start_s + high * seg.duration_s, clip.sample_rate)
    start = min(max(start, 0), len(clip))
    end = min(max(end, start), len(clip))
    return clip.samples[start:end]


def frame_count(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 1
    return (n_samples - window) // hop + 1


def averaged_spectrum(clip: AudioClip, seg: Segment, window_ms=constants.DEFAULT_WINDOW_MS,
                      overlap_fraction=constants.DEFAULT_OVERLAP, span=constants.DEFAULT_SPAN,
                      min_samples=constants.MIN_SPECTRUM_SAMPLES) -> AveragedSpectrum:
    if not 0.0 <= overlap_fraction < 1.0:
        raise AnalysisError('overlap must be in [0, 1), got {0}'.format(overlap_fraction))
    samples = central_span(clip, seg, span)
    if samples.size < min_samples:
        raise SegmentTooShort('{0}: central span has {1} samples, need {2}'.format(seg, samples.size, min_samples))

    window_length = ms_to_samples(window_ms, clip.sample_rate)
    if samples.size < window_length:
        logger.debug('%s shorter than one %.1f ms window, using a single %d-sample window', seg, window_ms,
                     samples.size)
        window_length = samples.size
    hop = max(1, int(round(window_length * (1.0 - overlap_fraction))))

    n_frames = frame_count(samples.size, window_length, hop)
    frames = sliding_window_view(samples, window_length)[::hop][:n_frames]
    window = get_window('hamming', window_length, fftbins=False)
    n_fft = next_power_of_two(window_length)

    spectra = np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1)) ** 2
    power = spectra.mean(axis=0)
    # one-sided: interior bins stand for their negative-frequency twins too
    power[1:n_fft // 2] *= 2.0
    return AveragedSpectrum(power, clip.sample_rate / n_fft, n_frames, n_fft)


def spectral_moments(spec: AveragedSpectrum) -> tuple:
    """Center of gravity, spread, skewness and excess kurtosis of the power."""
    total = spec.power.sum()
    if not total > 0:
        raise EmptySpectrum('all-zero power spectrum')
    p = spec.power / total
    f = spec.frequencies()
    m1 = float(np.dot(f, p))
    deviation = f - m1
    variance = float(np.dot(deviation ** 2, p))
    m2 = math.sqrt(variance)
    if m2 <= 0.0:
        raise DegenerateSpectrum(m1, m2)
    m3 = float(np.dot(deviation ** 3, p)) / m2 ** 3
    m4 = float(np.dot(deviation ** 4, p)) / variance ** 2 - 3.0
    return m1, m2, m3, m4


def duration_ms(seg: Segment) -> float:
    return (seg.end_s - seg.start_s) * 1000.0


def analyze_sonorant(clip: AudioClip, seg: Segment, window_ms=constants.DEFAULT_WINDOW_MS,
                     overlap_fraction=constants.DEFAULT_OVERLAP, span=constants.DEFAULT_SPAN, exclude_dc=False,
                     ceiling_hz=0.0, min_samples=constants.MIN_SPECTRUM_SAMPLES) -> tuple:
    spec = averaged_spectrum(clip, seg, window_ms, overlap_fraction, span, min_samples)
    m1, m2, m3, m4 = spectral_moments(spec.band_limited(exclude_dc, ceiling_hz))
    return SpectralMoments(m1, m2, m3, m4, duration_ms(seg)), spec
