import logging
import math
from fractions import Fraction
from typing import List

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import butter, lfilter, resample_poly, sosfiltfilt

import sonolab.constants as constants
from sonolab.common_entries import AudioClip, Segment
from sonolab.errors import SegmentTooShort, NumericalFailure, RootFindingDiverged, TooFewFormants, \
    TrackingFailed, AnalysisError
from sonolab.utils.utils import ms_to_samples, seconds_to_sample

logger = logging.getLogger(__name__)

GAUSSIAN_ALPHA = 12.0
BURG_TINY = 1e-30


class FormantPoint(object):
    def __init__(self, frequency: float, bandwidth: float):
        self.frequency = frequency
        self.bandwidth = bandwidth

    def __repr__(self):
        return 'FormantPoint({0:.1f} Hz, bw {1:.1f} Hz)'.format(self.frequency, self.bandwidth)


class FormantFrame(object):
    """Formant candidates of one analysis frame, ascending in frequency."""

    def __init__(self, time_s: float, formants: List[FormantPoint], ceiling_hz=constants.DEFAULT_CEILING_HZ):
        if len(formants) > constants.MAX_FORMANT_CANDIDATES:
            raise AnalysisError('at most {0} formants per frame'.format(constants.MAX_FORMANT_CANDIDATES))
        previous = 0.0
        for point in formants:
            if not previous < point.frequency < ceiling_hz:
                raise AnalysisError('formant frequencies must ascend inside (0, {0})'.format(ceiling_hz))
            if not point.bandwidth > 0:
                raise AnalysisError('formant bandwidths must be positive')
            previous = point.frequency
        self.time_s = time_s
        self.formants = list(formants)

    @property
    def n_formants(self) -> int:
        return len(self.formants)

    def frequencies(self, count=constants.N_FORMANTS) -> np.ndarray:
        return np.array([point.frequency for point in self.formants[:count]])


class FormantTrack(object):
    """F1-F4 at 5%, 10%, ..., 95% of a vowel."""

    def __init__(self, values, ceiling_hz=constants.DEFAULT_CEILING_HZ):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (constants.N_GRID_POINTS, constants.N_FORMANTS):
            raise TrackingFailed('track must be {0} x {1}, got {2}'.format(
                constants.N_GRID_POINTS, constants.N_FORMANTS, values.shape))
        if not np.all(np.isfinite(values)) or np.any(values <= 0) or np.any(values >= ceiling_hz):
            raise TrackingFailed('track values must lie inside (0, {0}) Hz'.format(ceiling_hz))
        if np.any(np.diff(values, axis=1) <= 0):
            raise TrackingFailed('formants must ascend within every grid row')
        self.grid = np.array(constants.GRID_POSITIONS)
        self.values = values

    def formant(self, number: int) -> np.ndarray:
        """Contour of formant ``number`` (1-based)."""
        return self.values[:, number - 1]


class ConditionedSignal(object):
    def __init__(self, samples: np.ndarray, sample_rate: float, start_s: float):
        self.samples = samples
        self.sample_rate = sample_rate
        self.start_s = start_s


def pre_emphasis(samples: np.ndarray, sample_rate: float, from_hz=constants.DEFAULT_PREEMPHASIS_HZ) -> np.ndarray:
    alpha = math.exp(-2.0 * math.pi * from_hz / sample_rate)
    return lfilter([1.0, -alpha], [1.0], samples)


def preprocess(clip: AudioClip, seg: Segment, ceiling_hz=constants.DEFAULT_CEILING_HZ,
               context_ms=constants.DEFAULT_CONTEXT_MS, frame_ms=constants.DEFAULT_FRAME_MS,
               preemphasis_hz=constants.DEFAULT_PREEMPHASIS_HZ) -> ConditionedSignal:
    """Slices the segment with context, low-passes, decimates to twice the ceiling, pre-emphasizes."""
    context_s = context_ms / 1000.0
    start, end = clip.sample_range(seg.start_s - context_s, seg.end_s + context_s)
    start = max(start, 0)
    samples = clip.samples[start:end]
    rate = float(clip.sample_rate)

    target_rate = 2.0 * ceiling_hz
    if target_rate < rate:
        if samples.size > 3 * 2 * constants.LOWPASS_ORDER:
            sos = butter(constants.LOWPASS_ORDER, constants.LOWPASS_FRACTION * ceiling_hz, btype='low', fs=rate,
                         output='sos')
            samples = sosfiltfilt(sos, samples)
        ratio = Fraction(target_rate / rate).limit_denominator(1000)
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)
        rate = rate * ratio.numerator / ratio.denominator

    if samples.size < ms_to_samples(frame_ms, rate):
        raise SegmentTooShort('{0}: {1} samples at {2:.0f} Hz, less than one {3} ms analysis window'.format(
            seg, samples.size, rate, frame_ms))
    return ConditionedSignal(pre_emphasis(samples, rate, preemphasis_hz), rate, start / clip.sample_rate)


def gaussian_window(n: int) -> np.ndarray:
    if n <= 1:
        return np.ones(max(n, 0))
    x = (np.arange(n) - (n - 1) / 2.0) / ((n - 1) / 2.0)
    edge = math.exp(-GAUSSIAN_ALPHA)
    return np.maximum((np.exp(-GAUSSIAN_ALPHA * x * x) - edge) / (1.0 - edge), 0.0)


def burg_lpc(frame, order=constants.DEFAULT_LPC_ORDER) -> tuple:
    """Burg estimate of predictor coefficients.

    Returns ``(a, residual)`` for ``A(z) = 1 + a[0] z^-1 + ... + a[p-1] z^-p``;
    ``residual`` starts at the frame energy and shrinks by ``1 - k^2`` per
    reflection coefficient ``k``.
    """
    x = np.asarray(frame, dtype=np.float64)
    if order < 0:
        raise AnalysisError('order must be nonnegative')
    if not np.all(np.isfinite(x)):
        raise NumericalFailure('non-finite sample in analysis frame')
    if x.size <= order:
        raise AnalysisError('frame of {0} samples too short for order {1}'.format(x.size, order))
    residual = float(np.dot(x, x))
    a = np.array([1.0])
    forward = x[1:].copy()
    backward = x[:-1].copy()
    for _ in range(order):
        denominator = np.dot(forward, forward) + np.dot(backward, backward)
        if denominator < BURG_TINY:
            raise NumericalFailure('Burg denominator underflow')
        k = -2.0 * np.dot(forward, backward) / denominator
        extended = np.concatenate([a, [0.0]])
        a = extended + k * extended[::-1]
        residual *= 1.0 - k * k
        forward, backward = (forward + k * backward)[1:], (backward + k * forward)[:-1]
    return a[1:], residual


def aberth_roots(poly, tolerance=constants.ROOT_TOLERANCE, max_iterations=constants.ROOT_MAX_ITERATIONS) -> np.ndarray:
    """All roots of ``poly`` (highest power first) by Aberth-Ehrlich iteration."""
    c = np.asarray(poly, dtype=np.complex128)
    if not np.all(np.isfinite(c)):
        raise RootFindingDiverged('non-finite coefficient')
    nonzero = np.flatnonzero(c)
    if nonzero.size == 0:
        raise RootFindingDiverged('zero polynomial')
    c = c[nonzero[0]:] / c[nonzero[0]]
    degree = c.size - 1
    if degree == 0:
        return np.array([], dtype=np.complex128)
    derivative = c[:-1] * np.arange(degree, 0, -1)

    tail = abs(c[-1])
    radius = tail ** (1.0 / degree) if tail > 0 else 1.0
    z = radius * np.exp(1j * (2.0 * np.pi * np.arange(degree) / degree + 0.4))
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        for _ in range(max_iterations):
            ratio = np.polyval(c, z) / np.polyval(derivative, z)
            difference = z[:, None] - z[None, :]
            np.fill_diagonal(difference, np.inf)
            repulsion = (1.0 / difference).sum(axis=1)
            step = ratio / (1.0 - ratio * repulsion)
            step[~np.isfinite(step)] = 0.0
            z = z - step
            if not np.all(np.isfinite(z)):
                raise RootFindingDiverged('non-finite root estimate')
            if np.max(np.abs(step)) <= tolerance * max(1.0, np.max(np.abs(z))):
                return z
    raise RootFindingDiverged('no convergence after {0} iterations'.format(max_iterations))


def roots_to_formants(coefficients, sample_rate: float, ceiling_hz=constants.DEFAULT_CEILING_HZ,
                      max_bandwidth_hz=constants.DEFAULT_MAX_BANDWIDTH_HZ,
                      edge_margin_hz=constants.DEFAULT_EDGE_MARGIN_HZ, n_formants=constants.N_FORMANTS,
                      time_s=0.0) -> FormantFrame:
    roots = aberth_roots(np.concatenate([[1.0], np.asarray(coefficients, dtype=np.float64)]))
    # roots outside the unit circle keep their angle
    outside = np.abs(roots) > 1.0
    roots[outside] = 1.0 / np.conj(roots[outside])

    points = []
    for root in roots:
        if root.imag <= 0:
            continue
        radius = abs(root)
        if radius == 0:
            continue
        frequency = math.atan2(root.imag, root.real) * sample_rate / (2.0 * math.pi)
        bandwidth = -math.log(radius) * sample_rate / math.pi
        if edge_margin_hz < frequency < ceiling_hz - edge_margin_hz and 0 < bandwidth < max_bandwidth_hz:
            points.append(FormantPoint(frequency, bandwidth))
    points.sort(key=lambda point: point.frequency)
    if len(points) < n_formants:
        raise TooFewFormants('{0} formant candidates, need {1}'.format(len(points), n_formants))
    return FormantFrame(time_s, points[:constants.MAX_FORMANT_CANDIDATES], ceiling_hz)


def frame_centers(seg: Segment, hop_s: float) -> np.ndarray:
    n_frames = int(math.floor(seg.duration_s / hop_s)) + 1
    first = seg.start_s + (seg.duration_s - (n_frames - 1) * hop_s) / 2.0
    return first + hop_s * np.arange(n_frames)


def grid_times(seg: Segment) -> np.ndarray:
    return seg.start_s + np.array(constants.GRID_POSITIONS) * seg.duration_s


def _bridge(column: np.ndarray) -> np.ndarray:
    valid = np.isfinite(column)
    if np.all(valid):
        return column
    index = np.arange(column.size)
    return np.interp(index, index[valid], column[valid])


def track(clip: AudioClip, seg: Segment, ceiling_hz=constants.DEFAULT_CEILING_HZ, order=constants.DEFAULT_LPC_ORDER,
          frame_ms=constants.DEFAULT_FRAME_MS, hop_ms=constants.DEFAULT_HOP_MS,
          max_bandwidth_hz=constants.DEFAULT_MAX_BANDWIDTH_HZ, edge_margin_hz=constants.DEFAULT_EDGE_MARGIN_HZ,
          context_ms=constants.DEFAULT_CONTEXT_MS, median_width=constants.DEFAULT_MEDIAN_WIDTH,
          max_missing_fraction=constants.DEFAULT_MAX_MISSING_FRACTION,
          preemphasis_hz=constants.DEFAULT_PREEMPHASIS_HZ) -> FormantTrack:
    signal = preprocess(clip, seg, ceiling_hz, context_ms, frame_ms, preemphasis_hz)
    rate = signal.sample_rate
    window_length = ms_to_samples(frame_ms, rate)
    window = gaussian_window(window_length)
    centers = frame_centers(seg, hop_ms / 1000.0)

    values = np.full((centers.size, constants.N_FORMANTS), np.nan)
    for index, center in enumerate(centers):
        first = seconds_to_sample(center - signal.start_s, rate) - window_length // 2
        frame = np.zeros(window_length)
        src_start = max(first, 0)
        src_end = min(first + window_length, signal.samples.size)
        if src_end > src_start:
            frame[src_start - first:src_end - first] = signal.samples[src_start:src_end]
        try:
            coefficients, _ = burg_lpc(frame * window, order)
            formant_frame = roots_to_formants(coefficients, rate, ceiling_hz, max_bandwidth_hz, edge_margin_hz,
                                              time_s=center)
        except (NumericalFailure, RootFindingDiverged, TooFewFormants) as ex:
            logger.debug('%s frame at %.4f s missing: %s', seg, center, ex)
            continue
        values[index] = formant_frame.frequencies()

    missing = np.mean(np.isnan(values[:, 0]))
    if missing > max_missing_fraction:
        raise TrackingFailed('{0}: {1:.0%} of {2} frames missing'.format(seg, missing, centers.size))

    times = grid_times(seg)
    grid = np.empty((constants.N_GRID_POINTS, constants.N_FORMANTS))
    for formant in range(constants.N_FORMANTS):
        column = _bridge(values[:, formant])
        if median_width > 1:
            column = median_filter(column, size=median_width, mode='nearest')
        grid[:, formant] = np.interp(times, centers, column)
    return FormantTrack(grid, ceiling_hz)
