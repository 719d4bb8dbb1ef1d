"""Ground-truth generators and independent oracles.

Nothing here calls into ``sonolab.spectrum``, ``sonolab.formants``,
``sonolab.contour`` or ``sonolab.stats`` computations; only their value
types are shared.
"""

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

import sonolab.constants as constants
from sonolab.common_entries import AudioClip, Segment
from sonolab.errors import UnstableResonator, OutOfBand, SynthError
from sonolab.spectrum.entry import AveragedSpectrum
from sonolab.stats.entry import FeatureRecord, FeatureFields, DEFAULT_LOG_DVS, INTERCEPT
from sonolab.utils.utils import make_rng

logger = logging.getLogger(__name__)

GRID_FIRST = constants.GRID_POSITIONS[0]
GRID_STEP = constants.GRID_POSITIONS[1] - constants.GRID_POSITIONS[0]


class VowelSpec(object):
    """Impulse-train source through a cascade of second-order resonators.

    ``trajectory`` holds, per formant, either None (constant frequency) or
    ``(a0, a1, a2)`` in grid-step units, ``t = 0`` at 5% of the duration.
    ``source_tilt_hz`` adds a one-pole low-pass roll-off to the source with
    its corner at that frequency; pre-emphasis at the same corner undoes it.
    """

    def __init__(self, f0: float, formants: Sequence[Tuple[float, float]], duration_s: float,
                 sample_rate: int = constants.EXPECTED_SAMPLE_RATE, trajectory: Optional[Sequence] = None,
                 source_tilt_hz: Optional[float] = None):
        if not f0 > 0:
            raise SynthError('f0 must be positive, got {0}'.format(f0))
        if not duration_s > 0:
            raise SynthError('duration must be positive, got {0}'.format(duration_s))
        if not sample_rate > 0:
            raise SynthError('sample rate must be positive, got {0}'.format(sample_rate))
        frequencies = [frequency for frequency, _ in formants]
        if any(b <= a for a, b in zip(frequencies, frequencies[1:])):
            raise SynthError('formant frequencies must ascend: {0}'.format(frequencies))
        if any(not 0 < frequency < sample_rate / 2.0 for frequency in frequencies):
            raise OutOfBand('formants must lie inside (0, {0}) Hz'.format(sample_rate / 2.0))
        if trajectory is not None and len(trajectory) != len(formants):
            raise SynthError('one trajectory entry per formant expected')
        if source_tilt_hz is not None and not 0 < source_tilt_hz < sample_rate / 2.0:
            raise SynthError('source tilt must lie inside (0, {0}) Hz'.format(sample_rate / 2.0))
        self.f0 = float(f0)
        self.formants = [(float(frequency), float(bandwidth)) for frequency, bandwidth in formants]
        self.duration_s = float(duration_s)
        self.sample_rate = int(sample_rate)
        self.trajectory = list(trajectory) if trajectory is not None else None
        self.source_tilt_hz = float(source_tilt_hz) if source_tilt_hz is not None else None

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate))

    def grid_step_of_sample(self) -> np.ndarray:
        position = np.arange(self.n_samples) / self.n_samples
        return (position - GRID_FIRST) / GRID_STEP

    def frequency_track(self, index: int) -> np.ndarray:
        """Per-sample frequency of formant ``index`` (0-based)."""
        constant = np.full(self.n_samples, self.formants[index][0])
        if self.trajectory is None or self.trajectory[index] is None:
            return constant
        a0, a1, a2 = self.trajectory[index]
        t = self.grid_step_of_sample()
        return a0 + a1 * t + a2 * t * t

    def to_dict(self) -> dict:
        return {'f0': self.f0, 'formants': [list(pair) for pair in self.formants], 'duration_s': self.duration_s,
                'sample_rate': self.sample_rate,
                'trajectory': [list(entry) if entry is not None else None for entry in self.trajectory]
                if self.trajectory is not None else None,
                'source_tilt_hz': self.source_tilt_hz}


def impulse_train(f0: float, n_samples: int, sample_rate: int) -> np.ndarray:
    source = np.zeros(n_samples)
    period = sample_rate / f0
    positions = np.round(np.arange(0.0, n_samples, period)).astype(int)
    source[positions[positions < n_samples]] = 1.0
    return source


def resonate(x: np.ndarray, frequencies: np.ndarray, bandwidth: float, sample_rate: int) -> np.ndarray:
    """``y[n] = 2 r cos(theta[n]) y[n-1] - r^2 y[n-2] + x[n]``."""
    r = math.exp(-math.pi * bandwidth / sample_rate)
    if r >= 1.0:
        raise UnstableResonator('bandwidth {0} Hz gives pole radius {1}'.format(bandwidth, r))
    b = 2.0 * r * np.cos(2.0 * math.pi * frequencies / sample_rate)
    c = -r * r
    y = np.zeros_like(x)
    y1 = 0.0
    y2 = 0.0
    for n in range(x.size):
        current = b[n] * y1 + c * y2 + x[n]
        y[n] = current
        y2 = y1
        y1 = current
    return y


def peak_normalize(samples: np.ndarray, peak=constants.SYNTH_PEAK) -> np.ndarray:
    top = np.max(np.abs(samples))
    return samples * (peak / top) if top > 0 else samples


def synth_vowel(spec: VowelSpec) -> AudioClip:
    signal = impulse_train(spec.f0, spec.n_samples, spec.sample_rate)
    if spec.source_tilt_hz is not None:
        pole = math.exp(-2.0 * math.pi * spec.source_tilt_hz / spec.sample_rate)
        signal = lfilter([1.0], [1.0, -pole], signal)
    for index, (_, bandwidth) in enumerate(spec.formants):
        frequencies = spec.frequency_track(index)
        if np.any(frequencies <= 0) or np.any(frequencies >= spec.sample_rate / 2.0):
            raise OutOfBand('formant {0} trajectory leaves (0, Nyquist)'.format(index + 1))
        signal = resonate(signal, frequencies, bandwidth, spec.sample_rate)
    return AudioClip(peak_normalize(signal), spec.sample_rate)


# analytic spectra
class FlatEnvelope(object):
    def __init__(self, low_hz: float, high_hz: float):
        if not high_hz > low_hz:
            raise SynthError('flat envelope needs low < high')
        self.low_hz = low_hz
        self.high_hz = high_hz

    def bounds(self) -> tuple:
        return self.low_hz, self.high_hz

    def power(self, frequencies: np.ndarray, bin_hz: float) -> np.ndarray:
        k = np.arange(frequencies.size)
        first = math.ceil(self.low_hz / bin_hz - 1e-9)
        last = math.floor(self.high_hz / bin_hz + 1e-9)
        return ((k >= first) & (k <= last)).astype(np.float64)


class GaussianEnvelope(object):
    def __init__(self, mean_hz: float, sd_hz: float, truncate: float = 3.0):
        if not sd_hz > 0:
            raise SynthError('gaussian envelope needs sd > 0')
        self.mean_hz = mean_hz
        self.sd_hz = sd_hz
        self.truncate = truncate

    def bounds(self) -> tuple:
        return self.mean_hz - self.truncate * self.sd_hz, self.mean_hz + self.truncate * self.sd_hz

    def power(self, frequencies: np.ndarray, bin_hz: float) -> np.ndarray:
        z = (frequencies - self.mean_hz) / self.sd_hz
        return np.where(np.abs(z) <= self.truncate + 1e-12, np.exp(-0.5 * z * z), 0.0)


class PointEnvelope(object):
    def __init__(self, frequency_hz: float):
        self.frequency_hz = frequency_hz

    def bounds(self) -> tuple:
        return self.frequency_hz, self.frequency_hz

    def power(self, frequencies: np.ndarray, bin_hz: float) -> np.ndarray:
        power = np.zeros(frequencies.size)
        power[int(round(self.frequency_hz / bin_hz))] = 1.0
        return power


def synth_spectrum(envelope, bin_hz: float, n_bins: int) -> AveragedSpectrum:
    """Evaluates ``envelope`` at ``k * bin_hz`` for ``k = 0 .. n_bins - 1``."""
    nyquist = (n_bins - 1) * bin_hz
    low, high = envelope.bounds()
    if low < 0 or high > nyquist + 1e-9 * nyquist:
        raise OutOfBand('envelope [{0}, {1}] Hz outside [0, {2}] Hz'.format(low, high, nyquist))
    frequencies = np.arange(n_bins) * bin_hz
    return AveragedSpectrum(envelope.power(frequencies, bin_hz), bin_hz, 1, 2 * (n_bins - 1))


def discrete_uniform_moments(first_bin: int, last_bin: int, bin_hz: float) -> tuple:
    """Closed-form mean, sd, skewness and excess kurtosis of equal mass on bins ``first..last``."""
    m = last_bin - first_bin + 1
    mean = bin_hz * (first_bin + last_bin) / 2.0
    sd = bin_hz * math.sqrt((m * m - 1) / 12.0)
    if m == 1:
        return mean, 0.0, float('nan'), float('nan')
    return mean, sd, 0.0, -6.0 * (m * m + 1) / (5.0 * (m * m - 1))


def direct_moments(frequencies, power) -> tuple:
    """Power-weighted moments by plain summation."""
    total = 0.0
    first = 0.0
    for f, p in zip(frequencies, power):
        total += p
        first += f * p
    mean = first / total
    second = third = fourth = 0.0
    for f, p in zip(frequencies, power):
        d = f - mean
        second += d * d * p
        third += d * d * d * p
        fourth += d * d * d * d * p
    variance = second / total
    sd = math.sqrt(variance)
    return mean, sd, third / total / sd ** 3, fourth / total / variance ** 2 - 3.0


# planted-effect corpora
TABLE_EFFECTS = {
    FeatureFields.DURATION_FIELD: {INTERCEPT: 4.38, 'r': -1.11, 'CG:m': 0.09, 'CG:r': 0.09, 'CG:unstressed': -0.10},
    FeatureFields.M1_FIELD: {INTERCEPT: 6.63, 'n': -0.12, 'r': 0.41, 'CG:m': 0.06, 'CG:n': 0.08},
    FeatureFields.M2_FIELD: {INTERCEPT: 6.56, 'm': -0.14, 'n': -0.11, 'r': 0.46, 'CG:m': 0.25, 'CG:n': 0.23},
    FeatureFields.M3_FIELD: {INTERCEPT: 11.42, 'm': 3.57, 'n': 4.14, 'r': -3.01, 'CG:m': -2.67},
    FeatureFields.M4_FIELD: {INTERCEPT: 288.10, 'm': 227.90, 'n': 218.80, 'r': -154.20},
    'f1_a0': {INTERCEPT: 479.63, 'm': -85.19, 'n': -59.23, 'r': 160.89, 'CG': 113.43, 'i': -53.53, 'CG:n': -90.75,
              'CG:r': -88.13, 'CG:i': -50.09},
    'f1_a1': {INTERCEPT: -10.28, 'r': 6.71, 'i': 8.99, 'CG:r:i': 11.20},
    'f1_a2': {INTERCEPT: 0.59, 'r': -0.54, 'i': -0.64, 'm:i': 0.42},
    'f2_a0': {INTERCEPT: 1564.21, 'm': -253.94, 'r': 144.75, 'i': 253.90, 'CG:m': 107.56},
    'f2_a1': {INTERCEPT: 2.0},
    'f2_a2': {INTERCEPT: -0.1},
    'f3_a0': {INTERCEPT: 2844.90, 'm': -279.50, 'n': -244.91, 'n:i': 132.89, 'r:i': 161.98, 'CG:r:i': -188.05},
    'f3_a1': {INTERCEPT: 7.79, 'm': -12.31, 'n:i': -23.06, 'CG:n:i': 28.82, 'CG:unstressed:m:i': 53.65},
    'f3_a2': {INTERCEPT: -0.46, 'm': 0.69, 'r': -0.66, 'n:i': 1.04, 'CG:unstressed:m:i': -3.01},
    'f4_a0': {INTERCEPT: 3814.76, 'm': -346.87, 'm:i': 408.67, 'n:i': 335.36},
    'f4_a1': {INTERCEPT: 1.0},
    'f4_a2': {INTERCEPT: -0.05},
}

ALL_LEVELS = frozenset(level for levels in constants.FACTOR_LEVELS.values() for level in levels)


def keyword_for(segment: str, vowel: str, stress: str) -> str:
    """Word-initial lexicon keyword for a sonorant + vowel syllable."""
    if stress == constants.STRESSED:
        return constants.STRESS_MARK + segment + vowel + 'sa'
    return segment + vowel + constants.STRESS_MARK + 'sa'


def full_design(factors=constants.SONORANT_FACTORS) -> List[dict]:
    return [dict(zip(factors, levels)) for levels in itertools.product(*[constants.FACTOR_LEVELS[factor]
                                                                         for factor in factors])]


def _complete(cell: dict) -> dict:
    return {factor: cell.get(factor, constants.REFERENCE_LEVELS[factor]) for factor in constants.VOWEL_FACTORS}


def cell_mean(effects: Dict[str, float], cell: dict) -> float:
    """Sum of the treatment-coded terms active in ``cell``."""
    levels = set(_complete(cell).values())
    total = 0.0
    for term, value in effects.items():
        if term == INTERCEPT:
            total += value
            continue
        parts = term.split(':')
        if any(part not in ALL_LEVELS for part in parts):
            raise SynthError('unknown level in term {0!r}'.format(term))
        if all(part in levels for part in parts):
            total += value
    return total


def cell_label(cell: dict) -> str:
    complete = _complete(cell)
    return '/'.join(complete[factor] for factor in constants.VOWEL_FACTORS)


def _per_dv(value, dv: str) -> float:
    if isinstance(value, dict):
        return float(value.get(dv, 0.0))
    return float(value)


def synth_corpus(design: Optional[List[dict]] = None, effects: Optional[Dict[str, Dict[str, float]]] = None,
                 noise_sd=0.05, n_per_cell: int = 16, seed: int = 0, speakers_per_variety: int = 4,
                 speaker_sd=0.0, log_dvs=DEFAULT_LOG_DVS) -> tuple:
    """Planted-effect ``FeatureRecord``s and the exact generating parameters.

    Effects are on the model scale: log-scale DVs are exponentiated after
    cell mean, speaker offset and noise are summed.
    """
    design = design if design is not None else full_design()
    effects = dict(TABLE_EFFECTS, **(effects or {}))
    dvs = FeatureFields.MOMENTS + FeatureFields.COEFFICIENTS
    rng = make_rng(seed)

    speakers = {variety: ['{0}{1:02d}'.format(variety, k + 1) for k in range(speakers_per_variety)]
                for variety in constants.FACTOR_LEVELS['variety']}
    offsets = {dv: {speaker: float(rng.normal(0.0, _per_dv(speaker_sd, dv))) if _per_dv(speaker_sd, dv) > 0
                    else 0.0 for group in speakers.values() for speaker in group} for dv in dvs}

    records = []
    means = {dv: {} for dv in dvs}
    for cell in design:
        complete = _complete(cell)
        label = cell_label(cell)
        for dv in dvs:
            means[dv][label] = cell_mean(effects.get(dv, {}), complete)
        for k in range(n_per_cell):
            speaker = speakers[complete['variety']][k % speakers_per_variety]
            values = {}
            for dv in dvs:
                sd = _per_dv(noise_sd, dv)
                value = means[dv][label] + offsets[dv][speaker]
                if sd > 0:
                    value += float(rng.normal(0.0, sd))
                values[dv] = math.exp(value) if dv in log_dvs else value
            record = FeatureRecord(speaker=speaker, keyword=keyword_for(complete['segment'], complete['vowel'],
                                                                        complete['stress']),
                                   n_frames_averaged=1, **complete, **values)
            records.append(record)

    truth = {'generator': constants.RANDOM_GENERATOR, 'seed': seed, 'n_per_cell': n_per_cell,
             'noise_sd': noise_sd, 'speaker_sd': speaker_sd, 'log_dvs': list(log_dvs), 'effects': effects,
             'cell_means': means, 'speaker_offsets': offsets}
    logger.info('synthesized %d records over %d cells (seed %d)', len(records), len(design), seed)
    return records, truth


# demo tokens
VOWEL_PRESETS = {
    'a': [(800.0, 250.0), (1300.0, 150.0), (2700.0, 150.0), (3800.0, 150.0), (4700.0, 200.0)],
    'i': [(320.0, 250.0), (2200.0, 150.0), (2900.0, 150.0), (3800.0, 150.0), (4700.0, 200.0)],
}
VOWEL_TRAJECTORIES = {
    'a': [(650.0, 12.0, -0.4), None, None, None, None],
    'i': [(450.0, 8.0, -0.3), None, None, None, None],
}
SONORANT_PRESETS = {
    'l': [(350.0, 70.0), (1200.0, 100.0), (2700.0, 150.0), (3600.0, 200.0), (4500.0, 250.0)],
    'm': [(250.0, 60.0), (1100.0, 150.0), (2300.0, 200.0), (3300.0, 250.0), (4300.0, 300.0)],
    'n': [(250.0, 60.0), (1500.0, 150.0), (2500.0, 200.0), (3400.0, 250.0), (4400.0, 300.0)],
    'r': [(450.0, 100.0), (1300.0, 150.0), (1800.0, 150.0), (3300.0, 200.0), (4300.0, 250.0)],
}
SONORANT_DURATIONS_S = {'l': 0.084, 'm': 0.070, 'n': 0.065, 'r': 0.030}
VOWEL_DURATION_S = 0.150
FRICATIVE_DURATION_S = 0.060
FINAL_VOWEL_DURATION_S = 0.100
PAUSE_S = 0.050
FRICATIVE_LEVEL = 0.1
# one pitch period per default analysis hop
DEMO_F0 = 160.0
DEMO_SOURCE_TILT_HZ = constants.DEFAULT_PREEMPHASIS_HZ


class DemoToken(object):
    def __init__(self, clip: AudioClip, phones: List[Segment], words: List[Segment], truth: dict):
        self.clip = clip
        self.phones = phones
        self.words = words
        self.truth = truth


def synth_token(segment: str, vowel: str, stress: str, seed: int = 0,
                sample_rate: int = constants.EXPECTED_SAMPLE_RATE) -> DemoToken:
    """Keyword token ``<segment><vowel>sa`` framed by pauses, with phones and words tiers."""
    if segment not in SONORANT_PRESETS or vowel not in VOWEL_PRESETS:
        raise SynthError('no preset for {0}{1}'.format(segment, vowel))
    rng = make_rng(seed)
    vowel_spec = VowelSpec(DEMO_F0, VOWEL_PRESETS[vowel], VOWEL_DURATION_S, sample_rate, VOWEL_TRAJECTORIES[vowel],
                           DEMO_SOURCE_TILT_HZ)
    pieces = [
        ('', np.zeros(int(round(PAUSE_S * sample_rate)))),
        (segment, synth_vowel(VowelSpec(DEMO_F0, SONORANT_PRESETS[segment], SONORANT_DURATIONS_S[segment],
                                        sample_rate, source_tilt_hz=DEMO_SOURCE_TILT_HZ)).samples),
        (vowel, synth_vowel(vowel_spec).samples),
        ('s', FRICATIVE_LEVEL * rng.standard_normal(int(round(FRICATIVE_DURATION_S * sample_rate)))),
        ('a', synth_vowel(VowelSpec(DEMO_F0, VOWEL_PRESETS['a'], FINAL_VOWEL_DURATION_S, sample_rate,
                                   source_tilt_hz=DEMO_SOURCE_TILT_HZ)).samples),
        ('', np.zeros(int(round(PAUSE_S * sample_rate)))),
    ]
    phones = []
    cursor = 0
    for label, samples in pieces:
        phones.append(Segment(label=label, start_s=cursor / sample_rate, end_s=(cursor + samples.size) / sample_rate,
                              tier='phones'))
        cursor += samples.size
    keyword = keyword_for(segment, vowel, stress)
    words = [Segment(label='', start_s=phones[0].start_s, end_s=phones[0].end_s, tier='words'),
             Segment(label=keyword, start_s=phones[1].start_s, end_s=phones[4].end_s, tier='words'),
             Segment(label='', start_s=phones[5].start_s, end_s=phones[5].end_s, tier='words')]
    clip = AudioClip(np.concatenate([samples for _, samples in pieces]), sample_rate)

    trajectory = VOWEL_TRAJECTORIES[vowel]
    coefficients = {}
    for index in range(constants.N_FORMANTS):
        a0, a1, a2 = trajectory[index] if trajectory[index] is not None else (VOWEL_PRESETS[vowel][index][0], 0.0,
                                                                               0.0)
        coefficients.update({'f{0}_a0'.format(index + 1): a0, 'f{0}_a1'.format(index + 1): a1,
                             'f{0}_a2'.format(index + 1): a2})
    truth = {'generator': constants.RANDOM_GENERATOR, 'seed': seed, 'keyword': keyword, 'segment': segment,
             'vowel': vowel, 'stress': stress, 'sample_rate': sample_rate,
             'duration_ms': (phones[1].end_s - phones[1].start_s) * 1000.0,
             'sonorant_formants': [list(pair) for pair in SONORANT_PRESETS[segment]],
             'vowel_spec': vowel_spec.to_dict(), 'coefficients': coefficients}
    return DemoToken(clip, phones, words, truth)
