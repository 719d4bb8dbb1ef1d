import math

import numpy as np
from mongoengine import EmbeddedDocument, StringField, FloatField, ValidationError

from sonolab.errors import AnnotationError
from sonolab.utils.utils import seconds_to_sample


class SegmentFields:
    LABEL_FIELD = 'label'
    START_FIELD = 'start_s'
    END_FIELD = 'end_s'
    TIER_FIELD = 'tier'


class Segment(EmbeddedDocument):
    """A labeled time interval of a recording."""

    DEFAULT_TIER = 'phones'

    meta = {'allow_inheritance': False}

    label = StringField(default=str(), required=False)
    start_s = FloatField(min_value=0.0, required=True)
    end_s = FloatField(min_value=0.0, required=True)
    tier = StringField(default=DEFAULT_TIER, required=True)

    def clean(self):
        if not math.isfinite(self.start_s) or not math.isfinite(self.end_s):
            raise ValidationError('segment bounds must be finite')
        if self.end_s <= self.start_s:
            raise ValidationError('segment end {0} not after start {1}'.format(self.end_s, self.start_s))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def midpoint_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)

    def contains(self, time_s: float) -> bool:
        return self.start_s <= time_s <= self.end_s

    def to_dict(self) -> dict:
        return {SegmentFields.TIER_FIELD: self.tier, SegmentFields.LABEL_FIELD: self.label,
                SegmentFields.START_FIELD: self.start_s, SegmentFields.END_FIELD: self.end_s}

    def __str__(self):
        return '{0}[{1}]({2:.6g}-{3:.6g})'.format(self.tier, self.label, self.start_s, self.end_s)


class AudioClip(object):
    """Mono samples in [-1, 1] at an integer rate."""

    def __init__(self, samples, sample_rate: int):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise AnnotationError('audio clip needs a non-empty mono sample sequence')
        if int(sample_rate) <= 0:
            raise AnnotationError('sample rate must be positive, got {0}'.format(sample_rate))
        self._samples = samples
        self._sample_rate = int(sample_rate)

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def sample_rate(self) -> int:
        return self._sample_rate

    @property
    def duration_s(self) -> float:
        return self._samples.size / self._sample_rate

    def sample_range(self, start_s: float, end_s: float) -> tuple:
        start = min(max(seconds_to_sample(start_s, self._sample_rate), 0), self._samples.size)
        end = min(max(seconds_to_sample(end_s, self._sample_rate), start), self._samples.size)
        return start, end

    def slice(self, segment: Segment) -> np.ndarray:
        start, end = self.sample_range(segment.start_s, segment.end_s)
        return self._samples[start:end]

    def scaled(self, factor: float) -> 'AudioClip':
        return AudioClip(self._samples * factor, self._sample_rate)

    def reversed(self) -> 'AudioClip':
        return AudioClip(self._samples[::-1].copy(), self._sample_rate)

    def __len__(self):
        return self._samples.size
