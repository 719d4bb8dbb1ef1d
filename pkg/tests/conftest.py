import numpy as np
import pytest

import sonolab.constants as constants
from sonolab.common_entries import AudioClip
from sonolab.stats.entry import FeatureRecord, FeatureFields

BASE_VALUES = {
    FeatureFields.DURATION_FIELD: 80.0,
    FeatureFields.M1_FIELD: 800.0,
    FeatureFields.M2_FIELD: 600.0,
    FeatureFields.M3_FIELD: 2.0,
    FeatureFields.M4_FIELD: 10.0,
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def make_record():
    def factory(**overrides) -> FeatureRecord:
        values = {'speaker': 'AG01', 'keyword': "'lasa", 'variety': constants.AG, 'stress': constants.STRESSED,
                  'segment': 'l', 'vowel': 'a', 'n_frames_averaged': 3}
        values.update(BASE_VALUES)
        for name in FeatureFields.COEFFICIENTS:
            values[name] = 1.0
        for name in FeatureFields.RMSES:
            values[name] = 0.5
        values.update(overrides)
        return FeatureRecord(**values)

    return factory


@pytest.fixture
def sine_clip():
    def factory(frequency: float, duration_s: float, sample_rate: int = constants.EXPECTED_SAMPLE_RATE,
                amplitude: float = 0.5) -> AudioClip:
        n = np.arange(int(round(duration_s * sample_rate)))
        return AudioClip(amplitude * np.sin(2.0 * np.pi * frequency * n / sample_rate), sample_rate)

    return factory
