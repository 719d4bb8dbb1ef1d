import math

import numpy as np

import sonolab.constants as constants


def seconds_to_sample(time_s: float, sample_rate: int) -> int:
    return int(math.floor(time_s * sample_rate))


def ms_to_samples(duration_ms: float, sample_rate: float) -> int:
    return int(round(duration_ms * sample_rate / 1000.0))


def next_power_of_two(n: int) -> int:
    if n <= 1:
        return 1
    return 1 << (int(n) - 1).bit_length()


def format_number(value, precision=constants.PRECISION) -> str:
    if value is None:
        return constants.MISSING_VALUE
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return constants.MISSING_VALUE
    text = '{0:.{1}g}'.format(value, precision)
    return '0' if text == '-0' else text


def parse_number(text: str):
    if text == constants.MISSING_VALUE or text == '':
        return None
    return float(text)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
