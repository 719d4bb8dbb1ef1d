import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from mongoengine import EmbeddedDocument, StringField, FloatField, IntField, ValidationError
from scipy import stats as distributions
from scipy.linalg import solve_triangular

import sonolab.constants as constants
from sonolab.errors import NonPositiveValue, EmptyInput, InsufficientData, RankDeficientDesign, StatsError
from sonolab.utils.utils import format_number

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10
CONFIDENCE_LEVEL = 0.95
EN_DASH = '–'
RANDOM_EFFECTS_NOTE = 'fixed effects only: speaker and keyword random effects are not estimated (OLS, residual df)'


class FeatureFields:
    SPEAKER_FIELD = 'speaker'
    KEYWORD_FIELD = 'keyword'
    VARIETY_FIELD = 'variety'
    STRESS_FIELD = 'stress'
    SEGMENT_FIELD = 'segment'
    VOWEL_FIELD = 'vowel'
    DURATION_FIELD = 'duration_ms'
    M1_FIELD = 'm1_cog_hz'
    M2_FIELD = 'm2_sd_hz'
    M3_FIELD = 'm3_skew'
    M4_FIELD = 'm4_kurt'
    N_FRAMES_FIELD = 'n_frames_averaged'

    FACTORS = (SPEAKER_FIELD, KEYWORD_FIELD, VARIETY_FIELD, STRESS_FIELD, SEGMENT_FIELD, VOWEL_FIELD)
    MOMENTS = (DURATION_FIELD, M1_FIELD, M2_FIELD, M3_FIELD, M4_FIELD)
    COEFFICIENTS = tuple('f{0}_a{1}'.format(formant, power) for formant in range(1, 5) for power in range(3))
    RMSES = tuple('f{0}_rmse'.format(formant) for formant in range(1, 5))
    NUMERIC = MOMENTS + COEFFICIENTS + RMSES
    COLUMNS = FACTORS + MOMENTS + COEFFICIENTS + RMSES + (N_FRAMES_FIELD,)


DEFAULT_LOG_DVS = (FeatureFields.DURATION_FIELD, FeatureFields.M1_FIELD, FeatureFields.M2_FIELD)
SONORANT_DVS = FeatureFields.MOMENTS
CONTOUR_DVS = FeatureFields.COEFFICIENTS


class FeatureRecord(EmbeddedDocument):
    """One analyzed sonorant + vowel token."""

    meta = {'allow_inheritance': False}

    speaker = StringField(required=True)
    keyword = StringField(default=str())
    variety = StringField(choices=constants.AVAILABLE_VARIETIES, required=True)
    stress = StringField(choices=constants.AVAILABLE_STRESSES, required=True)
    segment = StringField(choices=constants.AVAILABLE_SONORANTS, required=True)
    vowel = StringField(choices=constants.AVAILABLE_VOWELS, required=True)

    duration_ms = FloatField(required=True)
    m1_cog_hz = FloatField(required=True)
    m2_sd_hz = FloatField(min_value=0.0, required=True)
    m3_skew = FloatField(required=True)
    m4_kurt = FloatField(required=True)

    f1_a0 = FloatField(required=True)
    f1_a1 = FloatField(required=True)
    f1_a2 = FloatField(required=True)
    f2_a0 = FloatField(required=True)
    f2_a1 = FloatField(required=True)
    f2_a2 = FloatField(required=True)
    f3_a0 = FloatField(required=True)
    f3_a1 = FloatField(required=True)
    f3_a2 = FloatField(required=True)
    f4_a0 = FloatField(required=True)
    f4_a1 = FloatField(required=True)
    f4_a2 = FloatField(required=True)

    f1_rmse = FloatField(default=0.0, min_value=0.0)
    f2_rmse = FloatField(default=0.0, min_value=0.0)
    f3_rmse = FloatField(default=0.0, min_value=0.0)
    f4_rmse = FloatField(default=0.0, min_value=0.0)

    n_frames_averaged = IntField(default=1, min_value=0)

    def clean(self):
        for name in FeatureFields.NUMERIC:
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValidationError('{0} must be finite'.format(name))
        if self.duration_ms is not None and self.duration_ms <= 0:
            raise ValidationError('duration_ms must be positive')

    def value(self, field: str):
        return getattr(self, field)

    def cell(self, factors: Sequence[str]) -> tuple:
        return tuple(getattr(self, factor) for factor in factors)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FeatureFields.COLUMNS}


def log_transform(value):
    """Natural logarithm; every value must be positive."""
    array = np.asarray(value, dtype=np.float64)
    if np.any(~(array > 0)):
        raise NonPositiveValue('logarithm needs positive values, got {0}'.format(value))
    result = np.log(array)
    return float(result) if result.ndim == 0 else result


def dv_values(records: Sequence[FeatureRecord], dv: str, log_scale: bool) -> tuple:
    """DV per record; non-positive records are excluded from log-scale DVs."""
    raw = np.array([record.value(dv) for record in records], dtype=np.float64)
    if not log_scale:
        return raw, list(records)
    keep = raw > 0
    if not np.all(keep):
        logger.warning('%s: %d non-positive value(s) excluded from the log scale', dv, int(np.sum(~keep)))
    kept = [record for record, flag in zip(records, keep) if flag]
    return log_transform(raw[keep]) if kept else np.array([]), kept


def is_log_dv(dv: str, log_dvs=DEFAULT_LOG_DVS, log_positive_skew=False) -> bool:
    if dv in log_dvs:
        return True
    return log_positive_skew and dv in (FeatureFields.M3_FIELD, FeatureFields.M4_FIELD)


def center_by_speaker(values: np.ndarray, speakers: Sequence[str]) -> np.ndarray:
    """Removes each speaker's mean and restores the grand mean."""
    values = np.asarray(values, dtype=np.float64)
    speakers = np.asarray(speakers)
    centered = values.copy()
    for speaker in np.unique(speakers):
        mask = speakers == speaker
        centered[mask] -= values[mask].mean()
    return centered + values.mean()


class CellSummary(object):
    def __init__(self, key: tuple, n: int, means: Dict[str, float], sds: Dict[str, Optional[float]]):
        self.key = key
        self.n = n
        self.means = means
        self.sds = sds

    def mean(self, dv: str) -> float:
        return self.means[dv]

    def sd(self, dv: str) -> Optional[float]:
        return self.sds[dv]


def _group(records, factors) -> Dict[tuple, list]:
    groups = {}
    for record in records:
        groups.setdefault(record.cell(factors), []).append(record)
    return groups


def summarize(records: Sequence[FeatureRecord], by=constants.SONORANT_FACTORS, dvs=SONORANT_DVS) -> List[CellSummary]:
    if not records:
        raise EmptyInput('no records to summarize')
    summaries = []
    groups = _group(records, by)
    for key in sorted(groups):
        members = groups[key]
        means = {}
        sds = {}
        for dv in dvs:
            values = np.array([record.value(dv) for record in members], dtype=np.float64)
            means[dv] = float(values.mean())
            sds[dv] = float(values.std(ddof=1)) if values.size >= 2 else None
        summaries.append(CellSummary(key, len(members), means, sds))
    return summaries


class CellInterval(object):
    def __init__(self, key: tuple, n: int, mean: float, low: Optional[float], high: Optional[float]):
        self.key = key
        self.n = n
        self.mean = mean
        self.low = low
        self.high = high


def cell_confidence(records: Sequence[FeatureRecord], dv: str, by=constants.SONORANT_FACTORS,
                    level=CONFIDENCE_LEVEL) -> List[CellInterval]:
    """Per-cell mean with a t-based confidence interval."""
    if not records:
        raise EmptyInput('no records')
    intervals = []
    groups = _group(records, by)
    for key in sorted(groups):
        values = np.array([record.value(dv) for record in groups[key]], dtype=np.float64)
        mean = float(values.mean())
        if values.size < 2:
            intervals.append(CellInterval(key, values.size, mean, None, None))
            continue
        half = distributions.t.ppf(0.5 + level / 2.0, values.size - 1) * values.std(ddof=1) / math.sqrt(values.size)
        intervals.append(CellInterval(key, values.size, mean, mean - half, mean + half))
    return intervals


class ModelFit(object):
    COLUMNS = ('term', 'Estimate', 'SE', 'df', 't value', 'Pr(t)')

    def __init__(self, dv: str, terms: List[str], estimates, standard_errors, t_values, p_values, df: int,
                 reference: Dict[str, str], residual_sd: float, n: int, fitted, log_scale: bool, factors):
        self.dv = dv
        self.terms = terms
        self.estimates = np.asarray(estimates)
        self.standard_errors = np.asarray(standard_errors)
        self.t_values = np.asarray(t_values)
        self.p_values = np.asarray(p_values)
        self.df = df
        self.reference = reference
        self.residual_sd = residual_sd
        self.n = n
        self.fitted = np.asarray(fitted)
        self.log_scale = log_scale
        self.factors = tuple(factors)

    def estimate(self, term: str) -> float:
        return float(self.estimates[self.terms.index(term)])

    def standard_error(self, term: str) -> float:
        return float(self.standard_errors[self.terms.index(term)])

    def rows(self) -> list:
        return [(term, self.estimates[i], self.standard_errors[i], self.df, self.t_values[i], self.p_values[i])
                for i, term in enumerate(self.terms)]


INTERCEPT = 'Intercept'


def factor_levels(records, factors, reference=None) -> Dict[str, list]:
    reference = dict(constants.REFERENCE_LEVELS, **(reference or {}))
    levels = {}
    for factor in factors:
        observed = sorted({getattr(record, factor) for record in records})
        if len(observed) < 2:
            raise InsufficientData('factor {0!r} has {1} observed level(s), need 2'.format(factor, len(observed)))
        base = reference.get(factor)
        if base in observed:
            observed.remove(base)
            observed.insert(0, base)
        levels[factor] = observed
    return levels


def treatment_design(records, factors, levels) -> tuple:
    """Treatment-coded design with every interaction; columns ordered by interaction size."""
    terms = [INTERCEPT]
    columns = [np.ones(len(records))]
    indicators = {factor: {level: np.array([getattr(record, factor) == level for record in records], dtype=float)
                           for level in levels[factor][1:]} for factor in factors}
    for size in range(1, len(factors) + 1):
        for subset in itertools.combinations(factors, size):
            for combination in itertools.product(*[levels[factor][1:] for factor in subset]):
                column = np.ones(len(records))
                for factor, level in zip(subset, combination):
                    column = column * indicators[factor][level]
                terms.append(':'.join(combination))
                columns.append(column)
    return terms, np.column_stack(columns)


def fit_factorial(records: Sequence[FeatureRecord], dv: str, factors=constants.SONORANT_FACTORS, reference=None,
                  log_scale: Optional[bool] = None, speaker_centered=False) -> ModelFit:
    """OLS on the full factorial treatment-coded design (fixed effects only)."""
    if log_scale is None:
        log_scale = is_log_dv(dv)
    y, kept = dv_values(records, dv, log_scale)
    if not kept:
        raise InsufficientData('no usable values for {0}'.format(dv))
    if speaker_centered:
        y = center_by_speaker(y, [record.speaker for record in kept])

    levels = factor_levels(kept, factors, reference)
    terms, x = treatment_design(kept, factors, levels)
    n, p = x.shape
    if n <= p:
        raise InsufficientData('{0} observations for {1} parameters'.format(n, p))

    q, r = np.linalg.qr(x)
    diagonal = np.abs(np.diag(r))
    aliased = [term for term, value in zip(terms, diagonal) if value <= RANK_TOLERANCE * diagonal.max()]
    if aliased:
        raise RankDeficientDesign(aliased)

    beta = solve_triangular(r, q.T @ y)
    fitted = x @ beta
    residuals = y - fitted
    df = n - p
    sigma2 = float(np.dot(residuals, residuals)) / df
    r_inverse = solve_triangular(r, np.eye(p))
    standard_errors = np.sqrt(sigma2 * np.sum(r_inverse ** 2, axis=1))
    with np.errstate(divide='ignore', invalid='ignore'):
        t_values = beta / standard_errors
    p_values = 2.0 * distributions.t.sf(np.abs(t_values), df)
    logger.info('%s ~ %s: n=%d, %d terms, residual sd %.4g', dv, ' x '.join(factors), n, p, math.sqrt(sigma2))
    return ModelFit(dv, terms, beta, standard_errors, t_values, p_values, df,
                    {factor: levels[factor][0] for factor in factors}, math.sqrt(sigma2), n, fitted, log_scale,
                    factors)


def holm(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=np.float64)
    adjusted = np.empty_like(p)
    running = 0.0
    m = p.size
    for rank, index in enumerate(np.argsort(p, kind='mergesort')):
        running = max(running, min(1.0, (m - rank) * p[index]))
        adjusted[index] = running
    return adjusted


def welch_t(a, b) -> tuple:
    """``(estimate, df, t, p)`` of the two-sided Welch test of mean(a) - mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InsufficientData('Welch test needs two observations per cell, got {0} and {1}'.format(a.size, b.size))
    estimate = float(a.mean() - b.mean())
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0:
        df = float(a.size + b.size - 2)
        if estimate == 0:
            return estimate, df, 0.0, 1.0
        return estimate, df, math.copysign(math.inf, estimate), 0.0
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    t = estimate / math.sqrt(se2)
    return estimate, float(df), t, float(2.0 * distributions.t.sf(abs(t), df))


def contrast_label(left: tuple, right: tuple) -> str:
    return '{0} [{1}] {2} {3} [{4}]'.format(left[0], left[1], EN_DASH, right[0], right[1])


class ContrastRow(object):
    COLUMNS = ('contrast', 'estimate', 'df', 't', 'p')

    def __init__(self, family: str, contrast: str, estimate=None, df=None, t=None, p_raw=None, p=None,
                 reason: str = str()):
        self.family = family
        self.contrast = contrast
        self.estimate = estimate
        self.df = df
        self.t = t
        self.p_raw = p_raw
        self.p = p
        self.reason = reason

    def row(self) -> tuple:
        return self.contrast, self.estimate, self.df, self.t, self.p


def pairwise_contrasts(records: Sequence[FeatureRecord], dv: str, stress: str, log_scale: Optional[bool] = None,
                       varieties=None, segments=None) -> List[ContrastRow]:
    """Segment pairs within each variety and variety pairs within each segment, Holm-adjusted per family."""
    if log_scale is None:
        log_scale = is_log_dv(dv)
    stratum = [record for record in records if record.stress == stress]
    if not stratum:
        raise EmptyInput('no {0} records'.format(stress))
    values, kept = dv_values(stratum, dv, log_scale)
    cells = {}
    for value, record in zip(values, kept):
        cells.setdefault((record.variety, record.segment), []).append(value)
    varieties = varieties or constants.level_values(constants.AVAILABLE_VARIETIES)
    segments = segments or constants.SONORANTS

    families = []
    for variety in varieties:
        families.append(('segment within {0}'.format(variety),
                         [((variety, left), (variety, right)) for left, right in itertools.combinations(segments, 2)]))
    families.append(('variety within segment',
                     [((left, segment), (right, segment)) for segment in segments
                      for left, right in itertools.combinations(varieties, 2)]))

    table = []
    for family, pairs in families:
        rows = []
        for left, right in pairs:
            label = contrast_label(left, right)
            try:
                estimate, df, t, p = welch_t(cells.get(left, []), cells.get(right, []))
            except InsufficientData as ex:
                rows.append(ContrastRow(family, label, reason=str(ex)))
                continue
            rows.append(ContrastRow(family, label, estimate, df, t, p))
        tested = [row for row in rows if row.p_raw is not None]
        for row, adjusted in zip(tested, holm([row.p_raw for row in tested])):
            row.p = float(adjusted)
        table.extend(rows)
    return table


def render_table(columns: Sequence[str], rows: Sequence[Sequence], title: str = str(), note: str = str()) -> str:
    """Aligned plain-text table."""
    cells = [[value if isinstance(value, str) else format_number(value) for value in row] for row in rows]
    widths = [max([len(column)] + [len(row[i]) for row in cells]) for i, column in enumerate(columns)]
    lines = []
    if title:
        lines.append(title)
    if note:
        lines.append('# ' + note)
    lines.append('  '.join(column.ljust(width) for column, width in zip(columns, widths)).rstrip())
    for row in cells:
        lines.append('  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip())
    return '\n'.join(lines) + '\n'


def check_factor_value(factor: str, value: str):
    if value not in constants.FACTOR_LEVELS.get(factor, (value,)):
        raise StatsError('unknown level {0!r} for factor {1!r}'.format(value, factor))
