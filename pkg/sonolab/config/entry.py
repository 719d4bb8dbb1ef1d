import logging
import os
from typing import Optional

import yaml
from mongoengine import EmbeddedDocument, StringField, IntField, FloatField, BooleanField, ListField, \
    EmbeddedDocumentField, ValidationError

import sonolab.constants as constants
from sonolab.classify.entry import DEFAULT_FEATURES
from sonolab.errors import ConfigError
from sonolab.stats.entry import DEFAULT_LOG_DVS, FeatureFields

logger = logging.getLogger(__name__)

SECTION_SEPARATOR = '.'


class SpectrumSettings(EmbeddedDocument):
    window_ms = FloatField(default=constants.DEFAULT_WINDOW_MS, min_value=1.0, required=True)
    overlap = FloatField(default=constants.DEFAULT_OVERLAP, min_value=0.0, max_value=0.95, required=True)
    span = ListField(FloatField(min_value=0.0, max_value=1.0), default=lambda: list(constants.DEFAULT_SPAN))
    exclude_dc = BooleanField(default=False, required=True)
    ceiling_hz = FloatField(default=0.0, min_value=0.0, required=True)
    min_samples = IntField(default=constants.MIN_SPECTRUM_SAMPLES, min_value=1, required=True)

    def clean(self):
        if len(self.span) != 2 or not self.span[0] < self.span[1]:
            raise ValidationError('spectrum.span must be [low, high] with low < high')

    def to_dict(self) -> dict:
        return {'window_ms': self.window_ms, 'overlap': self.overlap, 'span': list(self.span),
                'exclude_dc': self.exclude_dc, 'ceiling_hz': self.ceiling_hz, 'min_samples': self.min_samples}


class FormantSettings(EmbeddedDocument):
    ceiling_hz = FloatField(default=constants.DEFAULT_CEILING_HZ, min_value=1000.0, required=True)
    order = IntField(default=constants.DEFAULT_LPC_ORDER, min_value=2, required=True)
    frame_ms = FloatField(default=constants.DEFAULT_FRAME_MS, min_value=1.0, required=True)
    hop_ms = FloatField(default=constants.DEFAULT_HOP_MS, min_value=0.1, required=True)
    max_bandwidth_hz = FloatField(default=constants.DEFAULT_MAX_BANDWIDTH_HZ, min_value=1.0, required=True)
    edge_margin_hz = FloatField(default=constants.DEFAULT_EDGE_MARGIN_HZ, min_value=0.0, required=True)
    context_ms = FloatField(default=constants.DEFAULT_CONTEXT_MS, min_value=0.0, required=True)
    median_width = IntField(default=constants.DEFAULT_MEDIAN_WIDTH, min_value=1, required=True)
    max_missing_fraction = FloatField(default=constants.DEFAULT_MAX_MISSING_FRACTION, min_value=0.0, max_value=1.0,
                                      required=True)
    preemphasis_hz = FloatField(default=constants.DEFAULT_PREEMPHASIS_HZ, min_value=0.0, required=True)

    def clean(self):
        if self.median_width % 2 == 0:
            raise ValidationError('formants.median_width must be odd')

    def to_dict(self) -> dict:
        return {'ceiling_hz': self.ceiling_hz, 'order': self.order, 'frame_ms': self.frame_ms, 'hop_ms': self.hop_ms,
                'max_bandwidth_hz': self.max_bandwidth_hz, 'edge_margin_hz': self.edge_margin_hz,
                'context_ms': self.context_ms, 'median_width': self.median_width,
                'max_missing_fraction': self.max_missing_fraction, 'preemphasis_hz': self.preemphasis_hz}


class AnnotationSettings(EmbeddedDocument):
    phone_tier = StringField(default='phones', required=True)
    word_tier = StringField(default='words', required=False)
    default_stress = StringField(default=str(), required=False)

    def clean(self):
        if self.default_stress and self.default_stress not in constants.level_values(constants.AVAILABLE_STRESSES):
            raise ValidationError('annotation.default_stress must be empty or one of {0}'.format(
                constants.level_values(constants.AVAILABLE_STRESSES)))

    def to_dict(self) -> dict:
        return {'phone_tier': self.phone_tier, 'word_tier': self.word_tier, 'default_stress': self.default_stress}


class StatsSettings(EmbeddedDocument):
    log_dvs = ListField(StringField(choices=FeatureFields.NUMERIC), default=lambda: list(DEFAULT_LOG_DVS))
    log_positive_skew = BooleanField(default=False, required=True)
    center_by_speaker = BooleanField(default=False, required=True)

    def to_dict(self) -> dict:
        return {'log_dvs': list(self.log_dvs), 'log_positive_skew': self.log_positive_skew,
                'center_by_speaker': self.center_by_speaker}


class ClassifySettings(EmbeddedDocument):
    l2_lambda = FloatField(default=constants.DEFAULT_L2_LAMBDA, min_value=0.0, required=True)
    tol = FloatField(default=constants.DEFAULT_TOLERANCE, min_value=0.0, required=True)
    max_iter = IntField(default=constants.DEFAULT_MAX_ITERATIONS, min_value=1, required=True)
    folds = IntField(default=constants.DEFAULT_FOLDS, min_value=2, required=True)
    features = ListField(StringField(), default=lambda: list(DEFAULT_FEATURES))

    def clean(self):
        if not self.features:
            raise ValidationError('classify.features must name at least one feature')

    def to_dict(self) -> dict:
        return {'l2_lambda': self.l2_lambda, 'tol': self.tol, 'max_iter': self.max_iter, 'folds': self.folds,
                'features': list(self.features)}


def _coerce(field, key: str, value):
    """Integer settings take ints or integral floats only."""
    if not isinstance(field, IntField):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('{0} must be an integer, got {1!r}'.format(key, value))
    if isinstance(value, float) and not value.is_integer():
        raise ConfigError('{0} must be an integer, got {1!r}'.format(key, value))
    return int(value)


class RunConfig(EmbeddedDocument):
    SECTIONS = ('spectrum', 'formants', 'annotation', 'stats', 'classify')
    TOP_LEVEL = ('manifest', 'output_dir', 'seed')

    manifest = StringField(default=str(), required=False)
    output_dir = StringField(default='.', required=True)
    seed = IntField(default=0, min_value=0, required=True)

    spectrum = EmbeddedDocumentField(SpectrumSettings, default=SpectrumSettings)
    formants = EmbeddedDocumentField(FormantSettings, default=FormantSettings)
    annotation = EmbeddedDocumentField(AnnotationSettings, default=AnnotationSettings)
    stats = EmbeddedDocumentField(StatsSettings, default=StatsSettings)
    classify = EmbeddedDocumentField(ClassifySettings, default=ClassifySettings)

    def set(self, key: str, value):
        """Assigns a dotted key such as ``spectrum.window_ms``."""
        if SECTION_SEPARATOR not in key:
            if key not in RunConfig.TOP_LEVEL:
                raise ConfigError('unknown config key {0!r}'.format(key))
            setattr(self, key, _coerce(RunConfig._fields[key], key, value))
            return
        section_name, name = key.split(SECTION_SEPARATOR, 1)
        if section_name not in RunConfig.SECTIONS:
            raise ConfigError('unknown config section {0!r}'.format(section_name))
        section = getattr(self, section_name)
        if name not in section._fields:
            raise ConfigError('unknown config key {0!r}'.format(key))
        setattr(section, name, _coerce(section._fields[name], key, value))

    def to_dict(self) -> dict:
        result = {'manifest': self.manifest, 'output_dir': self.output_dir, 'seed': self.seed}
        for section in RunConfig.SECTIONS:
            for name, value in getattr(self, section).to_dict().items():
                result[section + SECTION_SEPARATOR + name] = value
        return result


def flatten(document: dict, prefix: str = str()) -> dict:
    """Flattens nested sections into dotted keys; flat documents pass through."""
    flat = {}
    for key, value in document.items():
        if not isinstance(key, str):
            raise ConfigError('config keys must be strings, got {0!r}'.format(key))
        dotted = prefix + SECTION_SEPARATOR + key if prefix else key
        if isinstance(value, dict):
            flat.update(flatten(value, dotted))
        else:
            flat[dotted] = value
    return flat


def config_path(path: Optional[str] = None, environ=None) -> Optional[str]:
    environ = os.environ if environ is None else environ
    return path or environ.get(constants.CONFIG_ENV_VAR) or None


def parse_override(text: str) -> tuple:
    """``key=value`` with the value read as YAML."""
    if '=' not in text:
        raise ConfigError('override {0!r} is not key=value'.format(text))
    key, raw = text.split('=', 1)
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as ex:
        raise ConfigError('override {0!r}: {1}'.format(text, ex))


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None, environ=None) -> RunConfig:
    """Defaults, then the config file, then ``overrides``."""
    config = RunConfig()
    resolved = config_path(path, environ)
    if resolved:
        try:
            with open(resolved, encoding='utf-8') as file:
                document = yaml.safe_load(file)
        except (OSError, UnicodeDecodeError) as ex:
            raise ConfigError('cannot read config {0}: {1}'.format(resolved, ex))
        except yaml.YAMLError as ex:
            raise ConfigError('config {0} is not valid YAML: {1}'.format(resolved, ex))
        if document is None:
            document = {}
        if not isinstance(document, dict):
            raise ConfigError('config {0} must be a mapping of keys to values'.format(resolved))
        for key, value in flatten(document).items():
            config.set(key, value)
        logger.info('config loaded from %s', resolved)

    for key, value in (overrides or {}).items():
        if value is not None:
            config.set(key, value)

    try:
        config.validate()
        for section in RunConfig.SECTIONS:
            getattr(config, section).validate()
    except ValidationError as ex:
        raise ConfigError('invalid config: {0}'.format(ex))
    return config
