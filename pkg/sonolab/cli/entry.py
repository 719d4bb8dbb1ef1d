import argparse
import logging
import os
import re
import sys
from typing import List, Optional

import pandas as pd
import yaml
from mongoengine import EmbeddedDocument, StringField, ValidationError

import sonolab.constants as constants
from sonolab.__version__ import __version__
from sonolab.annotation.entry import read_wav, read_annotations, write_wav, pair_tokens, format_tsv_annotations, \
    TokenMetadata, TokenPair
from sonolab.classify.entry import cross_validate, train
from sonolab.common_entries import AudioClip
from sonolab.config.entry import load_config, parse_override, RunConfig
from sonolab.contour.entry import fit_track
from sonolab.errors import SonolabError, AnnotationError, AnalysisError, ConfigError, SchemaError, StatsError, \
    ClassifierError, EmptyInput
from sonolab.formants.entry import track
from sonolab.spectrum.entry import analyze_sonorant
from sonolab.stats.entry import FeatureRecord, FeatureFields, ModelFit, ContrastRow, summarize, fit_factorial, \
    pairwise_contrasts, cell_confidence, is_log_dv, render_table, RANDOM_EFFECTS_NOTE
from sonolab.synthkit.entry import synth_token
from sonolab.utils.utils import format_number, parse_number

logger = logging.getLogger(__name__)

FEATURES_FILE = 'features.csv'
REPORT_FILE = 'run_report.yaml'
MANIFEST_FILE = 'manifest.tsv'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
LINE_RE = re.compile(r'line (\d+)')
SYNTH_SPEAKER = 'SYN01'


class ManifestFields:
    WAV_FIELD = 'wav'
    ANNOTATION_FIELD = 'annotation'
    SPEAKER_FIELD = 'speaker'
    VARIETY_FIELD = 'variety'
    NOTES_FIELD = 'notes'

    REQUIRED = (WAV_FIELD, ANNOTATION_FIELD, SPEAKER_FIELD, VARIETY_FIELD)
    COLUMNS = REQUIRED + (NOTES_FIELD,)


class ManifestEntry(EmbeddedDocument):
    wav = StringField(required=True)
    annotation = StringField(required=True)
    speaker = StringField(required=True)
    variety = StringField(choices=constants.AVAILABLE_VARIETIES, required=True)
    notes = StringField(default=str())

    def clean(self):
        for name in ManifestFields.REQUIRED:
            if not getattr(self, name):
                raise ValidationError('{0} must not be empty'.format(name))

    def to_dict(self) -> dict:
        return {ManifestFields.WAV_FIELD: self.wav, ManifestFields.ANNOTATION_FIELD: self.annotation,
                ManifestFields.SPEAKER_FIELD: self.speaker, ManifestFields.VARIETY_FIELD: self.variety,
                ManifestFields.NOTES_FIELD: self.notes}


class EntryReport(object):
    def __init__(self, entry: ManifestEntry, status: constants.EntryStatus, rows: int = 0, reason: str = str(),
                 skipped: Optional[List[str]] = None):
        self.entry = entry
        self.status = status
        self.rows = rows
        self.reason = reason
        self.skipped = skipped or []

    def to_dict(self) -> dict:
        result = {'wav': self.entry.wav, 'annotation': self.entry.annotation, 'speaker': self.entry.speaker,
                  'status': str(self.status), 'rows': self.rows}
        if self.reason:
            result['reason'] = self.reason
        if self.skipped:
            result['skipped_tokens'] = list(self.skipped)
        return result


# schemas
def _schema_frame(path: str, sep: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, na_filter=False)
    except pd.errors.EmptyDataError:
        raise SchemaError('{0}: no header'.format(path))
    except pd.errors.ParserError as ex:
        match = LINE_RE.search(str(ex))
        raise SchemaError('{0}: {1}'.format(path, ex), int(match.group(1)) - 1 if match else 0)
    except (OSError, UnicodeDecodeError) as ex:
        raise SchemaError('{0}: {1}'.format(path, ex))


def read_manifest(path: str) -> List[ManifestEntry]:
    """Tab-separated manifest; relative paths resolve against the manifest's directory."""
    frame = _schema_frame(path, '\t')
    columns = tuple(frame.columns)
    if columns[:len(ManifestFields.REQUIRED)] != ManifestFields.REQUIRED:
        raise SchemaError('{0}: header must start with {1}'.format(path, '\t'.join(ManifestFields.REQUIRED)))
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for row_number, row in enumerate(frame.to_dict('records'), start=1):
        values = {name: row.get(name, str()) for name in ManifestFields.COLUMNS}
        if any(not isinstance(value, str) for value in values.values()):
            raise SchemaError('{0}: missing column'.format(path), row_number)
        for name in (ManifestFields.WAV_FIELD, ManifestFields.ANNOTATION_FIELD):
            if values[name] and not os.path.isabs(values[name]):
                values[name] = os.path.join(base, values[name])
        entry = ManifestEntry(**values)
        try:
            entry.validate()
        except ValidationError as ex:
            raise SchemaError('{0}: {1}'.format(path, ex), row_number)
        entries.append(entry)
    return entries


def write_manifest(path: str, entries: List[ManifestEntry]):
    frame = pd.DataFrame([[entry.to_dict()[name] for name in ManifestFields.COLUMNS] for entry in entries],
                         columns=list(ManifestFields.COLUMNS))
    frame.to_csv(path, sep='\t', index=False, lineterminator='\n')


def _format_field(record: FeatureRecord, name: str) -> str:
    value = getattr(record, name)
    if name in FeatureFields.FACTORS:
        return value or str()
    return format_number(value)


def write_features(path: str, records: List[FeatureRecord]):
    frame = pd.DataFrame([[_format_field(record, name) for name in FeatureFields.COLUMNS] for record in records],
                         columns=list(FeatureFields.COLUMNS))
    frame.to_csv(path, index=False, lineterminator='\n')


def read_features(path: str) -> List[FeatureRecord]:
    frame = _schema_frame(path, ',')
    if tuple(frame.columns) != FeatureFields.COLUMNS:
        raise SchemaError('{0}: header does not match the feature schema'.format(path))
    records = []
    for row_number, row in enumerate(frame.itertuples(index=False, name=None), start=1):
        values = {}
        for name, text in zip(FeatureFields.COLUMNS, row):
            if not isinstance(text, str):
                raise SchemaError('{0}: missing {1}'.format(path, name), row_number)
            if name in FeatureFields.FACTORS:
                values[name] = text
                continue
            try:
                number = parse_number(text)
            except ValueError:
                raise SchemaError('{0}: {1} is not a number: {2!r}'.format(path, name, text), row_number)
            if number is None:
                raise SchemaError('{0}: {1} is missing'.format(path, name), row_number)
            if name == FeatureFields.N_FRAMES_FIELD:
                if number != int(number):
                    raise SchemaError('{0}: {1} must be an integer'.format(path, name), row_number)
                number = int(number)
            values[name] = number
        record = FeatureRecord(**values)
        try:
            record.validate()
        except ValidationError as ex:
            raise SchemaError('{0}: {1}'.format(path, ex), row_number)
        records.append(record)
    return records


def _write_text(path: Optional[str], text: str):
    if path:
        with open(path, 'w', encoding='utf-8', newline='\n') as file:
            file.write(text)
    else:
        sys.stdout.write(text)


def _write_yaml(path: Optional[str], document: dict):
    _write_text(path, yaml.safe_dump(document, sort_keys=False, default_flow_style=False, allow_unicode=True))


# analyze
def analyze_token(clip: AudioClip, pair: TokenPair, config: RunConfig) -> FeatureRecord:
    if pair.vowel.end_s > clip.duration_s + 1.0 / clip.sample_rate:
        raise AnalysisError('{0} extends beyond the audio ({1:.6g} s)'.format(pair.vowel, clip.duration_s))
    s = config.spectrum
    moments, spectrum = analyze_sonorant(clip, pair.sonorant, s.window_ms, s.overlap, tuple(s.span), s.exclude_dc,
                                         s.ceiling_hz, s.min_samples)
    f = config.formants
    formant_track = track(clip, pair.vowel, f.ceiling_hz, f.order, f.frame_ms, f.hop_ms, f.max_bandwidth_hz,
                          f.edge_margin_hz, f.context_ms, f.median_width, f.max_missing_fraction, f.preemphasis_hz)
    coefficients = {}
    for coeffs in fit_track(formant_track):
        coefficients.update(coeffs.to_dict())
    record = FeatureRecord(speaker=pair.speaker, keyword=pair.keyword, variety=pair.variety, stress=pair.stress,
                           segment=pair.sonorant.label, vowel=pair.vowel.label, duration_ms=moments.duration_ms,
                           m1_cog_hz=moments.m1_cog, m2_sd_hz=moments.m2_sd, m3_skew=moments.m3_skewness,
                           m4_kurt=moments.m4_kurtosis, n_frames_averaged=spectrum.n_frames_averaged, **coefficients)
    try:
        record.validate()
    except ValidationError as ex:
        raise AnalysisError('{0}: invalid feature record: {1}'.format(pair.sonorant, ex))
    return record


def analyze_entry(entry: ManifestEntry, config: RunConfig) -> tuple:
    """``(records, EntryReport)``; failures are isolated to the entry."""
    try:
        clip = read_wav(entry.wav)
        tiers = dict(read_annotations(entry.annotation))
        if config.annotation.phone_tier not in tiers:
            raise AnnotationError('{0}: no tier named {1!r}'.format(entry.annotation, config.annotation.phone_tier))
        metadata = TokenMetadata(entry.speaker, entry.variety, config.annotation.default_stress or None)
        words = tiers.get(config.annotation.word_tier) if config.annotation.word_tier else None
        pairs, skipped = pair_tokens(tiers[config.annotation.phone_tier], metadata, words)
    except (SonolabError, OSError) as ex:
        logger.warning('%s failed: %s', entry.wav, ex)
        return [], EntryReport(entry, constants.EntryStatus.FAILED, reason=str(ex))

    reasons = [str(skip) for skip in skipped]
    records = []
    for pair in pairs:
        try:
            records.append(analyze_token(clip, pair, config))
        except (AnalysisError, StatsError) as ex:
            logger.warning('%s: token %s skipped: %s', entry.wav, pair.sonorant, ex)
            reasons.append('{0}: {1}'.format(pair.sonorant, ex))
    if records:
        return records, EntryReport(entry, constants.EntryStatus.ANALYZED, len(records), skipped=reasons)
    return records, EntryReport(entry, constants.EntryStatus.SKIPPED, reason='no analyzable tokens',
                                skipped=reasons)


def cmd_analyze(args, config: RunConfig) -> int:
    if not config.manifest:
        raise ConfigError('analyze needs a manifest (--manifest or the manifest config key)')
    entries = read_manifest(config.manifest)
    os.makedirs(config.output_dir, exist_ok=True)

    records = []
    reports = []
    for entry in entries:
        entry_records, report = analyze_entry(entry, config)
        records.extend(entry_records)
        reports.append(report)

    write_features(os.path.join(config.output_dir, FEATURES_FILE), records)
    failed = sum(report.status == constants.EntryStatus.FAILED for report in reports)
    code = constants.ExitCode.SUCCESS if records and not failed else constants.ExitCode.PARTIAL
    counts = {str(status): sum(report.status == status for report in reports) for status in constants.EntryStatus}
    _write_yaml(os.path.join(config.output_dir, REPORT_FILE),
                {'sonolab': __version__, 'manifest': config.manifest, 'rows': len(records), 'entries_total': len(entries),
                 'counts': counts, 'exit_code': int(code), 'config': config.to_dict(),
                 'entries': [report.to_dict() for report in reports]})
    logger.info('%d rows from %d manifest entries (%d failed)', len(records), len(entries), failed)
    return int(code)


# tables
def _log_dv(dv: str, config: RunConfig) -> bool:
    return is_log_dv(dv, config.stats.log_dvs, config.stats.log_positive_skew)


def _load_records(args) -> List[FeatureRecord]:
    records = read_features(args.features)
    if not records:
        raise EmptyInput('{0} has no rows'.format(args.features))
    return records


def summary_table(records, by, dvs) -> str:
    columns = list(by) + ['n']
    for dv in dvs:
        columns.extend([dv + ' M', dv + ' SD'])
    rows = []
    for cell in summarize(records, by, dvs):
        row = list(cell.key) + [cell.n]
        for dv in dvs:
            row.extend([cell.mean(dv), cell.sd(dv)])
        rows.append(row)
    return render_table(columns, rows)


def write_plot_data(directory: str, records, config: RunConfig):
    os.makedirs(directory, exist_ok=True)
    plans = [(dv, constants.SONORANT_FACTORS) for dv in FeatureFields.MOMENTS] + \
            [(dv, constants.VOWEL_FACTORS) for dv in FeatureFields.COEFFICIENTS]
    for dv, by in plans:
        rows = [list(interval.key) + [interval.n, format_number(interval.mean), format_number(interval.low),
                                      format_number(interval.high)]
                for interval in cell_confidence(records, dv, by)]
        frame = pd.DataFrame(rows, columns=list(by) + ['n', 'mean', 'ci_low', 'ci_high'])
        frame.to_csv(os.path.join(directory, 'plot_{0}.csv'.format(dv)), index=False, lineterminator='\n')
    logger.info('plot data written to %s', directory)


def cmd_summarize(args, config: RunConfig) -> int:
    records = _load_records(args)
    text = '# sonorants by variety, segment and stress\n'
    text += summary_table(records, ('variety', 'segment', 'stress'), FeatureFields.MOMENTS)
    text += '\n# vowel contour coefficients by variety, segment, stress and vowel\n'
    text += summary_table(records, ('variety', 'segment', 'stress', 'vowel'), FeatureFields.COEFFICIENTS)
    _write_text(args.output, text)
    if args.emit_plot_data:
        write_plot_data(args.emit_plot_data, records, config)
    return int(constants.ExitCode.SUCCESS)


def _model_factors(dv: str) -> tuple:
    return constants.VOWEL_FACTORS if dv in FeatureFields.COEFFICIENTS else constants.SONORANT_FACTORS


def cmd_model(args, config: RunConfig) -> int:
    records = _load_records(args)
    dvs = args.dv or list(FeatureFields.MOMENTS + FeatureFields.COEFFICIENTS)
    blocks = []
    csv_rows = []
    code = constants.ExitCode.SUCCESS
    for dv in dvs:
        if dv not in FeatureFields.NUMERIC:
            raise ConfigError('unknown dependent variable {0!r}'.format(dv))
        factors = _model_factors(dv)
        title = '{0} ~ {1}{2}'.format(dv, ' x '.join(factors), ' (log scale)' if _log_dv(dv, config) else str())
        try:
            fit = fit_factorial(records, dv, factors, log_scale=_log_dv(dv, config),
                                speaker_centered=config.stats.center_by_speaker)
        except StatsError as ex:
            logger.warning('%s: %s', dv, ex)
            blocks.append('{0}\n# not estimated: {1}\n'.format(title, ex))
            code = constants.ExitCode.PARTIAL
            continue
        blocks.append(render_table(ModelFit.COLUMNS, fit.rows(), title=title, note=RANDOM_EFFECTS_NOTE))
        csv_rows.extend([[dv] + [value if isinstance(value, str) else format_number(value) for value in row]
                         for row in fit.rows()])
    _write_text(args.output, '\n'.join(blocks))
    if args.csv:
        pd.DataFrame(csv_rows, columns=['dv'] + list(ModelFit.COLUMNS)).to_csv(args.csv, index=False,
                                                                             lineterminator='\n')
    return int(code)


def cmd_contrasts(args, config: RunConfig) -> int:
    records = _load_records(args)
    dvs = args.dv or list(FeatureFields.MOMENTS)
    blocks = []
    for dv in dvs:
        if dv not in FeatureFields.NUMERIC:
            raise ConfigError('unknown dependent variable {0!r}'.format(dv))
        for stress in constants.level_values(constants.AVAILABLE_STRESSES):
            try:
                table = pairwise_contrasts(records, dv, stress, log_scale=_log_dv(dv, config))
            except StatsError as ex:
                logger.warning('%s, %s: %s', dv, stress, ex)
                blocks.append('{0}, {1}\n# not computed: {2}\n'.format(dv, stress, ex))
                continue
            families = []
            for row in table:
                if row.family not in families:
                    families.append(row.family)
            for family in families:
                rows = [row.row() for row in table if row.family == family]
                blocks.append(render_table(ContrastRow.COLUMNS, rows,
                                           title='{0}, {1}, {2} (Welch t, Holm-adjusted p)'.format(dv, stress,
                                                                                                  family)))
    _write_text(args.output, '\n'.join(blocks))
    return int(constants.ExitCode.SUCCESS)


def cmd_classify(args, config: RunConfig) -> int:
    records = _load_records(args)
    c = config.classify
    try:
        result = cross_validate(records, c.folds, config.seed, c.features, c.l2_lambda, c.tol, c.max_iter)
        model = train(records, c.features, c.l2_lambda, c.tol, c.max_iter, seed=config.seed)
    except ClassifierError as ex:
        raise EmptyInput('classification impossible: {0}'.format(ex))
    document = {'target': 'variety', 'positive_class': constants.CG, 'seed': config.seed,
                'generator': constants.RANDOM_GENERATOR, 'records': len(records)}
    document.update(result.to_dict())
    _write_yaml(args.output, document)
    if args.model:
        _write_yaml(args.model, model.to_dict())
    return int(constants.ExitCode.SUCCESS)


def cmd_synth(args, config: RunConfig) -> int:
    os.makedirs(config.output_dir, exist_ok=True)
    entries = []
    index = 0
    for segment in args.segments or constants.SONORANTS:
        for vowel in args.vowels or constants.VOWELS:
            for stress in constants.level_values(constants.AVAILABLE_STRESSES):
                token = synth_token(segment, vowel, stress, seed=config.seed + index)
                index += 1
                stem = '{0}{1}_{2}'.format(segment, vowel, stress)
                wav_path = os.path.join(config.output_dir, stem + '.wav')
                annotation_path = os.path.join(config.output_dir, stem + '.tsv')
                write_wav(wav_path, token.clip)
                _write_text(annotation_path, format_tsv_annotations(token.phones + token.words))
                _write_yaml(os.path.join(config.output_dir, stem + '.truth.yaml'), token.truth)
                entries.append(ManifestEntry(wav=stem + '.wav', annotation=stem + '.tsv', speaker=SYNTH_SPEAKER,
                                             variety=args.variety, notes=token.truth['keyword']))
    write_manifest(os.path.join(config.output_dir, MANIFEST_FILE), entries)
    logger.info('%d synthetic tokens written to %s', len(entries), config.output_dir)
    return int(constants.ExitCode.SUCCESS)


def cmd_validate(args, config: RunConfig) -> int:
    if args.features:
        records = read_features(args.features)
        logger.info('%s: %d rows valid', args.features, len(records))
    if config.manifest:
        entries = read_manifest(config.manifest)
        missing = [path for entry in entries for path in (entry.wav, entry.annotation) if not os.path.exists(path)]
        if missing:
            raise SchemaError('{0}: missing files: {1}'.format(config.manifest, ', '.join(missing)))
        logger.info('%s: %d entries valid', config.manifest, len(entries))
    if not args.features and not config.manifest:
        raise ConfigError('validate needs a features file or a manifest')
    return int(constants.ExitCode.SUCCESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='sonolab', description='Sonorant spectra and vowel contour analysis.')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--config', help='YAML config (falls back to ${0})'.format(constants.CONFIG_ENV_VAR))
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE', help='override a config key')
    parser.add_argument('--log-level', default='INFO', choices=LOG_LEVELS)
    parser.add_argument('--seed', type=int)
    subparsers = parser.add_subparsers(dest='command', required=True)

    analyze = subparsers.add_parser('analyze', help='extract features.csv from a manifest')
    analyze.add_argument('--manifest')
    analyze.add_argument('--output-dir')
    analyze.set_defaults(handler=cmd_analyze)

    for name, handler, help_text in (('summarize', cmd_summarize, 'per-cell means and SDs'),
                                     ('model', cmd_model, 'factorial fixed-effects models'),
                                     ('contrasts', cmd_contrasts, 'pairwise Welch contrasts'),
                                     ('classify', cmd_classify, 'cross-validated variety classifier')):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('features')
        sub.add_argument('--output', help='output file (default stdout)')
        sub.set_defaults(handler=handler)
        if name in ('model', 'contrasts'):
            sub.add_argument('--dv', action='append', help='dependent variable (repeatable)')
        if name == 'model':
            sub.add_argument('--csv', help='also write the coefficient table as CSV')
        if name == 'summarize':
            sub.add_argument('--emit-plot-data', metavar='DIR', help='write per-cell mean and 95%% CI files')
        if name == 'classify':
            sub.add_argument('--model', help='write the model trained on all records as YAML')

    synth = subparsers.add_parser('synth', help='write a synthetic demo corpus')
    synth.add_argument('--output-dir')
    synth.add_argument('--variety', default=constants.AG, choices=constants.level_values(
        constants.AVAILABLE_VARIETIES))
    synth.add_argument('--segments', nargs='+', choices=constants.SONORANTS)
    synth.add_argument('--vowels', nargs='+', choices=constants.VOWELS)
    synth.set_defaults(handler=cmd_synth)

    validate = subparsers.add_parser('validate', help='schema check')
    validate.add_argument('features', nargs='?')
    validate.add_argument('--manifest')
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        overrides = dict(parse_override(text) for text in args.set)
        if args.seed is not None:
            overrides['seed'] = args.seed
        if getattr(args, 'manifest', None):
            overrides['manifest'] = args.manifest
        if getattr(args, 'output_dir', None):
            overrides['output_dir'] = args.output_dir
        config = load_config(args.config, overrides)
        return args.handler(args, config)
    except (ConfigError, SchemaError, EmptyInput) as ex:
        logger.error('%s', ex)
        return int(constants.ExitCode.CONFIG_ERROR)


if __name__ == '__main__':
    sys.exit(main())
