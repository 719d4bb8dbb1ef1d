import logging
import os
from typing import List, Optional, Tuple

import numpy as np
from mongoengine import ValidationError
from scipy.io import wavfile

import sonolab.constants as constants
from sonolab.common_entries import AudioClip, Segment
from sonolab.errors import UnsupportedEncoding, MalformedContainer, AnnotationSyntaxError, NegativeDuration, \
    AnnotationError
from sonolab.utils.textgrid_parser import TextGridParser, serialize_textgrid, read_text

logger = logging.getLogger(__name__)

TEXTGRID_EXTENSIONS = ('.textgrid',)
TSV_EXTENSIONS = ('.tsv', '.txt')
TSV_COLUMNS = 4


def read_wav(path: str) -> AudioClip:
    try:
        sample_rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as ex:
        message = str(ex)
        if 'Unknown wave file format' in message or 'Unsupported' in message:
            raise UnsupportedEncoding('{0}: {1}'.format(path, message))
        raise MalformedContainer('{0}: {1}'.format(path, message))
    except (EOFError, OSError, IndexError) as ex:
        raise MalformedContainer('{0}: {1}'.format(path, ex))

    if data.ndim == 2:
        if data.shape[1] > 2:
            raise UnsupportedEncoding('{0}: {1} channels, at most 2 supported'.format(path, data.shape[1]))
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / constants.PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncoding('{0}: sample type {1} is neither PCM 16-bit nor float 32-bit'.format(
            path, data.dtype))
    if samples.size == 0:
        raise MalformedContainer('{0}: no sample frames'.format(path))
    if not np.all(np.isfinite(samples)):
        raise MalformedContainer('{0}: non-finite sample values'.format(path))
    if sample_rate != constants.EXPECTED_SAMPLE_RATE:
        logger.info('%s sampled at %d Hz', path, sample_rate)
    return AudioClip(samples, sample_rate)


def write_wav(path: str, clip: AudioClip):
    pcm = np.clip(np.round(clip.samples * constants.PCM16_SCALE), -constants.PCM16_SCALE, constants.PCM16_SCALE - 1)
    wavfile.write(path, clip.sample_rate, pcm.astype(np.int16))


def slice_segment(clip: AudioClip, segment: Segment) -> np.ndarray:
    # floor(start * rate) .. floor(end * rate)
    return clip.slice(segment)


def parse_textgrid(text: str) -> List[Tuple[str, List[Segment]]]:
    parser = TextGridParser()
    parser.load_content(text)
    return parser.parse()


def format_textgrid(tiers, short=False) -> str:
    return serialize_textgrid(tiers, short=short)


def parse_tsv_annotations(text: str) -> List[Segment]:
    segments = []
    for number, raw in enumerate(text.split('\n'), start=1):
        line = raw.rstrip('\r')
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        columns = line.split('\t')
        if len(columns) != TSV_COLUMNS:
            raise AnnotationSyntaxError('expected {0} tab-separated columns, got {1}'.format(
                TSV_COLUMNS, len(columns)), number)
        tier, label, start_text, end_text = columns
        try:
            start_s = float(start_text)
            end_s = float(end_text)
        except ValueError:
            raise AnnotationSyntaxError('non-numeric time in {0!r}'.format(line), number)
        if end_s <= start_s:
            raise NegativeDuration('line {0}: segment {1!r} ends at {2} before it starts at {3}'.format(
                number, label, end_s, start_s))
        segment = Segment(label=label, start_s=start_s, end_s=end_s, tier=tier)
        try:
            segment.validate()
        except ValidationError as ex:
            raise AnnotationSyntaxError('invalid segment: {0}'.format(ex), number)
        segments.append(segment)
    return segments


def format_tsv_annotations(segments: List[Segment]) -> str:
    lines = ['# tier\tlabel\tstart_s\tend_s']
    for seg in segments:
        lines.append('{0}\t{1}\t{2!r}\t{3!r}'.format(seg.tier, seg.label, float(seg.start_s), float(seg.end_s)))
    return '\n'.join(lines) + '\n'


def read_annotations(path: str) -> List[Tuple[str, List[Segment]]]:
    """Reads a TextGrid or TSV annotation file as ``[(tier, segments), ...]``."""
    text = read_text(path)
    extension = os.path.splitext(path)[1].lower()
    if extension in TEXTGRID_EXTENSIONS:
        return parse_textgrid(text)
    if extension in TSV_EXTENSIONS:
        tiers = {}
        for seg in parse_tsv_annotations(text):
            tiers.setdefault(seg.tier, []).append(seg)
        return [(name, sorted(segments, key=lambda s: s.start_s)) for name, segments in tiers.items()]
    raise AnnotationError('{0}: unknown annotation format {1!r}'.format(path, extension))


# keywords
def _syllable_of(keyword: str, index: int) -> int:
    # CVCV keywords: characters 0-1 are the first syllable, 2-3 the second
    return 0 if index < 2 else 1


def stress_from_keyword(keyword: str, sonorant: str) -> Optional[str]:
    """Stress of the syllable whose onset is ``sonorant``; None when unmarked."""
    if constants.STRESS_MARK not in keyword:
        return None
    mark = keyword.index(constants.STRESS_MARK)
    bare = keyword.replace(constants.STRESS_MARK, '')
    if sonorant not in bare:
        return None
    stressed_syllable = _syllable_of(bare, mark)
    sonorant_syllable = _syllable_of(bare, bare.index(sonorant))
    return constants.STRESSED if stressed_syllable == sonorant_syllable else constants.UNSTRESSED


class TokenMetadata(object):
    def __init__(self, speaker: str, variety: str, stress: Optional[str] = None, keyword: str = str()):
        if variety not in constants.level_values(constants.AVAILABLE_VARIETIES):
            raise AnnotationError('unknown variety {0!r}'.format(variety))
        if stress and stress not in constants.level_values(constants.AVAILABLE_STRESSES):
            raise AnnotationError('unknown stress {0!r}'.format(stress))
        self.speaker = speaker
        self.variety = variety
        self.stress = stress or None
        self.keyword = keyword


class TokenPair(object):
    """A sonorant and the vowel that follows it."""

    def __init__(self, sonorant: Segment, vowel: Segment, speaker: str, variety: str, stress: str,
                 keyword: str = str()):
        if sonorant.label not in constants.SONORANTS:
            raise AnnotationError('{0} is not a sonorant'.format(sonorant))
        if vowel.label not in constants.VOWELS:
            raise AnnotationError('{0} is not a target vowel'.format(vowel))
        if sonorant.end_s > vowel.start_s + 1e-9:
            raise AnnotationError('{0} overlaps the following {1}'.format(sonorant, vowel))
        if stress not in constants.level_values(constants.AVAILABLE_STRESSES):
            raise AnnotationError('unknown stress {0!r}'.format(stress))
        self.sonorant = sonorant
        self.vowel = vowel
        self.speaker = speaker
        self.variety = variety
        self.stress = stress
        self.keyword = keyword

    def to_dict(self) -> dict:
        return {'sonorant': self.sonorant.to_dict(), 'vowel': self.vowel.to_dict(), 'speaker': self.speaker,
                'variety': self.variety, 'stress': self.stress, 'keyword': self.keyword}


class SkippedToken(object):
    def __init__(self, segment: Segment, reason: str):
        self.segment = segment
        self.reason = reason

    def __str__(self):
        return '{0}: {1}'.format(self.segment, self.reason)


def _containing_word(words: List[Segment], segment: Segment) -> Optional[Segment]:
    for word in words:
        if word.contains(segment.midpoint_s):
            return word
    return None


def pair_tokens(segments: List[Segment], metadata: TokenMetadata, words: Optional[List[Segment]] = None,
                lexicon=constants.KEYWORD_LEXICON) -> Tuple[List[TokenPair], List[SkippedToken]]:
    """Pairs every sonorant with the immediately following vowel.

    Labels outside the sonorant and vowel sets are ignored. When a word tier
    is given, sonorants outside target keywords are skipped, and keyword and
    stress come from the containing word.
    """
    ordered = sorted(segments, key=lambda s: s.start_s)
    pairs = []
    skipped = []
    for index, seg in enumerate(ordered):
        if seg.label not in constants.SONORANTS:
            continue
        following = ordered[index + 1] if index + 1 < len(ordered) else None
        if following is None:
            skipped.append(SkippedToken(seg, 'no following segment'))
            continue
        if following.label not in constants.VOWELS:
            skipped.append(SkippedToken(seg, 'followed by {0!r}, not a target vowel'.format(following.label)))
            continue

        keyword = metadata.keyword
        stress = metadata.stress
        if words is not None:
            word = _containing_word(words, seg)
            if word is None or word.label not in lexicon:
                skipped.append(SkippedToken(seg, 'not inside a target keyword'))
                continue
            keyword = word.label
            stress = stress_from_keyword(keyword, seg.label) or stress
        if stress is None:
            skipped.append(SkippedToken(seg, 'stress unknown'))
            continue
        pairs.append(TokenPair(seg, following, metadata.speaker, metadata.variety, stress, keyword))

    for skip in skipped:
        logger.warning('speaker %s: skipped %s', metadata.speaker, skip)
    return pairs, skipped
