import codecs
import math
import re

from mongoengine import ValidationError

from sonolab.common_entries import Segment
from sonolab.errors import AnnotationSyntaxError, PointTierUnsupported, NonMonotoneIntervals, UndecodableText

# strings ("" escapes a quote), bracketed indices, flags, numbers, anything else
TOKEN_RE = re.compile(r'"(?:[^"]|"")*"|\[[^\]\n]*\]|<[A-Za-z]+>|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?=\s|$)|\S+')

FILE_TYPE = 'ooTextFile'
OBJECT_CLASS = 'TextGrid'
INTERVAL_TIER = 'IntervalTier'
POINT_TIER = 'TextTier'

TIME_TOLERANCE = 1e-9


def read_text(file_path: str) -> str:
    """Decodes UTF-16 when the file opens with a UTF-16 byte-order mark, UTF-8 otherwise."""
    with open(file_path, 'rb') as file:
        raw = file.read()
    encoding = 'utf-16' if raw.startswith((codecs.BOM_UTF16_LE, codecs.BOM_UTF16_BE)) else 'utf-8-sig'
    try:
        return raw.decode(encoding)
    except UnicodeDecodeError as ex:
        raise UndecodableText('{0}: not valid {1} text at byte {2}'.format(file_path, encoding, ex.start))


class _Token(object):
    STRING = 0
    NUMBER = 1
    FLAG = 2

    def __init__(self, kind: int, value, line: int):
        self.kind = kind
        self.value = value
        self.line = line


class TextGridParser:
    """Reads interval tiers from the long and the short TextGrid text forms.

    Both forms carry the same sequence of strings and numbers; the long form
    only adds labels (``xmin =``, ``intervals [1]:``) which are skipped.
    """

    def __init__(self):
        self.tiers = []
        self.xmin = 0.0
        self.xmax = 0.0
        self._tokens = []
        self._pos = 0

    def read_textgrid(self, file_path):
        self.load_content(read_text(file_path))

    def load_content(self, content: str) -> int:
        tokens = []
        line = 1
        last = 0
        for match in TOKEN_RE.finditer(content):
            line += content.count('\n', last, match.start())
            last = match.start()
            text = match.group(0)
            if text.startswith('"') and len(text) >= 2 and text.endswith('"'):
                tokens.append(_Token(_Token.STRING, text[1:-1].replace('""', '"'), line))
            elif text.startswith('<') and text.endswith('>'):
                tokens.append(_Token(_Token.FLAG, text, line))
            elif text[0].isdigit() or text[0] in '+-.':
                try:
                    tokens.append(_Token(_Token.NUMBER, float(text), line))
                except ValueError:
                    raise AnnotationSyntaxError('malformed number {0!r}'.format(text), line)
        self._tokens = tokens
        self._pos = 0
        return len(self._tokens)

    def parse(self):
        self.tiers = []
        file_type = self._expect_string()
        if not file_type.startswith(FILE_TYPE):
            raise AnnotationSyntaxError('not a TextGrid text file: {0!r}'.format(file_type), self._line())
        object_class = self._expect_string()
        if object_class != OBJECT_CLASS:
            raise AnnotationSyntaxError('expected object class TextGrid, got {0!r}'.format(object_class),
                                        self._line())
        self.xmin = self._expect_number()
        self.xmax = self._expect_number()
        if self._peek_kind() == _Token.FLAG:
            flag = self._next()
            if flag.value != '<exists>':
                return self.tiers
        elif self._pos >= len(self._tokens):
            return self.tiers
        size = self._expect_count()
        for _ in range(size):
            self.tiers.append(self._parse_tier())
        return self.tiers

    # Getter for the list
    def get_tiers(self):
        return self.tiers

    # private
    def _parse_tier(self):
        tier_class = self._expect_string()
        if tier_class == POINT_TIER:
            raise PointTierUnsupported('point tiers are not supported (line {0})'.format(self._line()))
        if tier_class != INTERVAL_TIER:
            raise AnnotationSyntaxError('unknown tier class {0!r}'.format(tier_class), self._line())
        name = self._expect_string()
        self._expect_number()
        self._expect_number()
        count = self._expect_count()
        segments = []
        previous_end = None
        for _ in range(count):
            line = self._line()
            start = self._expect_number()
            end = self._expect_number()
            label = self._expect_string()
            if previous_end is not None and start < previous_end - TIME_TOLERANCE:
                raise NonMonotoneIntervals('interval at line {0} starts at {1} before previous end {2}'.format(
                    line, start, previous_end))
            if end <= start:
                raise NonMonotoneIntervals('interval at line {0} ends at {1}, not after its start {2}'.format(
                    line, end, start))
            segment = Segment(label=label, start_s=start, end_s=end, tier=name)
            try:
                segment.validate()
            except ValidationError as ex:
                raise AnnotationSyntaxError('invalid interval: {0}'.format(ex), line)
            segments.append(segment)
            previous_end = end
        return name, segments

    def _line(self) -> int:
        if self._pos < len(self._tokens):
            return self._tokens[self._pos].line
        return self._tokens[-1].line if self._tokens else 1

    def _peek_kind(self):
        if self._pos < len(self._tokens):
            return self._tokens[self._pos].kind
        return None

    def _next(self) -> _Token:
        if self._pos >= len(self._tokens):
            raise AnnotationSyntaxError('unexpected end of document', self._line())
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def _expect_string(self) -> str:
        token = self._next()
        if token.kind != _Token.STRING:
            raise AnnotationSyntaxError('expected a quoted string', token.line)
        return token.value

    def _expect_number(self) -> float:
        token = self._next()
        if token.kind != _Token.NUMBER:
            raise AnnotationSyntaxError('expected a number', token.line)
        if not math.isfinite(token.value):
            raise AnnotationSyntaxError('non-finite number', token.line)
        return token.value

    def _expect_count(self) -> int:
        line = self._line()
        value = self._expect_number()
        if value < 0 or value != int(value):
            raise AnnotationSyntaxError('expected a non-negative integer count', line)
        count = int(value)
        # every tier or interval needs at least three more tokens
        if count * 3 > len(self._tokens) - self._pos:
            raise AnnotationSyntaxError('count {0} exceeds the remaining document'.format(count), line)
        return count


def _quote(text: str) -> str:
    return '"{0}"'.format(text.replace('"', '""'))


def _number(value: float) -> str:
    return repr(float(value))


def serialize_textgrid(tiers, xmin=None, xmax=None, short=False) -> str:
    """Writes ``[(tier name, [Segment, ...]), ...]`` as a TextGrid document."""
    starts = [seg.start_s for _, segments in tiers for seg in segments]
    ends = [seg.end_s for _, segments in tiers for seg in segments]
    xmin = min(starts, default=0.0) if xmin is None else xmin
    xmax = max(ends, default=xmin) if xmax is None else xmax
    lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', '']
    if short:
        lines += [_number(xmin), _number(xmax), '<exists>', str(len(tiers))]
        for name, segments in tiers:
            lines += [_quote(INTERVAL_TIER), _quote(name), _number(xmin), _number(xmax), str(len(segments))]
            for seg in segments:
                lines += [_number(seg.start_s), _number(seg.end_s), _quote(seg.label)]
        return '\n'.join(lines) + '\n'

    lines += ['xmin = {0} '.format(_number(xmin)), 'xmax = {0} '.format(_number(xmax)), 'tiers? <exists> ',
              'size = {0} '.format(len(tiers)), 'item []: ']
    for index, (name, segments) in enumerate(tiers, start=1):
        lines += ['    item [{0}]:'.format(index),
                  '        class = {0} '.format(_quote(INTERVAL_TIER)),
                  '        name = {0} '.format(_quote(name)),
                  '        xmin = {0} '.format(_number(xmin)),
                  '        xmax = {0} '.format(_number(xmax)),
                  '        intervals: size = {0} '.format(len(segments))]
        for number, seg in enumerate(segments, start=1):
            lines += ['        intervals [{0}]:'.format(number),
                      '            xmin = {0} '.format(_number(seg.start_s)),
                      '            xmax = {0} '.format(_number(seg.end_s)),
                      '            text = {0} '.format(_quote(seg.label))]
    return '\n'.join(lines) + '\n'
