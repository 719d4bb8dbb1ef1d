class SonolabError(Exception):
    pass


# annotation-io
class AnnotationError(SonolabError):
    pass


class UnsupportedEncoding(AnnotationError):
    pass


class MalformedContainer(AnnotationError):
    pass


class UndecodableText(AnnotationError):
    pass


class AnnotationSyntaxError(AnnotationError):
    def __init__(self, message: str, line: int = 0):
        super(AnnotationSyntaxError, self).__init__('line {0}: {1}'.format(line, message))
        self.line = line


class PointTierUnsupported(AnnotationError):
    pass


class NonMonotoneIntervals(AnnotationError):
    pass


class NegativeDuration(AnnotationError):
    pass


# spectrum / formants / contour
class AnalysisError(SonolabError):
    pass


class SegmentTooShort(AnalysisError):
    pass


class EmptySpectrum(AnalysisError):
    pass


class DegenerateSpectrum(AnalysisError):
    def __init__(self, m1: float, m2: float):
        super(DegenerateSpectrum, self).__init__(
            'zero spectral spread at {0:.6g} Hz, skewness and kurtosis undefined'.format(m1))
        self.m1 = m1
        self.m2 = m2


class NumericalFailure(AnalysisError):
    pass


class RootFindingDiverged(AnalysisError):
    pass


class TooFewFormants(AnalysisError):
    pass


class TrackingFailed(AnalysisError):
    pass


class NonFiniteInput(AnalysisError):
    pass


# stats
class StatsError(SonolabError):
    pass


class NonPositiveValue(StatsError):
    pass


class EmptyInput(StatsError):
    pass


class InsufficientData(StatsError):
    pass


class RankDeficientDesign(StatsError):
    def __init__(self, terms):
        super(RankDeficientDesign, self).__init__('aliased terms: {0}'.format(', '.join(terms)))
        self.terms = list(terms)


# classify
class ClassifierError(SonolabError):
    pass


class SingleClassInput(ClassifierError):
    pass


class NonFiniteFeature(ClassifierError):
    pass


class MissingFeature(ClassifierError):
    pass


class TooFewRecords(ClassifierError):
    pass


# synthkit
class SynthError(SonolabError):
    pass


class UnstableResonator(SynthError):
    pass


class OutOfBand(SynthError):
    pass


# cli
class ConfigError(SonolabError):
    pass


class SchemaError(SonolabError):
    def __init__(self, message: str, row: int = 0):
        super(SchemaError, self).__init__('row {0}: {1}'.format(row, message) if row else message)
        self.row = row
