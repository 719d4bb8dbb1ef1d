from enum import IntEnum

PRECISION = 6

EXPECTED_SAMPLE_RATE = 44100
PCM16_SCALE = 32768.0

# factor levels
AG = 'AG'
CG = 'CG'
AVAILABLE_VARIETIES = [(AG, 'Athenian Greek'), (CG, 'Cypriot Greek')]

STRESSED = 'stressed'
UNSTRESSED = 'unstressed'
AVAILABLE_STRESSES = [(STRESSED, 'Stressed'), (UNSTRESSED, 'Unstressed')]

SONORANTS = ('l', 'm', 'n', 'r')
AVAILABLE_SONORANTS = [('l', 'lateral'), ('m', 'labial nasal'), ('n', 'alveolar nasal'), ('r', 'rhotic')]

VOWELS = ('a', 'i')
AVAILABLE_VOWELS = [('a', 'open'), ('i', 'close front')]

# reference cell of the treatment coding
REFERENCE_LEVELS = {'variety': AG, 'stress': STRESSED, 'segment': 'l', 'vowel': 'a'}
FACTOR_LEVELS = {'variety': (AG, CG), 'stress': (STRESSED, UNSTRESSED), 'segment': SONORANTS, 'vowel': VOWELS}
SONORANT_FACTORS = ('variety', 'stress', 'segment')
VOWEL_FACTORS = ('variety', 'stress', 'segment', 'vowel')

STRESS_MARK = "'"

# CVCV target keywords, stress mark before the stressed syllable
KEYWORD_LEXICON = ("'misa", "sa'mi", "'nisa", "sa'ni", "'lisa", "sa'li", "'risa", "sa'ri",
                   "mi'sa", "'sami", "ni'sa", "'sani", "li'sa", "'sali", "ri'sa", "'sari",
                   "'masa", "sa'ma", "'nasa", "sa'na", "'lasa", "sa'la", "'rasa", "sa'ra",
                   "ma'sa", "'sama", "na'sa", "'sana", "la'sa", "'sala", "ra'sa", "'sara")

# spectrum
DEFAULT_WINDOW_MS = 20.0
DEFAULT_OVERLAP = 0.5
DEFAULT_SPAN = (0.10, 0.90)
MIN_SPECTRUM_SAMPLES = 64

# formants
DEFAULT_CEILING_HZ = 5500.0
DEFAULT_LPC_ORDER = 10
DEFAULT_FRAME_MS = 25.0
DEFAULT_HOP_MS = 6.25
DEFAULT_CONTEXT_MS = 25.0
DEFAULT_MAX_BANDWIDTH_HZ = 400.0
DEFAULT_EDGE_MARGIN_HZ = 50.0
DEFAULT_PREEMPHASIS_HZ = 50.0
DEFAULT_MEDIAN_WIDTH = 3
DEFAULT_MAX_MISSING_FRACTION = 0.5
LOWPASS_ORDER = 8
LOWPASS_FRACTION = 0.9
N_FORMANTS = 4
MAX_FORMANT_CANDIDATES = 5
ROOT_TOLERANCE = 1e-12
ROOT_MAX_ITERATIONS = 100

# 5%, 10%, ..., 95% of the vowel
GRID_POSITIONS = tuple(round(0.05 * k, 2) for k in range(1, 20))
N_GRID_POINTS = len(GRID_POSITIONS)

# classifier
DEFAULT_L2_LAMBDA = 1e-3
DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 5000
DEFAULT_FOLDS = 5

# synthesis
SYNTH_PEAK = 0.9
RANDOM_GENERATOR = 'PCG64'

CONFIG_ENV_VAR = 'SONOLAB_CONFIG'

MISSING_VALUE = 'NA'


class ExitCode(IntEnum):
    SUCCESS = 0
    PARTIAL = 1
    CONFIG_ERROR = 2

    def __str__(self):
        return str(self.value)


class EntryStatus(IntEnum):
    ANALYZED = 0
    SKIPPED = 1
    FAILED = 2

    @classmethod
    def choices(cls):
        return [(choice, choice.name) for choice in cls]

    @classmethod
    def coerce(cls, item):
        return cls(int(item)) if not isinstance(item, cls) else item

    def __str__(self):
        return self.name.lower()


def level_values(pairs) -> tuple:
    return tuple(value for value, _ in pairs)
