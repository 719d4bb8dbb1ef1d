import math

import numpy as np
import pytest
from scipy.signal import lfilter

import sonolab.constants as constants
from sonolab.errors import UnstableResonator, OutOfBand, SynthError
from sonolab.stats.entry import FeatureFields, INTERCEPT
from sonolab.synthkit.entry import VowelSpec, impulse_train, resonate, synth_vowel, synth_spectrum, FlatEnvelope, \
    GaussianEnvelope, PointEnvelope, discrete_uniform_moments, direct_moments, synth_corpus, full_design, \
    cell_mean, cell_label, keyword_for, synth_token


class TestVowelSynthesis:
    def test_resonator_peak(self):
        rate = 11025
        impulse = np.zeros(8192)
        impulse[0] = 1.0
        response = resonate(impulse, np.full(impulse.size, 1000.0), 50.0, rate)
        spectrum = np.abs(np.fft.rfft(response))
        peak_hz = np.argmax(spectrum) * rate / impulse.size
        assert peak_hz == pytest.approx(1000.0, abs=5.0)

    def test_no_formants_gives_impulses(self):
        clip = synth_vowel(VowelSpec(100.0, [], 0.05, 8000))
        assert np.flatnonzero(clip.samples).tolist() == [0, 80, 160, 240, 320]
        assert np.max(clip.samples) == pytest.approx(constants.SYNTH_PEAK)

    def test_source_tilt_is_undone_by_pre_emphasis(self):
        clip = synth_vowel(VowelSpec(100.0, [], 0.05, 8000, source_tilt_hz=50.0))
        beta = math.exp(-2.0 * math.pi * 50.0 / 8000)
        flat = lfilter([1.0, -beta], [1.0], clip.samples)
        assert np.flatnonzero(np.abs(flat) > 1e-9).tolist() == [0, 80, 160, 240, 320]
        assert np.all(np.diff(clip.samples[1:80]) < 0)

    def test_source_tilt_in_document(self):
        assert VowelSpec(100.0, [], 0.05).to_dict()['source_tilt_hz'] is None
        assert VowelSpec(100.0, [], 0.05, source_tilt_hz=50).to_dict()['source_tilt_hz'] == 50.0
        with pytest.raises(SynthError):
            VowelSpec(100.0, [], 0.05, source_tilt_hz=0.0)

    def test_impulse_train(self):
        assert np.flatnonzero(impulse_train(100.0, 400, 8000)).tolist() == [0, 80, 160, 240, 320]
        assert impulse_train(100.0, 400, 8000).sum() == 5.0

    def test_constant_trajectory_matches_fixed_formant(self):
        fixed = VowelSpec(120.0, [(700.0, 80.0), (1200.0, 90.0)], 0.1)
        moving = VowelSpec(120.0, [(700.0, 80.0), (1200.0, 90.0)], 0.1, trajectory=[(700.0, 0.0, 0.0), None])
        np.testing.assert_array_equal(synth_vowel(fixed).samples, synth_vowel(moving).samples)

    def test_trajectory_samples(self):
        spec = VowelSpec(120.0, [(700.0, 80.0)], 0.2, trajectory=[(650.0, 12.0, -0.4)])
        track = spec.frequency_track(0)
        index = int(round(0.05 * spec.n_samples))
        assert track[index] == pytest.approx(650.0, abs=1e-6)
        assert track[int(round(0.5 * spec.n_samples))] == pytest.approx(650.0 + 12.0 * 9 - 0.4 * 81, abs=1e-6)

    def test_peak_bound(self):
        clip = synth_vowel(VowelSpec(180.0, [(300.0, 40.0), (2300.0, 60.0)], 0.2))
        assert np.max(np.abs(clip.samples)) == pytest.approx(constants.SYNTH_PEAK, rel=1e-12)

    def test_unstable_resonator(self):
        with pytest.raises(UnstableResonator):
            synth_vowel(VowelSpec(100.0, [(500.0, 0.0)], 0.05))

    @pytest.mark.parametrize('arguments', [
        (0.0, [(500.0, 80.0)], 0.1),
        (100.0, [(1500.0, 80.0), (500.0, 80.0)], 0.1),
        (100.0, [(500.0, 80.0)], 0.0),
    ])
    def test_invalid_specs(self, arguments):
        with pytest.raises(SynthError):
            VowelSpec(*arguments)

    def test_formant_above_nyquist(self):
        with pytest.raises(OutOfBand):
            VowelSpec(100.0, [(500.0, 80.0), (6000.0, 80.0)], 0.1, 11025)


class TestAnalyticSpectra:
    def test_point_envelope(self):
        spec = synth_spectrum(PointEnvelope(1000.0), 10.0, 513)
        assert np.flatnonzero(spec.power).tolist() == [100]

    def test_flat_envelope_oracles_agree(self):
        spec = synth_spectrum(FlatEnvelope(1000.0, 3000.0), 10.0, 513)
        direct = direct_moments(spec.frequencies(), spec.power)
        closed = discrete_uniform_moments(100, 300, 10.0)
        assert direct[0] == pytest.approx(closed[0], rel=1e-12)
        assert direct[1] == pytest.approx(closed[1], rel=1e-12)
        assert direct[2] == pytest.approx(closed[2], abs=1e-12)
        assert direct[3] == pytest.approx(closed[3], rel=1e-12)

    def test_gaussian_is_symmetric(self):
        spec = synth_spectrum(GaussianEnvelope(2000.0, 300.0), 10.0, 513)
        _, sd, skew, _ = direct_moments(spec.frequencies(), spec.power)
        assert abs(skew) < 1e-9
        assert sd == pytest.approx(300.0, rel=0.05)

    def test_out_of_band(self):
        with pytest.raises(OutOfBand):
            synth_spectrum(FlatEnvelope(4000.0, 6000.0), 10.0, 513)
        with pytest.raises(OutOfBand):
            synth_spectrum(GaussianEnvelope(100.0, 50.0), 10.0, 513)


class TestCorpus:
    def test_noiseless_records_sit_on_cell_means(self):
        records, truth = synth_corpus(noise_sd=0.0, n_per_cell=2, seed=1)
        for record in records:
            cell = {'variety': record.variety, 'stress': record.stress, 'segment': record.segment}
            label = cell_label(cell)
            assert math.log(record.m1_cog_hz) == pytest.approx(truth['cell_means'][FeatureFields.M1_FIELD][label])
            assert record.m3_skew == pytest.approx(truth['cell_means'][FeatureFields.M3_FIELD][label])

    def test_deterministic(self):
        first, _ = synth_corpus(n_per_cell=3, seed=12)
        second, _ = synth_corpus(n_per_cell=3, seed=12)
        third, _ = synth_corpus(n_per_cell=3, seed=13)
        assert [record.to_dict() for record in first] == [record.to_dict() for record in second]
        assert [record.to_dict() for record in first] != [record.to_dict() for record in third]

    def test_sample_mean_converges(self):
        design = [{'variety': constants.CG, 'stress': constants.UNSTRESSED, 'segment': 'm'}]
        records, truth = synth_corpus(design=design, noise_sd=0.5, n_per_cell=10000, seed=2)
        label = cell_label(design[0])
        values = np.array([record.m3_skew for record in records])
        assert values.mean() == pytest.approx(truth['cell_means'][FeatureFields.M3_FIELD][label], abs=0.02)
        assert values.std(ddof=1) == pytest.approx(0.5, rel=0.05)

    def test_speaker_offsets(self):
        records, truth = synth_corpus(noise_sd=0.0, n_per_cell=4, seed=3, speaker_sd={FeatureFields.M3_FIELD: 1.0})
        offsets = truth['speaker_offsets'][FeatureFields.M3_FIELD]
        assert len(offsets) == 8
        assert any(value != 0.0 for value in offsets.values())
        for record in records:
            label = cell_label({'variety': record.variety, 'stress': record.stress, 'segment': record.segment})
            expected = truth['cell_means'][FeatureFields.M3_FIELD][label] + offsets[record.speaker]
            assert record.m3_skew == pytest.approx(expected)

    def test_truth_document(self):
        _, truth = synth_corpus(n_per_cell=1, seed=4)
        assert set(truth) == {'generator', 'seed', 'n_per_cell', 'noise_sd', 'speaker_sd', 'log_dvs', 'effects',
                              'cell_means', 'speaker_offsets'}
        assert truth['generator'] == constants.RANDOM_GENERATOR
        assert len(truth['cell_means'][FeatureFields.M1_FIELD]) == 16

    def test_full_design(self):
        assert len(full_design()) == 16
        assert len(full_design(constants.VOWEL_FACTORS)) == 32

    def test_cell_mean(self):
        effects = {INTERCEPT: 1.0, 'CG': 2.0, 'CG:r': 4.0, 'r:i': 8.0}
        assert cell_mean(effects, {'variety': constants.AG, 'segment': 'r'}) == 1.0
        assert cell_mean(effects, {'variety': constants.CG, 'segment': 'r'}) == 7.0
        assert cell_mean(effects, {'variety': constants.CG, 'segment': 'r', 'vowel': 'i'}) == 15.0
        with pytest.raises(SynthError):
            cell_mean({'CG:x': 1.0}, {'variety': constants.CG})

    def test_cell_label(self):
        assert cell_label({'variety': constants.AG}) == 'AG/stressed/l/a'


class TestDemoToken:
    def test_structure(self):
        token = synth_token('l', 'i', constants.UNSTRESSED, seed=1)
        assert [phone.label for phone in token.phones] == ['', 'l', 'i', 's', 'a', '']
        assert [word.label for word in token.words] == ['', "li'sa", '']
        assert token.phones[0].duration_s == pytest.approx(0.05)
        assert token.truth['duration_ms'] == pytest.approx(84.0, abs=0.05)
        assert token.truth['coefficients']['f1_a0'] == 450.0
        assert token.truth['coefficients']['f2_a0'] == 2200.0
        assert token.phones[-1].end_s == pytest.approx(token.clip.duration_s)

    def test_segments_tile_the_clip(self):
        token = synth_token('r', 'a', constants.STRESSED)
        for left, right in zip(token.phones, token.phones[1:]):
            assert left.end_s == right.start_s
        assert token.words[1].start_s == token.phones[1].start_s
        assert token.words[1].end_s == token.phones[4].end_s

    def test_keyword(self):
        assert keyword_for('m', 'a', constants.STRESSED) == "'masa"
        assert keyword_for('m', 'a', constants.UNSTRESSED) == "ma'sa"
        assert keyword_for('n', 'i', constants.STRESSED) in constants.KEYWORD_LEXICON

    def test_unknown_preset(self):
        with pytest.raises(SynthError):
            synth_token('s', 'a', constants.STRESSED)
