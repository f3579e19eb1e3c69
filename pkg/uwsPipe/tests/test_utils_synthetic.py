#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Tests for the synthetic corpus generator."""

import itertools
import os
import tempfile

import numpy as np
from pysat.utils.testing import assert_lists_equal
from pysat.utils.testing import eval_bad_input
import pytest

from uwsPipe.utils import corpus
from uwsPipe.utils import synthetic


class TestSyntheticSpec(object):
    """Unit tests for the generator settings."""

    def test_default_word_dist(self):
        """Test that the word distribution defaults to uniform."""
        spec = synthetic.SyntheticSpec(n_units=3, lexicon=['01', '12', '2'])
        assert spec.word_dist == (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
        assert spec.lexicon == ('01', '12', '2')
        return

    @pytest.mark.parametrize("word,n_units,target", [
        ('012', 3, ['0', '1', '2']), ('10-11', 12, ['10', '11']),
        ('4', 5, ['4'])])
    def test_parse_word(self, word, n_units, target):
        """Test splitting lexicon words into unit labels.

        Parameters
        ----------
        word : str
            Lexicon word
        n_units : int
            Alphabet size
        target : list
            Expected unit labels

        """
        assert_lists_equal(synthetic.parse_word(word, n_units), target)
        return

    @pytest.mark.parametrize("kwargs,msg", [
        ({'lexicon': ('05',)}, 'uses unit "5" outside [0, 2)'),
        ({'lexicon': ()}, "at least one word"),
        ({'lexicon': ('',)}, "empty lexicon word"),
        ({'word_dist': (0.5, 0.6)}, "must be a probability vector"),
        ({'word_dist': (1.0,)}, "lengths differ"),
        ({'utterance_length_words': (3, 2)}, "bad utterance_length_words"),
        ({'silence_prob': 1.5}, "silence_prob must lie in [0, 1]"),
        ({'self_loop': 1.0}, "self_loop must lie in [0, 1)"),
        ({'unit_means': np.zeros((2, 3, 5))}, "unit_means has shape")])
    def test_bad_spec(self, kwargs, msg):
        """Test that out-of-range settings are rejected.

        Parameters
        ----------
        kwargs : dict
            Settings besides n_units=2
        msg : str
            Expected error message fragment

        """
        eval_bad_input(synthetic.SyntheticSpec, ValueError, msg,
                       input_args=[2], input_kwargs=kwargs)
        return


class TestGenerateSynthetic(object):
    """Unit tests for corpus generation."""

    def setup_method(self):
        """Create a small corpus with silences."""
        self.spec = synthetic.SyntheticSpec(
            n_units=5, lexicon=('01', '12', '234', '40', '3'),
            n_utterances=12, silence_prob=0.5, seed=3)
        self.corp = synthetic.generate_synthetic(self.spec)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.spec, self.corp, self.out
        return

    def test_deterministic(self):
        """Test that identical settings give identical corpora."""
        self.out = synthetic.generate_synthetic(self.spec)

        assert self.out.manifest == self.corp.manifest
        for uid in self.corp.manifest.ids:
            assert np.array_equal(self.out.features[uid].frames,
                                  self.corp.features[uid].frames)
        return

    def test_seed_changes_corpus(self):
        """Test that a different seed gives different features."""
        self.out = synthetic.generate_synthetic(
            synthetic.SyntheticSpec(n_units=5,
                                    lexicon=('01', '12', '234', '40', '3'),
                                    n_utterances=12, silence_prob=0.5,
                                    seed=4))
        assert not np.array_equal(self.out.features['utt0000'].frames[:5],
                                  self.corp.features['utt0000'].frames[:5])
        return

    def test_gold_consistency(self):
        """Test that gold words, units and translations agree."""
        lexicon = ['-'.join(list(word)) for word in self.spec.lexicon]
        for utt in self.corp.manifest.utterances:
            words = self.corp.gold_words[utt.id]
            assert self.corp.gold_units[utt.id].tokens == tuple(words.tokens)
            assert len(utt.translation) == len(words)
            for word, trans in zip(words.labels, utt.translation):
                assert word == lexicon[int(trans[2:])]
            lo, hi = self.spec.utterance_length_words
            assert lo <= len(words) <= hi
        return

    def test_frame_labels(self):
        """Test that frame labels match the features and silences."""
        for utt in self.corp.manifest.utterances:
            labels = self.corp.frame_labels[utt.id]
            assert labels.shape[0] == self.corp.features[utt.id].n_frames
            assert abs(utt.duration_s - labels.shape[0] * 0.01) < 1.0e-9

            n_sil = int(np.sum(labels == synthetic.SILENCE_FRAME))
            sil_frames = sum([int(round((end - start) / 0.01))
                              for start, end in utt.silences])
            assert n_sil == sil_frames

            runs = [int(key) for key, _ in itertools.groupby(labels)
                    if key != synthetic.SILENCE_FRAME]
            assert len(runs) <= len(self.corp.gold_units[utt.id])
        return

    def test_feature_shape(self):
        """Test the feature dimension and frame rate."""
        for seq in self.corp.features.values():
            assert seq.dim == 4
            assert seq.hop_s == 0.01
        assert self.corp.params.unit_means.shape == (5, 3, 4)
        return

    @pytest.mark.parametrize("prob", [0.0, 1.0])
    def test_silence_extremes(self, prob):
        """Test corpora without silences and with every silence slot filled.

        Parameters
        ----------
        prob : float
            Silence probability

        """
        self.out = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=2, n_utterances=5, silence_prob=prob, seed=1))

        for utt in self.out.manifest.utterances:
            n_words = len(self.out.gold_words[utt.id])
            target = 0 if prob == 0.0 else n_words + 1
            assert len(utt.silences) == target
        return

    def test_lattice_separation(self):
        """Test the minimum distance between lattice means."""
        rng = np.random.default_rng(0)
        self.out = synthetic.lattice_means(16, 3, 4.0, rng)

        dist = np.sqrt(((self.out[:, None, :]
                         - self.out[None, :, :])**2).sum(axis=2))
        assert self.out.shape == (16, 3)
        assert dist[np.triu_indices(16, k=1)].min() >= 4.0 - 1.0e-12
        assert np.all(abs(self.out.mean(axis=0)) < 1.0e-12)
        return

    def test_given_unit_means(self):
        """Test that explicit unit means replace the lattice layout."""
        means = np.arange(2 * 1 * 2, dtype=float).reshape((2, 1, 2)) * 10.0
        self.out = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=2, unit_hmm_states=1, feature_dim=2, n_utterances=1,
            unit_means=means.tolist()))

        assert np.array_equal(self.out.params.unit_means, means)
        return


class TestWriteSynthetic(object):
    """Unit tests for writing a synthetic corpus to disk."""

    def setup_method(self):
        """Create a temporary directory and a small corpus."""
        self.tempdir = tempfile.TemporaryDirectory()
        self.corp = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=3, lexicon=('01', '2'), n_utterances=4,
            silence_prob=0.3, seed=5))
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.tempdir, self.corp, self.out
        return

    def test_write_and_load(self):
        """Test that the written corpus loads back with its gold data."""
        path = synthetic.write_synthetic(self.corp, self.tempdir.name)
        self.out = corpus.load_manifest(path)

        assert_lists_equal(self.out.ids, self.corp.manifest.ids)
        feats = corpus.load_corpus_features(self.out)
        for utt in self.out.utterances:
            assert os.path.isfile(utt.feature_path)
            assert feats[utt.id].n_frames \
                == self.corp.features[utt.id].n_frames
            assert utt.silences == self.corp.manifest[utt.id].silences
            assert_lists_equal(utt.gold_units.labels,
                               self.corp.gold_units[utt.id].labels)
            assert_lists_equal(utt.gold_words.labels,
                               self.corp.gold_words[utt.id].labels)
        return
