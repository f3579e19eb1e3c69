#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Tests for the unit sequence transformations."""

import collections
import logging

import numpy as np
from pysat.utils.testing import assert_lists_equal
from pysat.utils.testing import eval_bad_input
import pytest

from uwsPipe.utils import corpus
from uwsPipe.utils import scoring
from uwsPipe.utils import units


def _seq(uid, labels, hop_s=0.01):
    """Build a unit sequence with one hop per token."""
    return corpus.UnitSequence(uid, tuple(
        corpus.Token(lab, round(i * hop_s, 9), round((i + 1) * hop_s, 9))
        for i, lab in enumerate(labels)))


class TestMergeWindows(object):
    """Unit tests for run-length merging of frame labels."""

    def setup_method(self):
        """Create a clean testing setup."""
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.out
        return

    def test_merge_runs(self):
        """Test run-length merging with frame time-stamps."""
        self.out = units.merge_windows([7, 7, 7, 2, 2, 7], hop_s=0.01)

        assert self.out.tokens == (corpus.Token('7', 0.0, 0.03),
                                   corpus.Token('2', 0.03, 0.05),
                                   corpus.Token('7', 0.05, 0.06))
        assert self.out.variant == corpus.Variant.RAW
        return

    def test_single_frame(self):
        """Test that a single frame gives a single token."""
        self.out = units.merge_windows([4])
        assert self.out.tokens == (corpus.Token('4', 0.0, 0.01),)
        return

    @pytest.mark.parametrize("n_frames", [2, 17, 350])
    def test_constant_labels(self, n_frames):
        """Test that equal labels merge into one token spanning all frames.

        Parameters
        ----------
        n_frames : int
            Number of frames

        """
        self.out = units.merge_windows([3] * n_frames)

        assert len(self.out) == 1
        assert abs(self.out.tokens[0].end_s - n_frames * 0.01) < 1.0e-9
        return

    def test_empty_labels(self):
        """Test that an empty label list is rejected."""
        eval_bad_input(units.merge_windows, ValueError, "no frame labels",
                       input_args=[[]])
        return

    def test_expand_inverts_merge(self):
        """Test that expanding merged frames restores the frame labels."""
        rng = np.random.default_rng(3)
        for _ in range(20):
            labels = [str(lab) for lab in rng.integers(0, 4, size=60)]
            self.out = units.expand_to_frames(units.merge_windows(labels))
            assert_lists_equal(self.out, labels)
        return


class TestSilence(object):
    """Unit tests for silence removal and reintroduction."""

    def setup_method(self):
        """Create a sequence with a unit inside a silence window."""
        self.seq = corpus.UnitSequence('utt', (
            corpus.Token('a', 0.0, 0.1), corpus.Token('b', 0.1, 0.2),
            corpus.Token('s', 0.2, 0.4), corpus.Token('c', 0.4, 0.5),
            corpus.Token('d', 0.5, 0.6)))
        self.silences = [(0.2, 0.4)]
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.seq, self.silences, self.out
        return

    def test_strip_silence_tokens(self):
        """Test removal of the discretizer's silence label."""
        seq = corpus.UnitSequence('utt', (
            corpus.Token('1', 0.0, 0.1), corpus.Token('sil', 0.1, 0.2),
            corpus.Token('2', 0.2, 0.3)))
        self.out = units.strip_silence_tokens(seq)

        assert_lists_equal(self.out.labels, ['1', '2'])
        assert self.out.variant == corpus.Variant.RAW
        return

    def test_no_silence_is_identity(self):
        """Test that removal without silences only changes the marker."""
        self.out = units.remove_silence_units(self.seq, [])

        assert self.out.tokens == self.seq.tokens
        assert self.out.variant == corpus.Variant.PLUS_SIL
        return

    def test_midpoint_rule(self):
        """Test that a unit with its midpoint inside a silence is dropped."""
        seq = corpus.UnitSequence('utt', (corpus.Token('4', 0.9, 1.0),
                                          corpus.Token('5', 1.0, 1.04),
                                          corpus.Token('6', 1.04, 1.3)))
        self.out = units.remove_silence_units(seq, [(0.98, 1.10)])

        assert_lists_equal(self.out.labels, ['4', '6'])
        assert self.out.removed == (corpus.Token('5', 1.0, 1.04),)
        assert self.out.silences == ((0.98, 1.10),)
        return

    def test_removal_shrinks_sequence(self):
        """Test that removal with a silence drops the silent unit."""
        self.out = units.remove_silence_units(self.seq, self.silences)

        assert_lists_equal(self.out.labels, ['a', 'b', 'c', 'd'])
        assert len(self.out) < len(self.seq)
        return

    def test_removal_twice(self):
        """Test that silence cannot be removed twice."""
        self.out = units.remove_silence_units(self.seq, self.silences)
        eval_bad_input(units.remove_silence_units, ValueError,
                       "silence already removed",
                       input_args=[self.out, self.silences])
        return

    def test_reintroduce_splits_word(self):
        """Test that a silence inside a word splits it at the silence."""
        plus_sil = units.remove_silence_units(self.seq, self.silences)
        seg = corpus.Segmentation.from_starts(plus_sil, [])
        self.out = units.reintroduce_silence(seg, self.silences)

        assert_lists_equal(self.out.labels, ['a-b', corpus.SILENCE_WORD,
                                             'c-d'])
        assert_lists_equal(scoring.project_boundaries(self.out), [0.2, 0.4])
        return

    def test_reintroduce_without_silence(self):
        """Test that reintroduction without silences is the identity."""
        seg = corpus.Segmentation.from_starts(self.seq, [2])
        self.out = units.reintroduce_silence(seg, [])
        assert self.out == seg
        return

    def test_edge_silence_not_reintroduced(self):
        """Test that silences at the utterance edges add no word."""
        seq = corpus.UnitSequence('utt', (corpus.Token('a', 0.1, 0.2),
                                          corpus.Token('b', 0.2, 0.3)))
        seg = corpus.Segmentation.from_starts(seq, [])
        self.out = units.reintroduce_silence(seg, [(0.0, 0.1), (0.3, 0.5)])
        assert self.out == seg
        return

    @pytest.mark.parametrize("silence", [(0.05, 0.14), (0.26, 0.4)])
    def test_silence_over_edge_token(self, silence):
        """Test that a silence over a kept edge token adds no word.

        Parameters
        ----------
        silence : tuple
            Silence overlapping the first or last token, midpoint outside

        """
        seq = corpus.UnitSequence('utt', (corpus.Token('a', 0.1, 0.2),
                                          corpus.Token('b', 0.2, 0.3)))
        seg = corpus.Segmentation.from_starts(seq, [])
        self.out = units.reintroduce_silence(seg, [silence])
        assert self.out == seg
        return

    def test_silence_clipped_to_gap(self):
        """Test that a silence word spans only the gap between tokens."""
        seq = corpus.UnitSequence('utt', (corpus.Token('4', 0.9, 1.0),
                                          corpus.Token('5', 1.0, 1.04),
                                          corpus.Token('6', 1.04, 1.3)))
        plus_sil = units.remove_silence_units(seq, [(0.98, 1.10)])
        seg = corpus.Segmentation.from_starts(plus_sil, [])
        self.out = units.reintroduce_silence(seg, [(0.98, 1.10)])

        assert_lists_equal(self.out.labels, ['4', corpus.SILENCE_WORD, '6'])
        assert self.out.words[1].tokens == (
            corpus.Token(corpus.SILENCE_WORD, 1.0, 1.04),)
        for left, right in zip(self.out.words[:-1], self.out.words[1:]):
            assert left.end_s <= right.start_s
        return


class TestBpe(object):
    """Unit tests for byte pair encoding of unit sequences."""

    def setup_method(self):
        """Create a clean testing setup."""
        self.seq = _seq('utt', ['a', 'b', 'a', 'b'])
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.seq, self.out
        return

    def test_single_merge(self):
        """Test that the most frequent pair is merged first."""
        model = units.bpe_learn([self.seq], 3)
        self.out = units.bpe_apply(self.seq, model)

        assert model.merges == (('a', 'b', 'ab'),)
        assert_lists_equal(self.out.labels, ['ab', 'ab'])
        assert self.out.tokens[1] == corpus.Token('ab', 0.02, 0.04)
        return

    def test_vocab_at_alphabet_size(self):
        """Test that a vocabulary of the alphabet size learns no merges."""
        model = units.bpe_learn([self.seq], 2)
        self.out = units.bpe_apply(self.seq, model)

        assert model.merges == ()
        assert self.out.tokens == self.seq.tokens
        return

    def test_merged_label_collision(self):
        """Test that a merge never reuses an existing label."""
        seq = _seq('utt', ['1', '12', '1', '12', '112'])
        model = units.bpe_learn([seq], 4)

        assert model.merges == (('1', '12', '1+12'),)
        return

    def test_random_corpus_properties(self):
        """Test token counts and detokenization on a random corpus."""
        rng = np.random.default_rng(11)
        corp = [_seq('u{:d}'.format(i), [str(lab) for lab in
                                         rng.integers(0, 4, size=30)])
                for i in range(10)]
        model = units.bpe_learn(corp, 12)

        for seq in corp:
            self.out = units.bpe_apply(seq, model)
            assert len(self.out) <= len(seq)
            assert_lists_equal(units.bpe_detokenize(self.out, model).labels,
                               seq.labels)
            assert self.out.tokens[0].start_s == seq.tokens[0].start_s
            assert self.out.tokens[-1].end_s == seq.tokens[-1].end_s
        return

    def test_unknown_label(self):
        """Test that labels outside the base alphabet are rejected."""
        model = units.bpe_learn([self.seq], 3)
        eval_bad_input(units.bpe_apply, ValueError, "not in the BPE alphabet",
                       input_args=[_seq('x', ['c']), model])
        return

    def test_empty_corpus(self):
        """Test that learning needs at least one token."""
        eval_bad_input(units.bpe_learn, ValueError, "empty corpus",
                       input_args=[[corpus.UnitSequence('x', ())], 5])
        return


class TestUnitStats(object):
    """Unit tests for corpus unit statistics."""

    def setup_method(self):
        """Create a clean testing setup."""
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.out
        return

    def test_direct_counts(self):
        """Test the statistics of a single short sequence."""
        self.out = units.unit_stats([_seq('u', ['1', '2', '1'])])

        assert self.out.n_distinct_units == 2
        assert self.out.total_tokens == 3
        assert self.out.mean_seq_len == 3.0
        assert self.out.max_seq_len == 3
        assert abs(self.out.units_per_second - 100.0) < 1.0e-9
        assert self.out.over_limit == ()
        return

    def test_empty_and_long_sequences(self, caplog):
        """Test warnings for empty and over-long sequences."""
        seqs = [_seq('u1', ['1', '2', '1']), corpus.UnitSequence('u2', ()),
                _seq('u3', ['3'])]
        with caplog.at_level(logging.WARN, logger='uwsPipe'):
            self.out = units.unit_stats(seqs, max_len=2)

        assert self.out.mean_seq_len == 2.0
        assert self.out.empty == ('u2',)
        assert self.out.over_limit == ('u1',)
        assert len(caplog.records) == 2, "unexpected number of warnings"
        assert caplog.records[0].message.find("no units left in u2") >= 0
        assert caplog.records[1].message.find("unit limit") >= 0
        return

    def test_independent_recount(self):
        """Test the counts against a single-pass recount."""
        rng = np.random.default_rng(5)
        seqs = [_seq('u{:d}'.format(i), [str(lab) for lab in rng.integers(
            0, 6, size=rng.integers(1, 40))]) for i in range(25)]
        self.out = units.unit_stats(seqs)

        counter = collections.Counter()
        longest = 0
        for seq in seqs:
            counter.update(seq.labels)
            longest = max(longest, len(seq))
        assert self.out.n_distinct_units == len(counter)
        assert self.out.total_tokens == sum(counter.values())
        assert self.out.max_seq_len == longest
        assert abs(self.out.mean_seq_len
                   - sum(counter.values()) / len(seqs)) < 1.0e-12
        return

    def test_plus_sil_never_longer(self):
        """Test that silence removal never adds tokens."""
        rng = np.random.default_rng(9)
        seqs = [_seq('u{:d}'.format(i), [str(lab) for lab in
                                         rng.integers(0, 3, size=50)])
                for i in range(5)]
        plus_sil = [units.remove_silence_units(seq, [(0.1, 0.2)])
                    for seq in seqs]

        assert units.unit_stats(plus_sil).total_tokens \
            <= units.unit_stats(seqs).total_tokens
        return

    def test_no_sequences(self):
        """Test that at least one sequence is needed."""
        eval_bad_input(units.unit_stats, ValueError, "no unit sequences",
                       input_args=[[]])
        return
