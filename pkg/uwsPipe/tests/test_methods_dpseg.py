#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Unit tests for the Dirichlet-process segmentation methods."""

import math

import numpy as np
from pysat.utils.testing import assert_lists_equal
from pysat.utils.testing import eval_bad_input
import pytest

from uwsPipe.segmenters.methods import dpseg
from uwsPipe.utils import corpus


def _seq(uid, labels):
    """Build a unit sequence with one 10 ms token per label."""
    return corpus.UnitSequence(uid, [corpus.Token(lab, 0.01 * i,
                                                  0.01 * (i + 1))
                                     for i, lab in enumerate(labels)])


def _sequences():
    """Build a small corpus of unit sequences."""
    return {uid: _seq(uid, labels) for uid, labels in
            [('a', 'abab'), ('b', 'ab'), ('c', 'ababc'), ('d', 'ba')]}


class TestDpsegConfig(object):
    """Unit tests for the segmenter settings."""

    def test_temperature_blocks(self):
        """Test that each temperature covers an equal share of sweeps."""
        cfg = dpseg.DpsegConfig()

        assert cfg.temperature(0) == 2.0
        assert cfg.temperature(9) == 2.0
        assert cfg.temperature(10) == cfg.anneal[1]
        assert cfg.temperature(99) == 1.0
        return

    @pytest.mark.parametrize("kwargs,msg", [
        ({'alpha0': 0.0}, "alpha0 must be positive"),
        ({'p_boundary': 1.0}, "p_boundary must lie in (0, 1)"),
        ({'n_sweeps': 0}, "n_sweeps must be positive"),
        ({'anneal': (1.0, 0.0)}, "anneal needs positive temperatures"),
        ({'anneal': ()}, "anneal needs positive temperatures"),
        ({'rho': -1.0}, "rho must be positive"),
        ({'init_boundary_prob': 1.5}, "must lie in [0, 1]")])
    def test_bad_config(self, kwargs, msg):
        """Test rejected settings.

        Parameters
        ----------
        kwargs : dict
            Settings
        msg : str
            Expected error message fragment

        """
        eval_bad_input(dpseg.DpsegConfig, ValueError, msg,
                       input_kwargs=kwargs)
        return


class TestCrpProbabilities(object):
    """Unit tests for the base and predictive word probabilities."""

    def setup_method(self):
        """Create tables holding a few words."""
        self.cfg = dpseg.DpsegConfig(alpha0=1.5, rho=3.0)
        self.state = dpseg.CrpState(alphabet_size=3)
        for word, final in [(('a',), False), (('a', 'b'), True),
                            (('a',), True)]:
            self.state.add(word, final)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.cfg, self.state, self.out
        return

    def test_p0(self):
        """Test the geometric-length, uniform-unit base distribution."""
        self.out = dpseg.p0(('a', 'b'), self.cfg, 3)
        assert abs(self.out - 0.5 * 0.5 / 9.0) < 1.0e-15
        return

    def test_p0_sums_to_one(self):
        """Test that the base distribution sums to one over lengths."""
        self.out = sum([dpseg.p0(('x',) * length, self.cfg, 2) * 2**length
                        for length in range(1, 60)])
        assert abs(self.out - 1.0) < 1.0e-12
        return

    def test_empty_word(self):
        """Test that empty words have no base probability."""
        eval_bad_input(dpseg.p0, ValueError,
                       "words must contain at least one unit",
                       input_args=[(), self.cfg, 3])
        return

    def test_predictive(self):
        """Test the predictive probability of seen and unseen words."""
        self.out = dpseg.crp_predictive(('a',), self.state, self.cfg)
        assert abs(self.out - (2.0 + 1.5 * 0.5 / 3.0) / 4.5) < 1.0e-15

        self.out = dpseg.crp_predictive(['c'], self.state, self.cfg)
        assert abs(self.out - (1.5 * 0.5 / 3.0) / 4.5) < 1.0e-15
        return

    def test_remove_drops_empty_tables(self):
        """Test that removing the last token of a word drops its table."""
        self.state.remove(('a', 'b'), True)

        assert ('a', 'b') not in self.state.counts
        assert self.state.n_words == 2
        assert self.state.n_final == 1
        return

    def test_joint_matches_chain_rule(self):
        """Test the joint probability against sequential predictives."""
        state = dpseg.CrpState(alphabet_size=3)
        self.out = 0.0
        half = 0.5 * self.cfg.rho
        for word, final in [(('a',), False), (('a', 'b'), True),
                            (('a',), True), (('c', 'a', 'b'), False)]:
            num = state.n_final + half if final \
                else state.n_words - state.n_final + half
            self.out += math.log(dpseg.crp_predictive(word, state, self.cfg))
            self.out += math.log(num / (state.n_words + self.cfg.rho))
            state.add(word, final)

        assert abs(dpseg.joint_log_prob(state, self.cfg) - self.out) < 1.0e-8
        return

    def test_empty_joint(self):
        """Test that an empty segmentation has probability one."""
        assert dpseg.joint_log_prob(dpseg.CrpState(), self.cfg) == 0.0
        return

    @pytest.mark.parametrize("left,right,final", [
        (('a',), ('b',), False), (('a',), ('a',), True),
        (('a', 'b'), ('a', 'b'), False), (('c',), ('a', 'b', 'c'), True)])
    @pytest.mark.parametrize("end_term", [True, False])
    def test_split_probability(self, left, right, final, end_term):
        """Test that the split term equals the change in joint probability.

        Parameters
        ----------
        left : tuple
            Word before the boundary
        right : tuple
            Word after the boundary
        final : bool
            Whether the right word ends its utterance
        end_term : bool
            Include the utterance-end factor

        """
        cfg = dpseg.DpsegConfig(alpha0=1.5, rho=3.0,
                                utterance_boundary_term=end_term)

        def log_base(word):
            return dpseg.log_p0(word, cfg.p_boundary, 3)

        self.out = dpseg._log_predictive(left, 0, 0, self.state, cfg,
                                         log_base) \
            + dpseg._log_final(False, 0, 0, self.state, cfg) \
            + dpseg._log_predictive(right, int(left == right), 1,
                                    self.state, cfg, log_base) \
            + dpseg._log_final(final, 1, 0, self.state, cfg)

        before = dpseg.joint_log_prob(self.state, cfg)
        self.state.add(left, False)
        self.state.add(right, final)
        after = dpseg.joint_log_prob(self.state, cfg)

        assert abs(after - before - self.out) < 1.0e-8
        return


class TestBoundaryBookkeeping(object):
    """Unit tests for the table counts kept while resampling."""

    def setup_method(self):
        """Create the sequences and a random initial state."""
        self.sequences = _sequences()
        self.cfg = dpseg.DpsegConfig(alpha0=1.0)
        self.state = dpseg.init_state(self.sequences, self.cfg,
                                      np.random.default_rng(3))
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.sequences, self.cfg, self.state, self.out
        return

    def _sweep(self, uniforms):
        """Resample every boundary once with the given uniform draws."""
        def log_base(word):
            return dpseg.log_p0(word, self.cfg.p_boundary,
                                self.state.alphabet_size)

        draws = iter(uniforms)
        for uid, seq in self.sequences.items():
            bounds = self.state.boundaries[uid]
            for pos in range(bounds.shape[0]):
                dpseg._resample(seq.labels, bounds, pos, self.state,
                                self.cfg, 1.0, next(draws), log_base)
        return

    def test_words_of(self):
        """Test splitting labels at boundary flags."""
        self.out = dpseg.words_of(['a', 'b', 'c'], [True, False])
        assert_lists_equal(self.out, [('a',), ('b', 'c')])
        assert dpseg.words_of([], []) == []
        return

    def test_initial_tables(self):
        """Test that the initial tables match a recount."""
        self.out, n_final = dpseg.recount(self.sequences,
                                          self.state.boundaries)

        assert self.out == self.state.counts
        assert n_final == self.state.n_final == 4
        assert self.state.alphabet_size == 3
        return

    def test_tables_after_resampling(self):
        """Test that random resampling keeps the tables consistent."""
        rng = np.random.default_rng(8)
        for _ in range(5):
            self._sweep(rng.random(100))

        self.out, n_final = dpseg.recount(self.sequences,
                                          self.state.boundaries)
        assert self.out == self.state.counts
        assert n_final == self.state.n_final
        assert sum(self.out.values()) == self.state.n_words
        return

    def test_no_cut_at_unit_draw(self):
        """Test that a uniform draw of one removes every boundary."""
        self._sweep(np.ones(100))

        for uid, seq in self.sequences.items():
            assert not np.any(self.state.boundaries[uid])
        assert self.state.n_words == 4
        assert self.state.counts[tuple('abab')] == 1
        return


class TestGibbsSegment(object):
    """Unit tests for the collapsed Gibbs sampler."""

    def setup_method(self):
        """Create the sequences and settings."""
        self.sequences = _sequences()
        self.cfg = dpseg.DpsegConfig(alpha0=2.0, n_sweeps=6,
                                     anneal=(2.0, 1.0), seed=4)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.sequences, self.cfg, self.out
        return

    def test_segmentations_cover_units(self):
        """Test that every utterance is split into its own units."""
        self.out, trace = dpseg.gibbs_segment(self.sequences, self.cfg)

        assert_lists_equal(list(self.out.keys()), ['a', 'b', 'c', 'd'])
        for uid, seg in self.out.items():
            assert seg.tokens == list(self.sequences[uid].tokens)
        return

    def test_trace(self):
        """Test the sweep trace and the kept sweep."""
        self.out, trace = dpseg.gibbs_segment(self.sequences, self.cfg)
        best = trace.attrs['best_sweep']

        assert_lists_equal(list(trace.index), list(range(1, 7)))
        assert_lists_equal(list(trace['temperature']),
                           [2.0, 2.0, 2.0, 1.0, 1.0, 1.0])
        assert trace.loc[best, 'log_prob'] == trace['log_prob'].max()
        assert trace.loc[best, 'n_words'] == sum(
            [len(seg) for seg in self.out.values()])
        return

    def test_deterministic(self):
        """Test that a fixed seed reproduces the segmentation."""
        self.out, _ = dpseg.gibbs_segment(self.sequences, self.cfg)
        again, _ = dpseg.gibbs_segment(list(self.sequences.values()),
                                       self.cfg)

        for uid in self.sequences.keys():
            assert_lists_equal(self.out[uid].labels, again[uid].labels)
        return

    def test_single_unit_utterance(self):
        """Test that a one-unit utterance is one word."""
        self.out, _ = dpseg.gibbs_segment({'s': _seq('s', 'a')}, self.cfg)
        assert_lists_equal(self.out['s'].labels, ['a'])
        return

    def test_too_long(self):
        """Test that overlong sequences are rejected by name."""
        cfg = dpseg.DpsegConfig(max_len=4)
        eval_bad_input(dpseg.gibbs_segment, ValueError,
                       "utterance c has 5 units, more than the 4",
                       input_args=[self.sequences, cfg])
        return

    def test_restart_seeds(self):
        """Test that restarts count up from the base seed."""
        assert_lists_equal(dpseg.restart_seeds(5, 3), [5, 6, 7])
        return
