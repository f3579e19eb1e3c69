#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Unit tests for the phone-loop HMM methods."""

import itertools
import logging
import os
import tempfile

import numpy as np
from pysat.utils.testing import eval_bad_input
import pytest
from scipy import special

from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.utils import corpus
from uwsPipe.utils import synthetic


def _random_loop(rng, n_units=2, n_states=2, n_comp=2):
    """Build a one-dimensional phone loop with random parameters."""
    units = list()
    for _ in range(n_units):
        stay = rng.uniform(0.2, 0.8, size=n_states)
        weights = rng.dirichlet(np.ones(n_comp), size=n_states)
        units.append(hmm.UnitHmm(np.stack([stay, 1.0 - stay], axis=1),
                                 weights,
                                 rng.normal(0.0, 2.0,
                                            size=(n_states, n_comp, 1)),
                                 rng.uniform(0.5, 2.0,
                                             size=(n_states, n_comp, 1))))
    return hmm.PhoneLoop(units, rng.dirichlet(np.ones(n_units)))


def _frame_loglik(frames, loop):
    """Evaluate the state log-likelihoods directly."""
    n_frames = frames.shape[0]
    out = np.zeros((n_frames, loop.n_units, loop.n_states))
    for u, unit in enumerate(loop.units):
        for s in range(unit.n_states):
            dens = np.log(unit.weights[s])[None, :] - 0.5 * (
                np.log(2.0 * np.pi * unit.variances[s, :, 0])[None, :]
                + (frames - unit.means[s, :, 0][None, :])**2
                / unit.variances[s, :, 0][None, :])
            out[:, u, s] = special.logsumexp(dens, axis=1)
    return out


def _enumerate_paths(frames, loop):
    """Score every state path of the loop by brute force."""
    n_frames = frames.shape[0]
    n_states = loop.n_states
    frame_ll = _frame_loglik(frames, loop)
    trans = np.stack([unit.trans for unit in loop.units])

    paths = list()
    for flat in itertools.product(range(loop.n_units * n_states),
                                  repeat=n_frames):
        path = [(int(code // n_states), int(code % n_states))
                for code in flat]
        if path[0][1] != 0 or path[-1][1] != n_states - 1:
            continue

        logp = np.log(loop.pi[path[0][0]]) + frame_ll[0, path[0][0], 0]
        for t in range(1, n_frames):
            (u0, s0), (u1, s1) = path[t - 1], path[t]
            if u1 == u0 and s1 == s0:
                step = trans[u0, s0, 0]
            elif u1 == u0 and s1 == s0 + 1:
                step = trans[u0, s0, 1]
            elif s0 == n_states - 1 and s1 == 0:
                step = trans[u0, s0, 1] * loop.pi[u1]
            else:
                step = 0.0
            if step == 0.0:
                logp = -np.inf
                break
            logp += np.log(step) + frame_ll[t, u1, s1]

        if np.isfinite(logp):
            logp += np.log(trans[path[-1][0], -1, 1])
            paths.append((path, logp))
    return paths


class TestInference(object):
    """Unit tests for forward-backward and Viterbi decoding."""

    def setup_method(self):
        """Create a random loop and a short utterance."""
        rng = np.random.default_rng(17)
        self.loop = _random_loop(rng)
        self.frames = rng.normal(0.0, 2.0, size=(5, 1))
        self.paths = _enumerate_paths(self.frames, self.loop)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.loop, self.frames, self.paths, self.out
        return

    def test_log_marginal(self):
        """Test the log marginal against exhaustive enumeration."""
        self.out = hmm.forward_backward(self.frames, self.loop)
        target = special.logsumexp([logp for _, logp in self.paths])

        assert abs(self.out.log_marginal - target) < 1.0e-10
        return

    def test_state_posteriors(self):
        """Test the state occupation probabilities against enumeration."""
        self.out = hmm.forward_backward(self.frames, self.loop)
        norm = special.logsumexp([logp for _, logp in self.paths])

        target = np.zeros(self.out.state_posteriors.shape)
        for path, logp in self.paths:
            for t, (unit, state) in enumerate(path):
                target[t, unit, state] += np.exp(logp - norm)

        assert np.all(abs(self.out.state_posteriors - target) < 1.0e-10)
        assert np.all(abs(self.out.unit_posteriors.sum(axis=1) - 1.0)
                      < 1.0e-10)
        return

    def test_expected_counts(self):
        """Test the transition and entry counts against enumeration."""
        self.out = hmm.forward_backward(self.frames, self.loop)
        norm = special.logsumexp([logp for _, logp in self.paths])
        last = self.loop.n_states - 1

        counts = np.zeros(self.out.transition_counts.shape)
        entries = np.zeros(self.loop.n_units)
        for path, logp in self.paths:
            weight = np.exp(logp - norm)
            entries[path[0][0]] += weight
            for (u0, s0), (u1, s1) in zip(path[:-1], path[1:]):
                if u1 == u0 and s1 == s0:
                    counts[u0, s0, 0] += weight
                elif s0 == last and s1 == 0:
                    counts[u0, s0, 1] += weight
                    entries[u1] += weight
                else:
                    counts[u0, s0, 1] += weight
            counts[path[-1][0], last, 1] += weight

        assert np.all(abs(self.out.transition_counts - counts) < 1.0e-10)
        assert np.all(abs(self.out.unit_entries - entries) < 1.0e-10)
        return

    def test_best_path(self):
        """Test the Viterbi path against the best enumerated path."""
        units, states, self.out = hmm.best_path(
            self.frames, hmm.point_log_params(self.loop))
        path, logp = max(self.paths, key=lambda item: item[1])

        assert abs(self.out - logp) < 1.0e-10
        assert [(int(u), int(s)) for u, s in zip(units, states)] == path
        return

    def test_viterbi_decode(self):
        """Test that decoding covers the utterance with merged tokens."""
        seq = corpus.FrameSequence('u', self.frames, hop_s=0.01)
        self.out = hmm.viterbi_decode(seq, self.loop)

        assert self.out.utterance_id == 'u'
        assert self.out.tokens[0].start_s == 0.0
        assert abs(self.out.tokens[-1].end_s - 0.05) < 1.0e-9
        for left, right in zip(self.out.tokens[:-1], self.out.tokens[1:]):
            assert left.end_s == right.start_s
        return

    def test_no_final_exit(self):
        """Test that a loop that never leaves its units is degenerate."""
        unit = hmm.UnitHmm([[1.0, 0.0]], [[1.0]], [[[0.0]]], [[[1.0]]])
        loop = hmm.PhoneLoop([unit], [1.0])
        eval_bad_input(hmm.forward_backward, ValueError,
                       "no path ends a unit at the last frame",
                       input_args=[self.frames, loop])
        return

    def test_dimension_mismatch(self):
        """Test that frames must match the model dimension."""
        eval_bad_input(hmm.forward_backward, ValueError,
                       "do not match dimension 1",
                       input_args=[np.zeros((3, 2)), self.loop])
        return

    def test_expected_without_posterior(self):
        """Test that expected mode needs a posterior."""
        eval_bad_input(hmm.forward_backward, ValueError,
                       "expected mode needs a variational posterior",
                       input_args=[self.frames, self.loop],
                       input_kwargs={'expected': True})
        return


class TestModelChecks(object):
    """Unit tests for the model invariants."""

    @pytest.mark.parametrize("kwargs,msg", [
        ({'trans': [[0.5, 0.6]]}, "transition rows must sum to 1"),
        ({'weights': [[0.5, 0.4]]}, "mixture weights must lie"),
        ({'variances': [[[0.0], [1.0]]]}, "variances must be positive"),
        ({'means': [[[0.0, 1.0], [1.0, 1.0]]]}, "inconsistent unit HMM")])
    def test_bad_unit(self, kwargs, msg):
        """Test rejected unit HMMs.

        Parameters
        ----------
        kwargs : dict
            Replaced parameters
        msg : str
            Expected error message fragment

        """
        params = {'trans': [[0.5, 0.5]], 'weights': [[0.5, 0.5]],
                  'means': [[[0.0], [1.0]]], 'variances': [[[1.0], [1.0]]]}
        params.update(kwargs)
        eval_bad_input(hmm.UnitHmm, ValueError, msg, input_kwargs=params)
        return

    @pytest.mark.parametrize("kwargs,msg", [
        ({'pi': [0.7, 0.7]}, "unit weights must lie on the simplex"),
        ({'silence_unit': 2}, "silence unit 2 out of range"),
        ({'units': []}, "needs at least one unit")])
    def test_bad_loop(self, kwargs, msg):
        """Test rejected phone loops.

        Parameters
        ----------
        kwargs : dict
            Replaced parameters
        msg : str
            Expected error message fragment

        """
        unit = hmm.UnitHmm([[0.5, 0.5]], [[1.0]], [[[0.0]]], [[[1.0]]])
        params = {'units': [unit, unit], 'pi': [0.5, 0.5]}
        params.update(kwargs)
        eval_bad_input(hmm.PhoneLoop, ValueError, msg, input_kwargs=params)
        return

    def test_bad_hyper(self):
        """Test rejected hyperparameters."""
        eval_bad_input(hmm.AudHyperParams, ValueError,
                       "prior parameters must be positive",
                       input_kwargs={'mean_count': 0.0})
        return

    @pytest.mark.parametrize("masks,target", [
        (None, None), ({'u': np.zeros(3, dtype=bool)}, None),
        ({'u': np.array([False, True, False])}, 0)])
    def test_resolve_silence_unit(self, masks, target):
        """Test that unit 0 is reserved only for annotated silence.

        Parameters
        ----------
        masks : dict or NoneType
            Silence masks
        target : int or NoneType
            Expected silence unit

        """
        assert hmm.resolve_silence_unit(masks, None) == target
        return


class TestTraining(object):
    """Unit tests for variational Bayes training."""

    def setup_method(self):
        """Create a small synthetic corpus."""
        self.corp = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=3, lexicon=('01', '12', '2'), n_utterances=6,
            silence_prob=0.4, seed=8))
        self.hyper = hmm.AudHyperParams(n_states=2, n_components=1)
        self.tempdir = tempfile.TemporaryDirectory()
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.corp, self.hyper, self.tempdir, self.out
        return

    def test_monotone_elbo(self, caplog):
        """Test that the lower bound never decreases."""
        with caplog.at_level(logging.WARN, logger='uwsPipe'):
            self.out, state = hmm.train_hmm(self.corp.features, n_units=5,
                                            hyper=self.hyper, n_iters=6,
                                            seed=1)

        assert len(state.elbo) == 7
        for prev, cur in zip(state.elbo[:-1], state.elbo[1:]):
            assert cur >= prev - 1.0e-6 * abs(prev), \
                "lower bound decreased from {:} to {:}".format(prev, cur)
        assert len(caplog.records) == 0, "unexpected warnings"
        return

    def test_deterministic(self):
        """Test that training is reproducible for a fixed seed."""
        self.out, state = hmm.train_hmm(self.corp.features, n_units=4,
                                        hyper=self.hyper, n_iters=2, seed=3)
        again, again_state = hmm.train_hmm(self.corp.features, n_units=4,
                                           hyper=self.hyper, n_iters=2,
                                           seed=3)

        assert state.elbo == again_state.elbo
        assert np.array_equal(self.out.pi, again.pi)
        return

    def test_silence_unit(self):
        """Test that annotated silence reserves unit 0."""
        masks = general.silence_masks(self.corp.manifest, self.corp.features)
        self.out, _ = hmm.train_hmm(self.corp.features, n_units=4,
                                    hyper=self.hyper, n_iters=1,
                                    silence=masks)

        assert self.out.silence_unit == 0
        assert self.out.n_units == 4
        return

    def test_save_and_load(self):
        """Test that a trained loop survives a save and load."""
        self.out, _ = hmm.train_hmm(self.corp.features, n_units=3,
                                    hyper=self.hyper, n_iters=1)
        path = os.path.join(self.tempdir.name, 'model.h5')
        hmm.save_phone_loop(self.out, path, kind='hmm',
                            arrays={'embedding': np.ones(2)})

        loop, extra, attrs = hmm.load_phone_loop(path)
        assert attrs['kind'] == 'hmm'
        assert np.array_equal(extra['embedding'], np.ones(2))
        assert np.array_equal(loop.pi, self.out.pi)
        for unit, orig in zip(loop.units, self.out.units):
            assert np.array_equal(unit.means, orig.means)
            assert np.array_equal(unit.variances, orig.variances)
        assert np.array_equal(loop.posterior.rate, self.out.posterior.rate)

        eval_bad_input(hmm.load_loop_of_kind, ValueError,
                       'holds a "hmm" model, not "shmm"',
                       input_args=['shmm', path])
        return

    def test_train_unit_hmm(self):
        """Test training a single unit from labelled segments."""
        segments = [np.random.default_rng(i).normal(size=(6, 2))
                    for i in range(4)]
        self.out = hmm.train_unit_hmm(segments, hyper=self.hyper, n_iters=2)

        assert self.out.means.shape == (2, 1, 2)
        return

    def test_train_unit_hmm_short_segments(self):
        """Test that segments shorter than the unit are not usable."""
        eval_bad_input(hmm.train_unit_hmm, ValueError,
                       "insufficient data: no segment has 2 frames",
                       input_args=[[np.zeros((1, 2))]],
                       input_kwargs={'hyper': self.hyper})
        return
