#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Unit tests for the subspace and hierarchical subspace methods."""

import logging
import os
import tempfile

import numpy as np
from pysat.utils.testing import eval_bad_input
import pytest

from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.discretizers.methods import subspace
from uwsPipe.utils import corpus
from uwsPipe.utils import synthetic


def _random_units(rng, n_units, n_states=2, n_comp=1, dim=2):
    """Build unit HMMs with strictly positive probabilities."""
    units = list()
    for _ in range(n_units):
        stay = rng.uniform(0.2, 0.8, size=n_states)
        units.append(hmm.UnitHmm(
            np.stack([stay, 1.0 - stay], axis=1),
            rng.dirichlet(np.ones(n_comp) * 5.0, size=n_states),
            rng.normal(0.0, 3.0, size=(n_states, n_comp, dim)),
            rng.uniform(0.5, 2.0, size=(n_states, n_comp, dim))))
    return units


def _assert_units_close(left, right, tol=1.0e-10):
    """Compare the parameters of two unit HMMs."""
    for name in ['trans', 'weights', 'means', 'variances']:
        assert np.all(abs(getattr(left, name) - getattr(right, name)) < tol), \
            "{:s} differ".format(name)
    return


class TestPacking(object):
    """Unit tests for packing unit HMMs into vectors."""

    def setup_method(self):
        """Create random units."""
        self.units = _random_units(np.random.default_rng(4), 3)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.units, self.out
        return

    def test_layout_size(self):
        """Test the packed vector length."""
        self.out = subspace.ParamLayout(2, 1, 3)
        assert self.out.size == 4 + 2 + 6 + 6
        return

    def test_unit_round_trip(self):
        """Test that decoding inverts encoding."""
        for unit in self.units:
            self.out = subspace.unit_from_vector(
                subspace.vector_from_unit(unit), subspace.layout_of(unit))
            _assert_units_close(self.out, unit)
        return

    def test_split_join(self):
        """Test that splitting and joining blocks restores the vectors."""
        layout = subspace.layout_of(self.units[0])
        vectors = np.stack([subspace.vector_from_unit(unit)
                            for unit in self.units])
        self.out = layout.join(layout.split(vectors))
        assert np.array_equal(self.out, vectors)
        return

    def test_zero_probability(self):
        """Test that zero probabilities have no finite preimage."""
        unit = hmm.UnitHmm([[1.0, 0.0]], [[1.0]], [[[0.0]]], [[[1.0]]])
        eval_bad_input(subspace.vector_from_unit, ValueError,
                       "no finite preimage", input_args=[unit])
        return


class TestSubspaceFit(object):
    """Unit tests for fitting subspaces to known units."""

    def setup_method(self):
        """Create random units."""
        self.units = _random_units(np.random.default_rng(9), 5)
        self.tempdir = tempfile.TemporaryDirectory()
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.units, self.tempdir, self.out
        return

    def test_full_rank_fit(self):
        """Test that a full-rank subspace rebuilds the source units."""
        self.out = subspace.fit_subspace_from_units(self.units, e_dim=4)

        assert self.out.reconstruction_error < 1.0e-8
        assert self.out.embeddings.shape == (5, 4)
        for emb, unit in zip(self.out.embeddings, self.units):
            _assert_units_close(self.out.unit(emb), unit, tol=1.0e-8)
        return

    def test_projection(self):
        """Test that projecting a source unit recovers it."""
        self.out = subspace.fit_subspace_from_units(self.units, e_dim=4)
        _assert_units_close(self.out.unit(self.out.project(self.units[2])),
                            self.units[2], tol=1.0e-8)
        return

    def test_zero_dimension(self):
        """Test that a zero-dimensional subspace keeps only the offset."""
        self.out = subspace.fit_subspace_from_units(self.units, e_dim=0)

        assert self.out.e_dim == 0
        assert self.out.reconstruction_error > 0.0
        assert self.out.project(self.units[0]).shape == (0,)
        return

    @pytest.mark.parametrize("n_units,e_dim,msg", [
        (1, 2, "need at least 2 source units, got 1"),
        (3, -1, "embedding dimension must not be negative")])
    def test_bad_fit(self, n_units, e_dim, msg):
        """Test rejected subspace fits.

        Parameters
        ----------
        n_units : int
            Number of source units
        e_dim : int
            Embedding dimension
        msg : str
            Expected error message fragment

        """
        eval_bad_input(subspace.fit_subspace_from_units, ValueError, msg,
                       input_args=[self.units[:n_units]],
                       input_kwargs={'e_dim': e_dim})
        return

    def test_bad_shapes(self):
        """Test that the basis must match the layout."""
        eval_bad_input(subspace.Subspace, ValueError,
                       "do not match 14 unit parameters",
                       input_args=[np.zeros((5, 2)), np.zeros(5),
                                   subspace.layout_of(self.units[0])])
        return

    def test_save_and_load(self):
        """Test that a subspace survives a save and load."""
        sub = subspace.fit_subspace_from_units(self.units, e_dim=2,
                                               labels=list('abcde'))
        path = os.path.join(self.tempdir.name, 'sub.h5')
        subspace.save_subspace(sub, path)
        self.out = subspace.load_subspace(path)

        assert np.array_equal(self.out.W, sub.W)
        assert np.array_equal(self.out.b, sub.b)
        assert self.out.layout == sub.layout
        assert self.out.labels == ('a', 'b', 'c', 'd', 'e')
        return

    def test_unit_segments(self):
        """Test collecting gold unit frames without silence."""
        feats = {'u': corpus.FrameSequence('u', np.arange(10.0)[:, None])}
        gold = {'u': corpus.UnitSequence('u', (
            corpus.Token('b', 0.0, 0.03),
            corpus.Token(corpus.SILENCE_LABEL, 0.03, 0.05),
            corpus.Token('a', 0.05, 0.1)))}
        self.out = subspace.unit_segments(feats, gold)

        assert list(self.out.keys()) == ['a', 'b']
        assert np.array_equal(self.out['b'][0][:, 0], [0.0, 1.0, 2.0])
        assert self.out['a'][0].shape == (5, 1)
        return


class TestHierSubspace(object):
    """Unit tests for hierarchical subspaces."""

    def setup_method(self):
        """Create units for three languages."""
        rng = np.random.default_rng(21)
        self.languages = [_random_units(rng, 4) for _ in range(3)]
        self.tempdir = tempfile.TemporaryDirectory()
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.languages, self.tempdir, self.out
        return

    def test_fit(self):
        """Test the shapes and error of a hierarchical fit."""
        self.out = subspace.fit_hier_from_units(self.languages, n_lang_dim=2,
                                                e_dim=3)

        assert self.out.M.shape == (3, 14, 3)
        assert self.out.m.shape == (3, 14)
        assert self.out.alphas.shape == (3, 2)
        assert np.isfinite(self.out.reconstruction_error)
        assert self.out.reconstruction_error >= 0.0
        return

    def test_language_subspace(self):
        """Test deriving the subspace of one language."""
        hier = subspace.fit_hier_from_units(self.languages, n_lang_dim=1,
                                            e_dim=2)
        self.out = hier.subspace(hier.alphas[0])
        W, b = hier.basis(np.zeros(1))

        assert self.out.W.shape == (14, 2)
        assert np.array_equal(W, hier.M[0])
        assert np.array_equal(b, hier.m[0])
        return

    def test_no_language_dimensions(self):
        """Test that K=0 reduces to the pooled subspace."""
        self.out = subspace.fit_hier_from_units(self.languages, n_lang_dim=0,
                                                e_dim=2)
        pooled = subspace.fit_subspace_from_units(
            [unit for units in self.languages for unit in units], e_dim=2)

        assert self.out.n_lang_dim == 0
        assert np.array_equal(self.out.M[0], pooled.W)
        return

    @pytest.mark.parametrize("n_lang,n_lang_dim,msg", [
        (1, 0, "need at least 2 source languages, got 1"),
        (2, 3, "language embedding dimension 3 exceeds the 2 source")])
    def test_bad_fit(self, n_lang, n_lang_dim, msg):
        """Test rejected hierarchical fits.

        Parameters
        ----------
        n_lang : int
            Number of languages
        n_lang_dim : int
            Language embedding dimension
        msg : str
            Expected error message fragment

        """
        eval_bad_input(subspace.fit_hier_from_units, ValueError, msg,
                       input_args=[self.languages[:n_lang]],
                       input_kwargs={'n_lang_dim': n_lang_dim, 'e_dim': 2})
        return

    def test_bad_templates(self):
        """Test that template shapes must agree."""
        eval_bad_input(subspace.HierSubspace, ValueError,
                       "inconsistent template shapes",
                       input_args=[np.zeros((2, 14, 3)), np.zeros((3, 14)),
                                   subspace.layout_of(self.languages[0][0])])
        return

    def test_save_and_load(self):
        """Test that templates survive a save and load."""
        hier = subspace.fit_hier_from_units(self.languages, n_lang_dim=1,
                                            e_dim=2)
        path = os.path.join(self.tempdir.name, 'hier.h5')
        subspace.save_hier_subspace(hier, path)
        self.out = subspace.load_hier_subspace(path)

        assert np.array_equal(self.out.M, hier.M)
        assert np.array_equal(self.out.alphas, hier.alphas)
        return


class TestSubspaceTraining(object):
    """Unit tests for subspace phone-loop training."""

    def setup_method(self):
        """Create a target corpus and a subspace of matching layout."""
        self.corp = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=3, feature_dim=2, lexicon=('01', '12', '2'),
            n_utterances=5, silence_prob=0.3, seed=6))
        rng = np.random.default_rng(2)
        self.sub = subspace.fit_subspace_from_units(
            _random_units(rng, 6, dim=2), e_dim=3)
        self.hier = subspace.fit_hier_from_units(
            [_random_units(rng, 4, dim=2) for _ in range(3)], n_lang_dim=1,
            e_dim=3)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.corp, self.sub, self.hier, self.out
        return

    def test_gradient(self):
        """Test the unit objective gradient by central differences."""
        rng = np.random.default_rng(0)
        layout = self.sub.layout
        vectors = self.sub.vectors(rng.normal(size=(2, 3)))
        stats = hmm.accumulate_stats(
            {'u': self.corp.features['utt0000']},
            subspace.subspace_log_params(vectors, layout, np.ones(2)))

        _, grad = subspace.unit_objective(vectors, stats, layout)
        numeric = np.zeros(vectors.shape)
        eps = 1.0e-6
        for idx in np.ndindex(vectors.shape):
            plus = vectors.copy()
            minus = vectors.copy()
            plus[idx] += eps
            minus[idx] -= eps
            numeric[idx] = (subspace.unit_objective(plus, stats, layout)[0]
                            - subspace.unit_objective(minus, stats,
                                                      layout)[0])[idx[0]] \
                / (2.0 * eps)

        scale = max(1.0, np.abs(grad).max())
        assert np.abs(grad - numeric).max() / scale <= 1.0e-4
        return

    def test_monotone_elbo(self, caplog):
        """Test that subspace training never lowers the bound."""
        with caplog.at_level(logging.WARN, logger='uwsPipe'):
            self.out, state = subspace.train_shmm(
                self.corp.features, self.sub, n_units=3, n_iters=3, seed=1)

        assert len(state.elbo) == 4
        for prev, cur in zip(state.elbo[:-1], state.elbo[1:]):
            assert cur >= prev - 1.0e-6 * abs(prev)
        assert len(caplog.records) == 0, "unexpected warnings"
        assert self.out.n_units == 3
        return

    def test_silence_unit(self):
        """Test that annotated silence seeds unit 0."""
        masks = general.silence_masks(self.corp.manifest, self.corp.features)
        self.out, _ = subspace.train_shmm(self.corp.features, self.sub,
                                          n_units=3, n_iters=1, silence=masks)
        assert self.out.silence_unit == 0
        return

    def test_frozen_alpha_matches_subspace(self):
        """Test that a frozen zero language embedding trains as a plain one."""
        cfg = subspace.SubspaceTrainConfig(train_alpha=False)
        self.out, state, alpha = subspace.train_hshmm(
            self.corp.features, self.hier, n_units=3, n_iters=2, seed=5,
            cfg=cfg)
        _, plain = subspace.train_shmm(self.corp.features,
                                       self.hier.subspace(np.zeros(1)),
                                       n_units=3, n_iters=2, seed=5, cfg=cfg)

        assert np.array_equal(alpha, np.zeros(1))
        assert np.allclose(state.elbo, plain.elbo, rtol=1.0e-12)
        return

    def test_alpha_trained(self):
        """Test that the language embedding is updated by default."""
        self.out, state, alpha = subspace.train_hshmm(
            self.corp.features, self.hier, n_units=3, n_iters=2, seed=5)

        assert alpha.shape == (1,)
        for prev, cur in zip(state.elbo[:-1], state.elbo[1:]):
            assert cur >= prev - 1.0e-6 * abs(prev)
        return

    def test_bad_alpha(self):
        """Test that the initial language embedding must match K."""
        eval_bad_input(subspace.train_hshmm, ValueError,
                       "language embedding must have 1 values",
                       input_args=[self.corp.features, self.hier],
                       input_kwargs={'alpha': [0.0, 1.0]})
        return

    def test_dimension_mismatch(self):
        """Test that the features must match the subspace layout."""
        feats = [corpus.FrameSequence('x', np.zeros((5, 3)))]
        eval_bad_input(subspace.train_shmm, ValueError,
                       "features do not match the subspace dimension 2",
                       input_args=[feats, self.sub])
        return

    def test_split_settings(self):
        """Test sorting settings into their blocks."""
        cfg, hyper = subspace.split_settings({'step_size': 0.1,
                                              'n_states': 2})
        assert cfg.step_size == 0.1
        assert hyper.n_states == 2

        eval_bad_input(subspace.split_settings, ValueError,
                       "unknown subspace training settings: ['bogus']",
                       input_args=[{'bogus': 1}])
        eval_bad_input(subspace.SubspaceTrainConfig, ValueError,
                       "invalid subspace training settings",
                       input_kwargs={'step_size': 0.0})
        return


class TestSourceFit(object):
    """Unit tests for fitting subspaces on labelled source corpora."""

    def setup_method(self):
        """Create two labelled source corpora."""
        self.sources = list()
        for seed in [3, 4]:
            corp = synthetic.generate_synthetic(synthetic.SyntheticSpec(
                n_units=3, feature_dim=2, lexicon=('01', '12', '2'),
                n_utterances=6, seed=seed))
            self.sources.append((corp.features, corp.gold_units))
        self.hyper = hmm.AudHyperParams(n_components=1)
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        del self.sources, self.hyper, self.out
        return

    def test_fit_subspace(self):
        """Test that every source unit gets a labelled embedding."""
        self.out = subspace.fit_subspace(self.sources, e_dim=2,
                                         hyper=self.hyper, n_iters=2)

        labels = ['{:d}:{:}'.format(isrc, label)
                  for isrc, (feats, gold) in enumerate(self.sources)
                  for label in subspace.unit_segments(feats, gold).keys()]
        assert self.out.labels == tuple(labels)
        assert self.out.embeddings.shape == (len(labels), 2)
        assert self.out.W.shape == (self.out.layout.size, 2)
        return

    def test_fit_hier_subspace(self):
        """Test the templates fitted on two source languages."""
        self.out = subspace.fit_hier_subspace(self.sources, n_lang_dim=1,
                                              e_dim=2, hyper=self.hyper,
                                              n_iters=2)

        assert self.out.n_lang_dim == 1
        assert self.out.e_dim == 2
        assert self.out.alphas.shape == (2, 1)
        assert np.isfinite(self.out.reconstruction_error)
        return

    def test_unit_without_data(self):
        """Test that a unit with only short segments is rejected."""
        eval_bad_input(subspace.fit_subspace, ValueError,
                       "insufficient data: no segment has 500 frames",
                       input_args=[self.sources],
                       input_kwargs={'hyper': hmm.AudHyperParams(
                           n_states=500, n_components=1)})
        return
