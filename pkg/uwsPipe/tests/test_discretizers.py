#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Interface tests for the discretizer plug-ins."""

import os
import tempfile

import numpy as np
from pysat.utils.testing import assert_lists_equal
from pysat.utils.testing import eval_bad_input
import pytest

from uwsPipe import discretizers
from uwsPipe.utils import corpus
from uwsPipe.utils import synthetic


class TestRegistry(object):
    """Unit tests for the attributes every discretizer provides."""

    def test_registry_names(self):
        """Test that the registry is keyed by the module names."""
        assert_lists_equal(sorted(discretizers.registry.keys()),
                           ['gold', 'hmm', 'hshmm', 'shmm', 'vqvae'])
        for key, mod in discretizers.registry.items():
            assert mod.name == key
        return

    @pytest.mark.parametrize("name", sorted(discretizers.registry.keys()))
    def test_attributes(self, name):
        """Test the attributes and methods of a discretizer.

        Parameters
        ----------
        name : str
            Discretizer name

        """
        mod = discretizers.registry[name]

        assert isinstance(mod.description, str)
        assert isinstance(mod.settings, tuple)
        assert 'seed' not in mod.settings
        assert mod.file_suffix.startswith('.')
        for method in ['train', 'decode', 'decode_utterance', 'save',
                       'load']:
            assert callable(getattr(mod, method))
        return

    @pytest.mark.parametrize("name,settings", [
        ('hmm', ['n_units', 'n_iters', 'n_states', 'prec_scale']),
        ('shmm', ['subspace', 'e_dim', 'n_components']),
        ('hshmm', ['hier', 'n_lang_dim', 'train_alpha']),
        ('vqvae', ['n_units', 'latent_dim', 'k1', 'k2', 'epochs'])])
    def test_settings(self, name, settings):
        """Test that key settings are accepted by name.

        Parameters
        ----------
        name : str
            Discretizer name
        settings : list
            Settings that must be listed

        """
        for setting in settings:
            assert setting in discretizers.registry[name].settings
        return


class TestPlugins(object):
    """Unit tests for training, decoding and storing with the plug-ins."""

    def setup_method(self):
        """Create a small synthetic corpus."""
        self.corp = synthetic.generate_synthetic(synthetic.SyntheticSpec(
            n_units=2, n_utterances=3, seed=6))
        self.tempdir = tempfile.TemporaryDirectory()
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.corp, self.tempdir, self.out
        return

    def _check_cover(self, sequences):
        """Check that decoded units cover each utterance in time."""
        assert_lists_equal(list(sequences.keys()), self.corp.manifest.ids)
        for uid, seq in sequences.items():
            assert seq.tokens[0].start_s == 0.0
            assert abs(seq.tokens[-1].end_s
                       - self.corp.features[uid].duration_s) < 1.0e-9
        return

    def test_gold(self):
        """Test that the gold discretizer returns the gold units."""
        mod = discretizers.registry['gold']
        model, info = mod.train(self.corp.features,
                                manifest=self.corp.manifest)
        self.out = mod.decode(model, self.corp.features)

        assert info == {'n_types': 2}
        for uid in self.corp.manifest.ids:
            assert self.out[uid] == self.corp.gold_units[uid]
        return

    def test_gold_save_and_load(self):
        """Test that stored gold units decode unchanged."""
        mod = discretizers.registry['gold']
        path = os.path.join(self.tempdir.name, 'model' + mod.file_suffix)
        model, _ = mod.train(self.corp.features, manifest=self.corp.manifest)
        mod.save(model, path)
        self.out = mod.decode(mod.load(path), self.corp.features)

        for uid in self.corp.manifest.ids:
            assert_lists_equal(self.out[uid].labels,
                               self.corp.gold_units[uid].labels)
        return

    def test_gold_needs_manifest(self):
        """Test that the gold discretizer needs the manifest."""
        eval_bad_input(discretizers.registry['gold'].train, ValueError,
                       "the gold discretizer needs a manifest",
                       input_args=[self.corp.features])
        return

    def test_gold_unknown_utterance(self):
        """Test decoding an utterance without gold units."""
        eval_bad_input(discretizers.registry['gold'].decode_utterance,
                       ValueError, "no gold units for x",
                       input_args=[{}, corpus.FrameSequence(
                           'x', np.zeros((2, 4)))])
        return

    def test_hmm(self):
        """Test training, storing and decoding a phone loop."""
        mod = discretizers.registry['hmm']
        model, info = mod.train(self.corp.features,
                                manifest=self.corp.manifest, seed=1,
                                n_units=3, n_iters=2, n_components=1)
        path = os.path.join(self.tempdir.name, 'model' + mod.file_suffix)
        mod.save(model, path)
        self.out = mod.decode(mod.load(path), self.corp.features)

        assert len(info['elbo']) == 2
        assert info['silence_unit'] is None
        self._check_cover(self.out)
        first = mod.decode(model, self.corp.features)
        for uid in self.out.keys():
            assert_lists_equal(self.out[uid].labels, first[uid].labels)
        return

    def test_hmm_kind_mismatch(self):
        """Test that a phone loop of another family is not loaded."""
        model, _ = discretizers.registry['hmm'].train(
            self.corp.features, n_units=2, n_iters=1, n_components=1)
        path = os.path.join(self.tempdir.name, 'model.h5')
        discretizers.registry['hmm'].save(model, path)

        eval_bad_input(discretizers.registry['shmm'].load, ValueError,
                       'holds a "hmm" model, not "shmm"', input_args=[path])
        return

    def test_vqvae(self):
        """Test training, storing and decoding a VQ-VAE."""
        mod = discretizers.registry['vqvae']
        model, info = mod.train(self.corp.features, seed=1, n_units=3,
                                latent_dim=2, hidden_dim=4, epochs=2)
        path = os.path.join(self.tempdir.name, 'model' + mod.file_suffix)
        mod.save(model, path)
        self.out = mod.decode(mod.load(path), self.corp.features)

        assert len(info['loss']) == 2
        assert len(info['lr']) == 2
        self._check_cover(self.out)
        return

    @pytest.mark.parametrize("name,msg", [
        ('shmm', "needs a subspace file or labelled source manifests"),
        ('hshmm', "needs a hierarchical subspace file")])
    def test_subspace_source_needed(self, name, msg):
        """Test that subspace loops need a subspace or sources.

        Parameters
        ----------
        name : str
            Discretizer name
        msg : str
            Expected error message fragment

        """
        eval_bad_input(discretizers.registry[name].train, ValueError, msg,
                       input_args=[self.corp.features],
                       input_kwargs={'n_units': 2, 'n_iters': 1})
        return
