#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Unit tests for the command line interface."""

import json
import os
import tempfile

from pysat.utils.testing import assert_lists_equal
import pytest

from uwsPipe import cli
from uwsPipe.utils import corpus


class TestCli(object):
    """Unit tests for the ``uwspipe`` sub-commands and exit codes."""

    def setup_method(self):
        """Write a synthetic corpus."""
        self.tempdir = tempfile.TemporaryDirectory()
        self.corpus_dir = os.path.join(self.tempdir.name, 'corpus')
        self.manifest = os.path.join(self.corpus_dir, 'manifest.json')
        assert cli.main(['synth', '--out-dir', self.corpus_dir, '--units',
                         '3', '--lexicon', '01', '12', '2', '--utterances',
                         '4', '--seed', '2']) == cli.EXIT_OK
        self.out = None
        return

    def teardown_method(self):
        """Clean up previous testing."""
        self.tempdir.cleanup()
        del self.tempdir, self.corpus_dir, self.manifest, self.out
        return

    def _path(self, name):
        """Place a file in the temporary directory."""
        return os.path.join(self.tempdir.name, name)

    def _write_config(self, **fields):
        """Write a run configuration with the gold discretizer."""
        raw = {'manifest': self.manifest, 'out_dir': self._path('run'),
               'discretizer': 'gold', 'uws': 'align',
               'align': {'oracle_noise': 0.0}}
        raw.update(fields)
        path = self._path('cfg.json')
        with open(path, 'w') as fout:
            json.dump(raw, fout)
        return path

    def test_synth(self):
        """Test that the synthetic corpus is readable."""
        self.out = corpus.load_manifest(self.manifest)

        assert len(self.out.utterances) == 4
        assert self.out.utterances[0].gold_words is not None
        return

    def test_run_and_report(self, capsys):
        """Test running a configuration and tabulating it."""
        assert cli.main(['run', '--config',
                         self._write_config()]) == cli.EXIT_OK
        assert capsys.readouterr().out.strip().endswith('1.0000')

        assert cli.main(['report', '--runs', self._path('run'),
                         '--markdown', self._path('t/table.md'), '--json',
                         self._path('t/table.json')]) == cli.EXIT_OK
        with open(self._path('t/table.json'), 'r') as fin:
            self.out = json.load(fin)

        assert_lists_equal(self.out['columns'], ['align'])
        assert self.out['cells']['gold raw']['align'] == 1.0
        assert os.path.isfile(self._path('t/table.md'))
        return

    def test_run_overrides(self):
        """Test that the command line replaces the run directory."""
        assert cli.main(['run', '--config', self._write_config(), '--out-dir',
                         self._path('other'), '--seed', '1']) == cli.EXIT_OK
        assert os.path.isfile(self._path('other/report.json'))
        assert not os.path.isdir(self._path('run'))
        return

    @pytest.mark.parametrize("fields", [{'uws': 'bigram'},
                                        {'kmeans': {}},
                                        {'manifest': 'none.json'}])
    def test_config_error(self, fields):
        """Test that configuration errors exit with code 2.

        Parameters
        ----------
        fields : dict
            Configuration fields that make the run invalid

        """
        assert cli.main(['run', '--config', self._write_config(**fields)]) \
            == cli.EXIT_CONFIG
        return

    def test_missing_config(self):
        """Test that a missing configuration file exits with code 2."""
        assert cli.main(['run', '--config', self._path('none.json')]) \
            == cli.EXIT_CONFIG
        return

    def test_stage_error(self):
        """Test that a failing stage exits with code 3."""
        path = self._write_config(uws='dpseg', dpseg={'max_len': 1})
        assert cli.main(['run', '--config', path]) == cli.EXIT_STAGE
        return

    def test_usage_error(self):
        """Test that a missing sub-command stops argument parsing."""
        with pytest.raises(SystemExit):
            cli.main([])
        return

    def test_segment_and_eval(self, capsys):
        """Test segmenting a unit file and scoring the result."""
        gold_units = os.path.join(self.corpus_dir, 'gold_units.txt')
        assert cli.main(['uws', 'dpseg', '--in', gold_units, '--sweeps', '2',
                         '--out', self._path('seg.txt')]) == cli.EXIT_OK
        assert cli.main(['eval', '--hyp', self._path('seg.txt'), '--gold',
                         os.path.join(self.corpus_dir, 'gold_words.txt'),
                         '--units', gold_units, '--report',
                         self._path('eval.json')]) == cli.EXIT_OK

        with open(self._path('eval.json'), 'r') as fin:
            self.out = json.load(fin)
        assert 0.0 <= self.out['boundary']['fscore'] <= 1.0
        assert capsys.readouterr().out.find('boundary P') >= 0
        return

    def test_units_stats(self):
        """Test describing a unit file."""
        path = os.path.join(self.corpus_dir, 'gold_units.txt')
        assert cli.main(['units', 'stats', '--in', path, '--report',
                         self._path('stats.json')]) == cli.EXIT_OK

        with open(self._path('stats.json'), 'r') as fin:
            self.out = json.load(fin)
        assert self.out['total_tokens'] == sum(
            [len(seq) for seq in corpus.read_units(path).values()])
        assert self.out['empty'] == []
        return

    def test_vq(self):
        """Test training a VQ-VAE and writing its frame labels."""
        model = self._path('vq/model.h5')
        assert cli.main(['vq', 'train', '--manifest', self.manifest,
                         '--units', '3', '--epochs', '1', '--out',
                         model]) == cli.EXIT_OK
        assert cli.main(['vq', 'decode', '--model', model, '--manifest',
                         self.manifest, '--out-dir',
                         self._path('vq')]) == cli.EXIT_OK

        with open(self._path('vq/frame_labels.txt'), 'r') as fin:
            self.out = [line.split()[0] for line in fin]
        assert_lists_equal(self.out, corpus.load_manifest(self.manifest).ids)
        assert os.path.isfile(self._path('vq/units.txt'))
        return
