#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Checkpointed end-to-end runs and their comparison tables.

A run goes through five stages, each reading the artifacts of the previous
one from the run directory:

features
    ``manifest.json``, plus ``feats/<id>.feat`` when features are extracted
discretize
    ``model.<ext>``, ``units_raw.txt`` and ``discretize.json``
post
    ``units.txt``, ``unit_stats.json`` and, with BPE, ``bpe.json``
uws
    ``seg_<restart>.txt`` and ``uws.json``
eval
    ``boundaries_<restart>.csv`` and ``report.json``

Every finished stage leaves ``<stage>.done`` holding a hash of its settings
chained with the hashes of the stages before it, so a re-run skips the
stages whose settings did not change.

"""

import contextlib
import dataclasses
import hashlib
import json
import os
from typing import Optional

import h5py
import numpy as np
import pandas as pds
import scipy
import xarray as xr

import uwsPipe
from uwsPipe import discretizers
from uwsPipe import logger
from uwsPipe import segmenters
from uwsPipe.segmenters.methods import dpseg as dp_methods
from uwsPipe.utils import corpus
from uwsPipe.utils import features as feat_utils
from uwsPipe.utils import scoring
from uwsPipe.utils import units

STAGES = ('features', 'discretize', 'post', 'uws', 'eval')
POST_MODES = ('raw', 'plus_sil')

# Segmenter name of the condition where every unit is a word
NO_SEGMENTER = 'none'

LOCK_NAME = 'run.lock'


class ConfigError(ValueError):
    """Raised for an invalid run configuration."""


class StageError(RuntimeError):
    """Raised when a pipeline stage fails.

    Parameters
    ----------
    stage : str
        Name of the failing stage
    utterance_id : str or NoneType
        Utterance being processed, if the failure is tied to one
    message : str
        Description of the failure

    """

    def __init__(self, stage, utterance_id, message):
        self.stage = stage
        self.utterance_id = utterance_id
        self.message = message
        where = '' if utterance_id is None else ' on utterance {:}'.format(
            utterance_id)
        super().__init__('stage {:}{:} failed: {:}'.format(stage, where,
                                                           message))


# ----------------------------------------------------------------------------
# Configuration


@dataclasses.dataclass(frozen=True)
class PipelineConfig(object):
    """Settings of an end-to-end run.

    Parameters
    ----------
    manifest : str
        Corpus manifest
    out_dir : str
        Run directory
    discretizer : str
        Discretizer name, one of `uwsPipe.discretizers.registry`
        (default='hmm')
    post : str
        'raw' or 'plus_sil' (default='raw')
    uws : str
        Segmenter name, one of `uwsPipe.segmenters.registry`, or 'none' to
        make every unit a word (default='dpseg')
    seed : int
        Random seed (default=0)
    restarts : int
        Independent segmenter runs, seeded seed, seed + 1, ... (default=1)
    tolerance_s : float
        Boundary matching tolerance (default=0.02)
    bpe_vocab : int or NoneType
        Target BPE vocabulary size, no BPE if None (default=None)
    cmvn : bool
        Normalize extracted features per utterance (default=True)
    mfcc : dict
        MfccConfig fields for feature extraction (default={})
    stages : dict
        Keyword settings of the plug-ins, keyed by plug-in name
        (default={})

    """

    manifest: str
    out_dir: str
    discretizer: str = 'hmm'
    post: str = 'raw'
    uws: str = 'dpseg'
    seed: int = 0
    restarts: int = 1
    tolerance_s: float = scoring.DEFAULT_TOLERANCE_S
    bpe_vocab: Optional[int] = None
    cmvn: bool = True
    mfcc: dict = dataclasses.field(default_factory=dict)
    stages: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        """Check the stage combination and the plug-in settings."""
        if self.discretizer not in discretizers.registry:
            raise ConfigError('unknown discretizer "{:}", choose from {:}'
                              .format(self.discretizer,
                                      sorted(discretizers.registry.keys())))
        if self.post not in POST_MODES:
            raise ConfigError('post must be one of {:}, not "{:}"'.format(
                list(POST_MODES), self.post))
        if self.uws != NO_SEGMENTER and self.uws not in segmenters.registry:
            raise ConfigError('unknown segmenter "{:}", choose from {:}'
                              .format(self.uws, sorted(
                                  list(segmenters.registry.keys())
                                  + [NO_SEGMENTER])))
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError('seed must be a non-negative integer')
        if not isinstance(self.restarts, int) or self.restarts < 1:
            raise ConfigError('restarts must be a positive integer')
        if not self.tolerance_s >= 0.0:
            raise ConfigError('tolerance_s must not be negative')
        if self.bpe_vocab is not None and (not isinstance(self.bpe_vocab, int)
                                           or self.bpe_vocab < 1):
            raise ConfigError('bpe_vocab must be a positive integer')

        try:
            feat_utils.MfccConfig(**self.mfcc)
        except (TypeError, ValueError) as err:
            raise ConfigError('bad mfcc settings: {:}'.format(err))

        for name, settings in self.stages.items():
            plugin = plugin_of(name)
            if not isinstance(settings, dict):
                raise ConfigError('settings of "{:}" must be an object'
                                  .format(name))
            unknown = sorted(set(settings.keys()).difference(
                plugin.settings))
            if len(unknown) > 0:
                raise ConfigError('unknown {:} setting(s) {:}'.format(
                    name, unknown))
        return

    def stage_settings(self, name):
        """Keyword settings of a plug-in, empty if none were given."""
        return dict(self.stages.get(name, {}))

    @property
    def label(self):
        """Row label of the run in comparison tables."""
        return ' '.join([self.discretizer, self.post])

    def to_dict(self):
        """Lay the configuration out as its JSON document."""
        out = {fld.name: getattr(self, fld.name)
               for fld in dataclasses.fields(self) if fld.name != 'stages'}
        out['mfcc'] = dict(self.mfcc)
        for name, settings in self.stages.items():
            out[name] = dict(settings)
        return out


def plugin_of(name):
    """Look up a discretizer or segmenter module by name.

    Raises
    ------
    ConfigError
        If no plug-in has this name

    """
    if name in discretizers.registry:
        return discretizers.registry[name]
    if name in segmenters.registry:
        return segmenters.registry[name]
    raise ConfigError('unknown configuration key "{:}"'.format(name))


def config_from_dict(raw, base_dir='', **overrides):
    """Build a pipeline configuration from its JSON document.

    Parameters
    ----------
    raw : dict
        Top-level fields plus one settings object per plug-in name
    base_dir : str
        Directory that relative `manifest` and `out_dir` paths start from
        (default='')
    **overrides : dict
        Top-level fields replacing those of `raw` when not None

    Returns
    -------
    cfg : PipelineConfig
        Validated configuration

    Raises
    ------
    ConfigError
        For missing or unknown keys and invalid settings

    """
    if not isinstance(raw, dict):
        raise ConfigError('the configuration must be a JSON object')

    fields = [fld.name for fld in dataclasses.fields(PipelineConfig)
              if fld.name != 'stages']
    kwargs = {key: val for key, val in raw.items() if key in fields}
    for key in ['manifest', 'out_dir']:
        if key in kwargs:
            kwargs[key] = os.path.join(base_dir, kwargs[key])
    kwargs.update({key: val for key, val in overrides.items()
                   if val is not None})

    stages = {key: val for key, val in raw.items() if key not in fields}
    for key in stages.keys():
        plugin_of(key)

    for key in ['manifest', 'out_dir']:
        if key not in kwargs:
            raise ConfigError('missing configuration key "{:}"'.format(key))

    return PipelineConfig(stages=stages, **kwargs)


def load_config(path, **overrides):
    """Load a pipeline configuration file.

    Parameters
    ----------
    path : str
        JSON configuration; relative paths inside it start from its
        directory
    **overrides : dict
        Top-level fields replacing those of the file when not None

    Returns
    -------
    cfg : PipelineConfig
        Validated configuration

    Raises
    ------
    ConfigError
        If the file cannot be read or parsed, or holds invalid settings

    """
    try:
        with open(path, 'r') as fin:
            raw = json.load(fin)
    except OSError as err:
        raise ConfigError('unable to read {:}: {:}'.format(path, err))
    except json.JSONDecodeError as jerr:
        raise ConfigError('unable to parse {:}: line {:d}, column {:d}: {:}'
                          .format(path, jerr.lineno, jerr.colno, jerr.msg))

    return config_from_dict(raw, base_dir=os.path.dirname(path), **overrides)


def check_inputs(cfg, manifest):
    """Check that the corpus carries what the configured stages need.

    Parameters
    ----------
    cfg : PipelineConfig
        Run configuration
    manifest : CorpusManifest
        Input corpus

    Raises
    ------
    ConfigError
        Naming the first utterance without the features or audio, gold
        units, translation or gold words a stage requires

    """
    if len(manifest.utterances) == 0:
        raise ConfigError('manifest {:} has no utterances'.format(
            cfg.manifest))

    needs = [('gold_words', 'gold words for scoring')]
    if cfg.discretizer == 'gold':
        needs.append(('gold_units', 'gold units for the gold discretizer'))
    if cfg.uws != NO_SEGMENTER and segmenters.registry[
            cfg.uws].needs_translation:
        needs.append(('translation', 'a translation for the {:} segmenter'
                      .format(cfg.uws)))

    for utt in manifest.utterances:
        if utt.feature_path is None and utt.audio_path is None:
            raise ConfigError('utterance {:} has neither features nor audio'
                              .format(utt.id))
        for attr, what in needs:
            if getattr(utt, attr) is None:
                raise ConfigError('utterance {:} lacks {:}'.format(utt.id,
                                                                  what))
    return


# ----------------------------------------------------------------------------
# Checkpoints and provenance


def digest(*parts):
    """SHA-256 of the canonical JSON form of the parts."""
    sha = hashlib.sha256()
    for part in parts:
        sha.update(json.dumps(part, sort_keys=True).encode('utf-8'))
    return sha.hexdigest()


def file_sha256(path):
    """SHA-256 of a file's bytes."""
    sha = hashlib.sha256()
    with open(path, 'rb') as fin:
        for block in iter(lambda: fin.read(1 << 20), b''):
            sha.update(block)
    return sha.hexdigest()


def stage_keys(cfg, manifest_sha):
    """Chain the settings hash of every stage.

    Parameters
    ----------
    cfg : PipelineConfig
        Run configuration
    manifest_sha : str
        SHA-256 of the input manifest

    Returns
    -------
    keys : dict
        Hash per stage name; each covers its own settings and every
        earlier stage

    """
    params = {'features': {'manifest': manifest_sha, 'mfcc': cfg.mfcc,
                           'cmvn': cfg.cmvn},
              'discretize': {'discretizer': cfg.discretizer, 'seed': cfg.seed,
                             'settings': cfg.stage_settings(cfg.discretizer)},
              'post': {'post': cfg.post, 'bpe_vocab': cfg.bpe_vocab},
              'uws': {'uws': cfg.uws, 'seed': cfg.seed,
                      'restarts': cfg.restarts,
                      'settings': cfg.stage_settings(cfg.uws)},
              'eval': {'tolerance_s': cfg.tolerance_s}}

    keys = dict()
    prev = ''
    for stage in STAGES:
        prev = digest(prev, stage, params[stage])
        keys[stage] = prev
    return keys


def _done_path(run_dir, stage):
    return os.path.join(run_dir, '{:s}.done'.format(stage))


def is_done(run_dir, stage, key):
    """Test whether a stage finished with the given settings hash."""
    path = _done_path(run_dir, stage)
    if not os.path.isfile(path):
        return False
    with open(path, 'r') as fin:
        return fin.read().strip() == key


def mark_done(run_dir, stage, key):
    """Record that a stage finished with the given settings hash."""
    with open(_done_path(run_dir, stage), 'w') as fout:
        fout.write(key + '\n')
    return


def clear_after(run_dir, stage):
    """Remove the checkpoints of the stages that follow `stage`."""
    for later in STAGES[STAGES.index(stage) + 1:]:
        path = _done_path(run_dir, later)
        if os.path.isfile(path):
            os.remove(path)
    return


@contextlib.contextmanager
def run_lock(run_dir):
    """Hold the single-writer lock of a run directory.

    Raises
    ------
    StageError
        If another run holds the lock

    """
    path = os.path.join(run_dir, LOCK_NAME)
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StageError('lock', None, ''.join([
            'run directory {:} is in use; remove {:} '.format(run_dir, path),
            'if no other run is active']))

    try:
        os.write(fd, '{:d}\n'.format(os.getpid()).encode('ascii'))
        os.close(fd)
        yield path
    finally:
        os.remove(path)


def package_versions():
    """Versions of this package and of the numerical stack."""
    return {'uwsPipe': uwsPipe.__version__, 'numpy': np.__version__,
            'scipy': scipy.__version__, 'pandas': pds.__version__,
            'xarray': xr.__version__, 'h5py': h5py.__version__}


def write_json(data, path):
    """Write a JSON document with sorted keys."""
    with open(path, 'w') as fout:
        json.dump(data, fout, indent=1, sort_keys=True)
        fout.write('\n')
    return


def read_json(path):
    """Read a JSON document."""
    with open(path, 'r') as fin:
        return json.load(fin)


def json_ready(values):
    """Replace NaN values by None."""
    return {key: None if isinstance(val, float) and np.isnan(val) else val
            for key, val in values.items()}


# ----------------------------------------------------------------------------
# Stage operations


def per_utterance(stage, items, func):
    """Apply a function to each (utterance id, value) pair.

    Parameters
    ----------
    stage : str
        Stage name used in errors
    items : iterable
        (utterance id, value) pairs
    func : function
        Maps (utterance id, value) to a result

    Returns
    -------
    results : dict
        Results keyed by utterance id

    Raises
    ------
    StageError
        Naming the stage and the utterance that failed

    """
    results = dict()
    for uid, value in items:
        try:
            results[uid] = func(uid, value)
        except (ValueError, KeyError, FloatingPointError) as err:
            raise StageError(stage, uid, str(err))
    return results


def post_process(sequences, manifest, post='raw', bpe_vocab=None):
    """Prepare discretizer output for segmentation.

    Parameters
    ----------
    sequences : dict
        RAW UnitSequence objects keyed by utterance id
    manifest : CorpusManifest
        Manifest holding the silence annotations
    post : str
        'raw' keeps every unit, 'plus_sil' drops the units inside annotated
        silences (default='raw')
    bpe_vocab : int or NoneType
        Target BPE vocabulary size, no BPE if None (default=None)

    Returns
    -------
    processed : dict
        UnitSequence objects keyed by utterance id
    bpe : BpeModel or NoneType
        Learned merges, if any

    Note
    ----
    The discretizer's own silence tokens are removed in both conditions.

    """
    if post not in POST_MODES:
        raise ValueError('post must be one of {:}'.format(list(POST_MODES)))

    def _prepare(uid, seq):
        seq = units.strip_silence_tokens(seq)
        if post == 'plus_sil':
            seq = units.remove_silence_units(seq, manifest[uid].silences)
        return seq

    processed = per_utterance('post', sequences.items(), _prepare)

    bpe = None
    if bpe_vocab is not None:
        bpe = units.bpe_learn(processed.values(), bpe_vocab)
        processed = {uid: units.bpe_apply(seq, bpe)
                     for uid, seq in processed.items()}
    return processed, bpe


def segment_units(sequences, manifest, uws='dpseg', seed=0, settings=None):
    """Segment unit sequences with a segmenter plug-in.

    Parameters
    ----------
    sequences : dict
        UnitSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Corpus manifest, passed on to the segmenter
    uws : str
        Segmenter name, or 'none' to make every unit a word
        (default='dpseg')
    seed : int
        Random seed (default=0)
    settings : dict or NoneType
        Keyword settings of the segmenter (default=None)

    Returns
    -------
    segmentations : dict
        Segmentation objects keyed by utterance id
    info : dict
        Segmenter summary

    """
    if uws == NO_SEGMENTER:
        return {uid: corpus.Segmentation.from_starts(seq, range(1, len(seq)))
                for uid, seq in sequences.items()}, {}

    settings = dict() if settings is None else settings
    return segmenters.registry[uws].segment(sequences, manifest=manifest,
                                            seed=seed, **settings)


def evaluate(segmentations, manifest, post='raw',
             tolerance_s=scoring.DEFAULT_TOLERANCE_S):
    """Score segmentations against the gold words of a manifest.

    Parameters
    ----------
    segmentations : dict
        Hypothesized Segmentation objects keyed by utterance id
    manifest : CorpusManifest
        Manifest holding gold words, gold units and silences
    post : str
        Post-processing the hypotheses went through; silences are
        reintroduced into 'plus_sil' hypotheses (default='raw')
    tolerance_s : float
        Boundary matching tolerance (default=0.02)

    Returns
    -------
    boundary : BoundaryReport
        Boundary scores on the time plane
    types : TypeReport
        Token and type scores after relabelling the hypotheses with the
        gold units they cover

    """
    gold = dict()
    hyp = dict()
    relabelled = dict()
    for uid, seg in segmentations.items():
        utt = manifest[uid]
        if utt.gold_words is None:
            raise StageError('eval', uid, 'no gold words')
        gold[uid] = units.reintroduce_silence(utt.gold_words, utt.silences)
        if post == 'plus_sil':
            seg = units.reintroduce_silence(seg, utt.silences)
        hyp[uid] = seg
        relabelled[uid] = seg if utt.gold_units is None else \
            scoring.relabel_with_gold(seg, utt.gold_units)

    return (scoring.score_segmentations(hyp, gold, tolerance_s=tolerance_s),
            scoring.token_type_score(relabelled, gold))


# ----------------------------------------------------------------------------
# Pipeline stages


def _paths(run_dir, cfg):
    """Artifact paths of a run."""
    plugin = discretizers.registry[cfg.discretizer]
    return {'manifest': os.path.join(run_dir, 'manifest.json'),
            'feats': os.path.join(run_dir, 'feats'),
            'model': os.path.join(run_dir, 'model' + plugin.file_suffix),
            'units_raw': os.path.join(run_dir, 'units_raw.txt'),
            'units': os.path.join(run_dir, 'units.txt'),
            'unit_stats': os.path.join(run_dir, 'unit_stats.json'),
            'bpe': os.path.join(run_dir, 'bpe.json'),
            'report': os.path.join(run_dir, 'report.json')}


def _seg_path(run_dir, restart):
    return os.path.join(run_dir, 'seg_{:d}.txt'.format(restart))


def stage_features(cfg, manifest, paths):
    """Write the run manifest, extracting MFCCs if features are missing."""
    if any([utt.feature_path is None for utt in manifest.utterances]):
        manifest = feat_utils.extract_corpus(
            manifest, paths['feats'], feat_utils.MfccConfig(**cfg.mfcc),
            normalize=cfg.cmvn)
    else:
        logger.info('using the feature files listed in the manifest')
    corpus.save_manifest(manifest, paths['manifest'])
    return


def stage_discretize(cfg, paths):
    """Train the discretizer and write the RAW unit sequences."""
    manifest = corpus.load_manifest(paths['manifest'])
    feats = corpus.load_corpus_features(manifest)
    plugin = discretizers.registry[cfg.discretizer]

    model, info = plugin.train(feats, manifest=manifest, seed=cfg.seed,
                               **cfg.stage_settings(cfg.discretizer))
    plugin.save(model, paths['model'])

    sequences = per_utterance(
        'discretize', feats.items(),
        lambda uid, seq: plugin.decode_utterance(model, seq))
    corpus.write_units(sequences.values(), paths['units_raw'], timed=True)
    write_json(info, os.path.join(os.path.dirname(paths['model']),
                                  'discretize.json'))
    return


def stage_post(cfg, paths):
    """Post-process the RAW units and describe both unit corpora."""
    manifest = corpus.load_manifest(paths['manifest'])
    raw = corpus.read_units(paths['units_raw'], hop_s=manifest.hop_s)
    processed, bpe = post_process(raw, manifest, post=cfg.post,
                                  bpe_vocab=cfg.bpe_vocab)
    corpus.write_units(processed.values(), paths['units'], timed=True)

    stats = {'raw': json_ready(units.unit_stats(raw.values()).to_dict()),
             'post': json_ready(units.unit_stats(
                 processed.values()).to_dict())}
    write_json(stats, paths['unit_stats'])
    if bpe is not None:
        write_json({'merges': [list(merge) for merge in bpe.merges],
                    'alphabet': list(bpe.alphabet),
                    'vocab_size': bpe.vocab_size}, paths['bpe'])
    return


def _read_processed(cfg, paths, manifest):
    variant = corpus.Variant.PLUS_SIL if cfg.post == 'plus_sil' \
        else corpus.Variant.RAW
    return corpus.read_units(paths['units'], hop_s=manifest.hop_s,
                             variant=variant)


def stage_uws(cfg, paths):
    """Segment the processed units once per restart."""
    manifest = corpus.load_manifest(paths['manifest'])
    sequences = _read_processed(cfg, paths, manifest)
    run_dir = os.path.dirname(paths['units'])

    infos = list()
    for restart, seed in enumerate(dp_methods.restart_seeds(cfg.seed,
                                                            cfg.restarts)):
        segs, info = segment_units(sequences, manifest, uws=cfg.uws,
                                   seed=seed,
                                   settings=cfg.stage_settings(cfg.uws))
        corpus.write_segmentations([segs[uid] for uid in sequences.keys()],
                                   _seg_path(run_dir, restart), timed=True)
        info = dict(info)
        info['seed'] = seed
        infos.append(info)

    write_json({'restarts': infos}, os.path.join(run_dir, 'uws.json'))
    return


def stage_eval(cfg, paths, provenance):
    """Score every restart and write the run report."""
    manifest = corpus.load_manifest(paths['manifest'])
    sequences = _read_processed(cfg, paths, manifest)
    run_dir = os.path.dirname(paths['units'])

    restarts = list()
    for restart, seed in enumerate(dp_methods.restart_seeds(cfg.seed,
                                                            cfg.restarts)):
        segs = corpus.read_segmentations(_seg_path(run_dir, restart),
                                         units=sequences)
        boundary, types = evaluate(segs, manifest, post=cfg.post,
                                   tolerance_s=cfg.tolerance_s)
        boundary.per_utterance.to_csv(os.path.join(
            run_dir, 'boundaries_{:d}.csv'.format(restart)))
        restarts.append({'seed': seed, 'boundary': boundary.to_dict(),
                         'token_type': types.to_dict()})

    report = {'condition': {'discretizer': cfg.discretizer,
                            'post': cfg.post, 'uws': cfg.uws,
                            'label': cfg.label},
              'boundary': _mean_scores([run['boundary']
                                        for run in restarts]),
              'token_type': _mean_scores([run['token_type']
                                          for run in restarts]),
              'restarts': restarts,
              'unit_stats': read_json(paths['unit_stats']),
              'provenance': provenance}
    write_json(report, paths['report'])
    logger.info('{:} / {:}: boundary F {:.4f}'.format(
        cfg.label, cfg.uws, report['boundary']['fscore']))
    return report


def _mean_scores(reports):
    """Average score dictionaries over restarts."""
    means = pds.DataFrame(reports).mean(axis=0)
    return {key: float(val) for key, val in means.items()}


def run_pipeline(cfg):
    """Run every stage of a configuration, skipping finished stages.

    Parameters
    ----------
    cfg : PipelineConfig
        Run configuration

    Returns
    -------
    run_dir : str
        Absolute path of the run directory
    report : dict
        Contents of ``report.json``: condition, mean boundary and type
        scores, per-restart scores, unit statistics and provenance

    Raises
    ------
    ConfigError
        If the manifest cannot be loaded or lacks what the stages need
    StageError
        Naming the stage, and the utterance when known, that failed

    """
    run_dir = os.path.abspath(cfg.out_dir)
    manifest_path = os.path.abspath(cfg.manifest)
    try:
        manifest = corpus.load_manifest(manifest_path)
    except (OSError, ValueError) as err:
        raise ConfigError(str(err))
    check_inputs(cfg, manifest)

    os.makedirs(run_dir, exist_ok=True)
    paths = _paths(run_dir, cfg)
    if os.path.abspath(paths['manifest']) == manifest_path:
        raise ConfigError('out_dir would overwrite the input manifest')

    manifest_sha = file_sha256(manifest_path)
    keys = stage_keys(cfg, manifest_sha)
    provenance = {'config_sha256': digest(cfg.to_dict()),
                  'manifest_sha256': manifest_sha,
                  'seed': cfg.seed,
                  'restart_seeds': dp_methods.restart_seeds(cfg.seed,
                                                            cfg.restarts),
                  'stage_keys': keys,
                  'versions': package_versions()}

    actions = {'features': lambda: stage_features(cfg, manifest, paths),
               'discretize': lambda: stage_discretize(cfg, paths),
               'post': lambda: stage_post(cfg, paths),
               'uws': lambda: stage_uws(cfg, paths),
               'eval': lambda: stage_eval(cfg, paths, provenance)}

    with run_lock(run_dir):
        for stage in STAGES:
            if is_done(run_dir, stage, keys[stage]):
                logger.info('stage {:} is up to date, skipping it'.format(
                    stage))
                continue

            logger.info('running stage {:}'.format(stage))
            clear_after(run_dir, stage)
            try:
                actions[stage]()
            except StageError:
                raise
            except (ValueError, KeyError, OSError,
                    FloatingPointError) as err:
                raise StageError(stage, None, str(err))
            mark_done(run_dir, stage, keys[stage])

    return run_dir, read_json(paths['report'])


# ----------------------------------------------------------------------------
# Comparison tables


def comparison_table(run_dirs):
    """Collect the boundary F-scores of finished runs.

    Parameters
    ----------
    run_dirs : list
        Run directories holding a ``report.json``

    Returns
    -------
    table : pds.DataFrame
        Boundary F-score with one row per discretizer and post condition
        and one column per segmenter, both in order of first appearance;
        missing combinations are NaN

    Raises
    ------
    ValueError
        If a report is missing or two runs share a table cell

    """
    if len(run_dirs) == 0:
        raise ValueError('no runs to compare')

    rows = list()
    for run_dir in run_dirs:
        path = os.path.join(run_dir, 'report.json')
        if not os.path.isfile(path):
            raise ValueError('no report.json in {:}, has the run '
                             'finished?'.format(run_dir))
        report = read_json(path)
        rows.append({'condition': report['condition']['label'],
                     'uws': report['condition']['uws'],
                     'fscore': report['boundary']['fscore'],
                     'run': run_dir})

    runs = pds.DataFrame(rows)
    dups = runs[runs.duplicated(['condition', 'uws'], keep=False)]
    if len(dups) > 0:
        raise ValueError('runs {:} share the cell ({:}, {:})'.format(
            list(dups['run']), dups['condition'].iloc[0],
            dups['uws'].iloc[0]))

    table = runs.pivot(index='condition', columns='uws', values='fscore')
    return table.reindex(index=list(pds.unique(runs['condition'])),
                         columns=list(pds.unique(runs['uws'])))


def render_report(run_dirs):
    """Render finished runs as markdown and JSON comparison tables.

    Parameters
    ----------
    run_dirs : list
        Run directories holding a ``report.json``

    Returns
    -------
    markdown : str
        Table of boundary F-scores printed with four decimals, '-' for
        missing combinations
    summary : dict
        'rows', 'columns' and 'cells' (row -> column -> F-score or None)
        holding the stored values unchanged

    """
    table = comparison_table(run_dirs)

    header = ['discretizer post'] + [str(col) for col in table.columns]
    lines = ['| ' + ' | '.join(header) + ' |',
             '| --- |' + ' ---: |' * len(table.columns)]
    cells = dict()
    for row, values in table.iterrows():
        cells[row] = {col: None if pds.isna(val) else float(val)
                      for col, val in values.items()}
        printed = ['-' if pds.isna(val) else '{:.4f}'.format(val)
                   for val in values]
        lines.append('| ' + ' | '.join([row] + printed) + ' |')

    summary = {'rows': list(table.index), 'columns': list(table.columns),
               'cells': cells}
    return '\n'.join(lines) + '\n', summary
