#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Command line interface, installed as ``uwspipe``.

Exit codes are 0 on success, 2 for configuration or input errors and 3 for
stage failures.

Examples
--------
::

    uwspipe synth --out-dir corpus --units 5 --lexicon 01 12 234
    uwspipe run --config cfg.json
    uwspipe report --runs run_gold run_hmm --markdown table.md

"""

import argparse
import logging
import os
import sys

from uwsPipe import discretizers
from uwsPipe import logger
from uwsPipe import pipeline
from uwsPipe import segmenters
from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.discretizers.methods import subspace as sub_methods
from uwsPipe.discretizers.methods import vq
from uwsPipe.utils import corpus
from uwsPipe.utils import features as feat_utils
from uwsPipe.utils import scoring
from uwsPipe.utils import synthetic
from uwsPipe.utils import units

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _load_features(manifest_path):
    """Load a manifest and the features it lists."""
    manifest = corpus.load_manifest(manifest_path)
    return manifest, corpus.load_corpus_features(manifest)


def _ensure_parent(path):
    """Create the directory a file will be written to."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return


# ----------------------------------------------------------------------------
# Sub-command actions


def cmd_run(args):
    """Run or resume a configured pipeline."""
    cfg = pipeline.load_config(args.config, seed=args.seed,
                               out_dir=args.out_dir)
    run_dir, report = pipeline.run_pipeline(cfg)
    print('{:} {:.4f}'.format(run_dir, report['boundary']['fscore']))
    return


def cmd_report(args):
    """Compare finished runs."""
    markdown, summary = pipeline.render_report(args.runs)
    sys.stdout.write(markdown)
    if args.markdown is not None:
        _ensure_parent(args.markdown)
        with open(args.markdown, 'w') as fout:
            fout.write(markdown)
    if args.json is not None:
        _ensure_parent(args.json)
        pipeline.write_json(summary, args.json)
    return


def cmd_synth(args):
    """Write a synthetic corpus."""
    spec = synthetic.SyntheticSpec(
        n_units=args.units, lexicon=tuple(args.lexicon),
        n_utterances=args.utterances, feature_dim=args.dim,
        silence_prob=args.silence_prob, seed=args.seed)
    print(synthetic.write_synthetic(synthetic.generate_synthetic(spec),
                                    args.out_dir))
    return


def cmd_features(args):
    """Extract MFCCs for every utterance of a manifest."""
    out_dir = os.path.abspath(args.out_dir)
    manifest = corpus.load_manifest(args.manifest)
    cfg = feat_utils.MfccConfig(add_deltas=args.deltas)
    new = feat_utils.extract_corpus(manifest, out_dir, cfg,
                                    normalize=not args.no_cmvn)
    corpus.save_manifest(new, os.path.join(out_dir, 'manifest.json'))
    return


def cmd_vq_train(args):
    """Train a VQ-VAE."""
    _, feats = _load_features(args.manifest)
    plugin = discretizers.registry['vqvae']
    model, info = plugin.train(feats, seed=args.seed, n_units=args.units,
                               epochs=args.epochs)
    _ensure_parent(args.out)
    plugin.save(model, args.out)
    logger.info('final VQ-VAE loss {:.6g}'.format(info['loss'][-1]))
    return


def cmd_vq_decode(args):
    """Write per-frame VQ labels and the merged unit sequences."""
    model = vq.load_vqvae(args.model)
    _, feats = _load_features(args.manifest)
    os.makedirs(args.out_dir, exist_ok=True)

    with open(os.path.join(args.out_dir, 'frame_labels.txt'), 'w') as fout:
        for uid, seq in feats.items():
            labels = vq.frame_units(model, seq)
            fout.write(' '.join([uid] + [str(int(lab)) for lab in labels])
                       + '\n')

    sequences = discretizers.registry['vqvae'].decode(model, feats)
    corpus.write_units(sequences.values(),
                       os.path.join(args.out_dir, 'units.txt'), timed=True)
    return


def cmd_aud_train(args):
    """Train a phone-loop model."""
    manifest, feats = _load_features(args.manifest)
    plugin = discretizers.registry[args.model]
    kwargs = {'n_units': args.units, 'n_iters': args.iters}
    if args.model == 'shmm':
        kwargs.update({'subspace': args.subspace, 'sources': args.sources})
    elif args.model == 'hshmm':
        kwargs.update({'hier': args.subspace, 'sources': args.sources})

    model, info = plugin.train(feats, manifest=manifest, seed=args.seed,
                               **kwargs)
    _ensure_parent(args.out)
    plugin.save(model, args.out)
    logger.info('final lower bound {:.6g}'.format(info['elbo'][-1]))
    return


def cmd_aud_decode(args):
    """Viterbi-decode a corpus with a phone-loop model of any family."""
    loop, _, _ = hmm.load_phone_loop(args.model)
    _, feats = _load_features(args.manifest)
    sequences = general.decode_corpus(
        lambda model, seq: hmm.viterbi_decode(seq, model), loop, feats)
    _ensure_parent(args.out)
    corpus.write_units(sequences.values(), args.out, timed=True)
    return


def cmd_aud_subspace(args):
    """Fit a unit subspace, or template subspaces, on labelled corpora."""
    sources = [general.labelled_source(path) for path in args.sources]
    _ensure_parent(args.out)
    if args.lang_dim > 0:
        hier = sub_methods.fit_hier_subspace(
            sources, n_lang_dim=args.lang_dim, e_dim=args.e_dim,
            n_iters=args.iters, seed=args.seed)
        sub_methods.save_hier_subspace(hier, args.out)
    else:
        sub = sub_methods.fit_subspace(sources, e_dim=args.e_dim,
                                       n_iters=args.iters, seed=args.seed)
        sub_methods.save_subspace(sub, args.out)
    return


def cmd_units_post(args):
    """Strip silence tokens, optionally drop silences and apply BPE."""
    manifest = corpus.load_manifest(args.manifest)
    sequences = corpus.read_units(args.input, hop_s=manifest.hop_s)
    processed, _ = pipeline.post_process(
        sequences, manifest, post=args.mode.replace('-', '_'),
        bpe_vocab=args.bpe_vocab)
    _ensure_parent(args.out)
    corpus.write_units(processed.values(), args.out, timed=True)
    return


def cmd_units_stats(args):
    """Describe a unit file."""
    stats = units.unit_stats(corpus.read_units(args.input).values(),
                             max_len=args.max_len)
    _ensure_parent(args.report)
    pipeline.write_json(pipeline.json_ready(stats.to_dict()), args.report)
    return


def _write_segs(segs, order, path, timed):
    _ensure_parent(path)
    corpus.write_segmentations([segs[uid] for uid in order], path,
                               timed=timed)
    return


def cmd_uws_dpseg(args):
    """Segment a unit file with the unigram segmenter."""
    sequences = corpus.read_units(args.input)
    segs, _ = segmenters.registry['dpseg'].segment(
        sequences, seed=args.seed, alpha0=args.alpha0, p_boundary=args.pb,
        n_sweeps=args.sweeps)
    _write_segs(segs, sequences.keys(), args.out, args.timed)
    return


def cmd_uws_align(args):
    """Segment a unit file by alignment peaks."""
    sequences = corpus.read_units(args.units)
    segs, _ = segmenters.registry['align'].segment(
        sequences, alignments=args.alignments)
    _write_segs(segs, sequences.keys(), args.out, args.timed)
    return


def cmd_eval(args):
    """Score a word file against gold words."""
    unit_seqs = None if args.units is None else corpus.read_units(args.units)
    hyp = corpus.read_segmentations(args.hyp, units=unit_seqs)
    gold = corpus.read_segmentations(args.gold)
    boundary = scoring.score_segmentations(
        hyp, gold, tolerance_s=args.tolerance_ms / 1000.0)
    types = scoring.token_type_score(hyp, gold)

    _ensure_parent(args.report)
    pipeline.write_json({'boundary': boundary.to_dict(),
                         'token_type': types.to_dict()}, args.report)
    print('boundary P {:.4f} R {:.4f} F {:.4f}'.format(
        boundary.precision, boundary.recall, boundary.fscore))
    return


# ----------------------------------------------------------------------------
# Parser


def build_parser():
    """Build the ``uwspipe`` argument parser.

    Returns
    -------
    parser : argparse.ArgumentParser
        Parser whose sub-commands store their action in `func`

    """
    parser = argparse.ArgumentParser(
        prog='uwspipe',
        description='Unsupervised word segmentation from speech')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Log debug messages')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run or resume a configured pipeline')
    run.add_argument('--config', required=True, help='JSON configuration')
    run.add_argument('--seed', type=int, default=None,
                     help='Override the configured seed')
    run.add_argument('--out-dir', default=None,
                     help='Override the configured run directory')
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser('report', help='Compare finished runs')
    rep.add_argument('--runs', nargs='+', required=True,
                     help='Run directories')
    rep.add_argument('--markdown', default=None, help='Markdown table file')
    rep.add_argument('--json', default=None, help='JSON table file')
    rep.set_defaults(func=cmd_report)

    syn = sub.add_parser('synth', help='Write a synthetic corpus')
    syn.add_argument('--out-dir', required=True)
    syn.add_argument('--units', type=int, default=5)
    syn.add_argument('--lexicon', nargs='+', default=['01', '12', '234',
                                                      '40', '3'],
                     help='Words as unit strings')
    syn.add_argument('--utterances', type=int, default=100)
    syn.add_argument('--dim', type=int, default=4,
                     help='Feature dimension')
    syn.add_argument('--silence-prob', type=float, default=0.0)
    syn.add_argument('--seed', type=int, default=0)
    syn.set_defaults(func=cmd_synth)

    feat = sub.add_parser('features', help='Extract MFCC features')
    feat.add_argument('--manifest', required=True)
    feat.add_argument('--out-dir', required=True)
    feat.add_argument('--deltas', action='store_true',
                      help='Append deltas and delta-deltas')
    feat.add_argument('--no-cmvn', action='store_true',
                      help='Skip per-utterance normalization')
    feat.set_defaults(func=cmd_features)

    vq_cmd = sub.add_parser('vq', help='VQ-VAE discretizer')
    vq_sub = vq_cmd.add_subparsers(dest='action', required=True)
    vq_train = vq_sub.add_parser('train')
    vq_train.add_argument('--manifest', required=True)
    vq_train.add_argument('--units', type=int, default=50)
    vq_train.add_argument('--epochs', type=int, default=20)
    vq_train.add_argument('--seed', type=int, default=0)
    vq_train.add_argument('--out', required=True)
    vq_train.set_defaults(func=cmd_vq_train)
    vq_dec = vq_sub.add_parser('decode')
    vq_dec.add_argument('--model', required=True)
    vq_dec.add_argument('--manifest', required=True)
    vq_dec.add_argument('--out-dir', required=True)
    vq_dec.set_defaults(func=cmd_vq_decode)

    aud = sub.add_parser('aud', help='Bayesian phone-loop discretizers')
    aud_sub = aud.add_subparsers(dest='action', required=True)
    aud_train = aud_sub.add_parser('train')
    aud_train.add_argument('--model', choices=['hmm', 'shmm', 'hshmm'],
                           default='hmm')
    aud_train.add_argument('--manifest', required=True)
    aud_train.add_argument('--units', type=int, default=100)
    aud_train.add_argument('--iters', type=int, default=10)
    aud_train.add_argument('--seed', type=int, default=0)
    aud_train.add_argument('--subspace', default=None,
                           help='Subspace file for shmm or hshmm')
    aud_train.add_argument('--sources', nargs='+', default=None,
                           help='Labelled manifests to fit the subspace on')
    aud_train.add_argument('--out', required=True)
    aud_train.set_defaults(func=cmd_aud_train)
    aud_dec = aud_sub.add_parser('decode')
    aud_dec.add_argument('--model', required=True)
    aud_dec.add_argument('--manifest', required=True)
    aud_dec.add_argument('--out', required=True)
    aud_dec.set_defaults(func=cmd_aud_decode)
    aud_sp = aud_sub.add_parser('subspace')
    aud_sp.add_argument('--sources', nargs='+', required=True,
                        help='Labelled manifests, one per language')
    aud_sp.add_argument('--e-dim', type=int, default=100)
    aud_sp.add_argument('--lang-dim', type=int, default=0,
                        help='Language embedding size, 0 for one subspace')
    aud_sp.add_argument('--iters', type=int, default=5)
    aud_sp.add_argument('--seed', type=int, default=0)
    aud_sp.add_argument('--out', required=True)
    aud_sp.set_defaults(func=cmd_aud_subspace)

    unit_cmd = sub.add_parser('units', help='Unit post-processing')
    unit_sub = unit_cmd.add_subparsers(dest='action', required=True)
    post = unit_sub.add_parser('post')
    post.add_argument('--in', dest='input', required=True)
    post.add_argument('--manifest', required=True)
    post.add_argument('--mode', choices=['raw', 'plus-sil'], default='raw')
    post.add_argument('--bpe-vocab', type=int, default=None)
    post.add_argument('--out', required=True)
    post.set_defaults(func=cmd_units_post)
    stats = unit_sub.add_parser('stats')
    stats.add_argument('--in', dest='input', required=True)
    stats.add_argument('--max-len', type=int,
                       default=units.MAX_SEQUENCE_TOKENS)
    stats.add_argument('--report', required=True)
    stats.set_defaults(func=cmd_units_stats)

    uws = sub.add_parser('uws', help='Word segmenters')
    uws_sub = uws.add_subparsers(dest='action', required=True)
    dp = uws_sub.add_parser('dpseg')
    dp.add_argument('--in', dest='input', required=True)
    dp.add_argument('--alpha0', type=float, default=20.0)
    dp.add_argument('--pb', type=float, default=0.5,
                    help='Word-end probability of the base distribution')
    dp.add_argument('--sweeps', type=int, default=100)
    dp.add_argument('--seed', type=int, default=0)
    dp.add_argument('--timed', action='store_true')
    dp.add_argument('--out', required=True)
    dp.set_defaults(func=cmd_uws_dpseg)
    al = uws_sub.add_parser('align')
    al.add_argument('--units', required=True)
    al.add_argument('--alignments', nargs='+', required=True,
                    help='Alignment files, averaged when several')
    al.add_argument('--timed', action='store_true')
    al.add_argument('--out', required=True)
    al.set_defaults(func=cmd_uws_align)

    ev = sub.add_parser('eval', help='Score a segmentation')
    ev.add_argument('--hyp', required=True)
    ev.add_argument('--gold', required=True)
    ev.add_argument('--units', default=None,
                    help='Unit file the hypothesis words are laid over')
    ev.add_argument('--tolerance-ms', type=float,
                    default=1000.0 * scoring.DEFAULT_TOLERANCE_S)
    ev.add_argument('--report', required=True)
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    """Run the ``uwspipe`` command.

    Parameters
    ----------
    argv : list or NoneType
        Arguments, `sys.argv[1:]` if None (default=None)

    Returns
    -------
    code : int
        0 on success, 2 for configuration or input errors, 3 for stage
        failures

    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logger.setLevel(logging.DEBUG)

    try:
        args.func(args)
    except (pipeline.StageError, FloatingPointError) as err:
        logger.error(str(err))
        return EXIT_STAGE
    except (ValueError, KeyError, OSError) as err:
        logger.error(str(err))
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
