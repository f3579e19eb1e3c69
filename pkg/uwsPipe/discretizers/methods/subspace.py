#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Subspace phone loops, plain and hierarchical.

The parameters of every unit HMM are packed into one real vector: the
transition logits, the mixture-weight logits, the means and the log
variances.  A subspace places each unit at ``W e + b`` for a low-dimensional
embedding ``e``; the hierarchical variant builds ``W`` and ``b`` for a
language from template matrices weighted by a language embedding ``alpha``:

    W(alpha) = M_0 + sum_k alpha_k M_k,   b(alpha) = m_0 + sum_k alpha_k m_k

Training keeps a Dirichlet posterior over the unit weights and MAP
estimates, under standard normal priors, of the unit and language
embeddings.

"""

import dataclasses
from typing import Tuple

import numpy as np
from scipy import special

from uwsPipe import logger
from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.utils import corpus

# Log-variance range kept by the decoding map
MIN_LOG_VAR = np.log(1.0e-6)
MAX_LOG_VAR = np.log(1.0e6)


@dataclasses.dataclass(frozen=True)
class ParamLayout(object):
    """Position of each unit HMM parameter block in a packed vector.

    Parameters
    ----------
    n_states : int
        States per unit, S
    n_components : int
        Gaussians per state, C
    dim : int
        Feature dimension, D

    """

    n_states: int
    n_components: int
    dim: int

    @property
    def shapes(self):
        """Shapes of the transition, weight, mean and log-variance blocks."""
        gauss = (self.n_states, self.n_components, self.dim)
        return [(self.n_states, 2), (self.n_states, self.n_components),
                gauss, gauss]

    @property
    def size(self):
        """Length of a packed vector, P."""
        return int(np.sum([np.prod(shape) for shape in self.shapes]))

    def split(self, vectors):
        """Unpack vectors with any leading shape into the four blocks."""
        vectors = np.asarray(vectors, dtype=np.float64)
        lead = vectors.shape[:-1]
        blocks = list()
        start = 0
        for shape in self.shapes:
            stop = start + int(np.prod(shape))
            blocks.append(vectors[..., start:stop].reshape(lead + shape))
            start = stop
        return blocks

    def join(self, blocks):
        """Pack the four blocks, sharing leading shape, into vectors."""
        lead = blocks[0].shape[:-2]
        return np.concatenate([np.reshape(block, lead + (-1,))
                               for block in blocks], axis=-1)


def layout_of(unit):
    """Get the packing layout matching a unit HMM."""
    return ParamLayout(unit.n_states, unit.n_components, unit.dim)


def unit_from_vector(vector, layout):
    """Decode a packed vector into a valid unit HMM.

    Parameters
    ----------
    vector : array-like
        Packed parameter vector of length P
    layout : ParamLayout
        Packing layout

    Returns
    -------
    unit : UnitHmm
        Softmax transitions and mixture weights, identity means and variances
        given by the exponential of the clamped log variances

    """
    trans, weights, means, log_var = layout.split(vector)
    return hmm.UnitHmm(special.softmax(trans, axis=-1),
                       special.softmax(weights, axis=-1), means,
                       np.exp(np.clip(log_var, MIN_LOG_VAR, MAX_LOG_VAR)))


def vector_from_unit(unit):
    """Encode a unit HMM as the packed preimage of its parameters.

    Parameters
    ----------
    unit : UnitHmm
        Unit HMM with strictly positive probabilities

    Returns
    -------
    vector : np.ndarray
        Centred log-probabilities, means and log variances

    """
    with np.errstate(divide='ignore'):
        log_trans = np.log(unit.trans)
        log_weights = np.log(unit.weights)

    blocks = [log_trans - log_trans.mean(axis=-1, keepdims=True),
              log_weights - log_weights.mean(axis=-1, keepdims=True),
              unit.means, np.log(unit.variances)]
    vector = layout_of(unit).join(blocks)
    if not np.all(np.isfinite(vector)):
        raise ValueError('unit HMM has zero probabilities, no finite preimage')
    return vector


def vectors_to_arrays(vectors, layout):
    """Decode U packed vectors into stacked phone-loop arrays.

    Parameters
    ----------
    vectors : np.ndarray
        U x P packed vectors
    layout : ParamLayout
        Packing layout

    Returns
    -------
    log_trans, log_weights, means, log_var : np.ndarray
        Normalized log transitions and weights, means and clamped log
        variances with a leading unit axis

    """
    trans, weights, means, log_var = layout.split(vectors)
    return (trans - special.logsumexp(trans, axis=-1, keepdims=True),
            weights - special.logsumexp(weights, axis=-1, keepdims=True),
            means, np.clip(log_var, MIN_LOG_VAR, MAX_LOG_VAR))


# ----------------------------------------------------------------------------
# Subspace estimation from labelled source data


@dataclasses.dataclass(frozen=True, eq=False)
class Subspace(object):
    """Linear subspace of unit HMM parameters.

    Parameters
    ----------
    W : np.ndarray
        P x E basis
    b : np.ndarray
        P offset
    layout : ParamLayout
        Packing layout of the unit parameters
    embeddings : np.ndarray
        Embeddings of the source units, one row per unit (default=empty)
    labels : tuple
        Labels of the source units (default=())
    reconstruction_error : float
        Relative error of the source units rebuilt from their embeddings
        (default=0.0)

    """

    W: np.ndarray
    b: np.ndarray
    layout: ParamLayout
    embeddings: np.ndarray = dataclasses.field(
        default_factory=lambda: np.zeros((0, 0)))
    labels: Tuple[str, ...] = ()
    reconstruction_error: float = 0.0

    def __post_init__(self):
        """Check the basis and offset against the layout."""
        object.__setattr__(self, 'W', np.array(self.W, dtype=np.float64,
                                               ndmin=2))
        object.__setattr__(self, 'b', np.array(self.b, dtype=np.float64))
        if self.W.shape[0] != self.layout.size \
                or self.b.shape != (self.layout.size,):
            raise ValueError('subspace shapes {:} and {:} do not match {:d} '
                             'unit parameters'.format(self.W.shape,
                                                      self.b.shape,
                                                      self.layout.size))
        if not np.all(np.isfinite(self.W)) or not np.all(np.isfinite(self.b)):
            raise ValueError('subspace parameters must be finite')
        return

    @property
    def e_dim(self):
        """Embedding dimension, E."""
        return self.W.shape[1]

    def vectors(self, embeddings):
        """Map embeddings, one per row, to packed parameter vectors."""
        return np.asarray(embeddings) @ self.W.T + self.b

    def unit(self, embedding):
        """Decode a single embedding into a unit HMM."""
        return unit_from_vector(self.vectors(embedding), self.layout)

    def project(self, unit):
        """Least-squares embedding of a unit HMM in the subspace."""
        if self.e_dim == 0:
            return np.zeros(0)
        return np.linalg.lstsq(self.W, vector_from_unit(unit) - self.b,
                               rcond=None)[0]


def relative_error(approx, target):
    """Relative Frobenius error, zero for an exact zero target."""
    norm = np.linalg.norm(target)
    diff = np.linalg.norm(np.asarray(approx) - np.asarray(target))
    return float(diff / norm) if norm > 0.0 else float(diff)


def pca_fit(vectors, e_dim):
    """Fit an offset and basis so unit-variance embeddings rebuild vectors.

    Parameters
    ----------
    vectors : np.ndarray
        n x P packed vectors
    e_dim : int
        Embedding dimension, E

    Returns
    -------
    W : np.ndarray
        P x E basis, zero past the rank of the centred vectors
    b : np.ndarray
        P mean vector
    embeddings : np.ndarray
        n x E embeddings

    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n_vec, n_param = vectors.shape
    b = vectors.mean(axis=0)
    W = np.zeros((n_param, e_dim))
    emb = np.zeros((n_vec, e_dim))
    if e_dim == 0 or n_vec < 2:
        return W, b, emb

    left, sing, right = np.linalg.svd(vectors - b, full_matrices=False)
    rank = int(np.sum(sing > 1.0e-10 * max(1.0, sing[0])))
    rank = min(rank, e_dim)
    scale = np.sqrt(n_vec)
    W[:, :rank] = right[:rank].T * sing[:rank] / scale
    emb[:, :rank] = left[:, :rank] * scale
    return W, b, emb


def fit_subspace_from_units(units, e_dim=100, labels=()):
    """Fit a subspace to known unit HMMs.

    Parameters
    ----------
    units : list
        UnitHmm objects sharing one layout
    e_dim : int
        Embedding dimension (default=100)
    labels : tuple
        Labels of the units (default=())

    Returns
    -------
    sub : Subspace
        Subspace, source embeddings and relative reconstruction error of the
        decoded units

    Raises
    ------
    ValueError
        If fewer than two units are given or `e_dim` is negative

    """
    if len(units) < 2:
        raise ValueError('insufficient data: need at least 2 source units, '
                         'got {:d}'.format(len(units)))
    if e_dim < 0:
        raise ValueError('embedding dimension must not be negative')

    layout = layout_of(units[0])
    vectors = np.stack([vector_from_unit(unit) for unit in units])
    W, b, emb = pca_fit(vectors, e_dim)

    rebuilt = [unit_from_vector(vec, layout) for vec in emb @ W.T + b]
    error = relative_error(
        np.concatenate([np.concatenate([u.trans.ravel(), u.weights.ravel(),
                                        u.means.ravel(), u.variances.ravel()])
                        for u in rebuilt]),
        np.concatenate([np.concatenate([u.trans.ravel(), u.weights.ravel(),
                                        u.means.ravel(), u.variances.ravel()])
                        for u in units]))
    logger.info('subspace of dimension {:d} from {:d} units, relative '
                'error {:.3g}'.format(e_dim, len(units), error))
    return Subspace(W, b, layout, emb, tuple(labels), error)


def unit_segments(features, gold_units, hop_s=None):
    """Collect the frames of every gold unit token.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects
    gold_units : dict
        Gold UnitSequence objects keyed by utterance id
    hop_s : float or NoneType
        Frame hop, from the features if None (default=None)

    Returns
    -------
    segments : dict
        Lists of frame matrices keyed by unit label, silence excluded, in
        sorted label order

    """
    segments = dict()
    for uid, seq in general.as_feature_dict(features).items():
        hop = seq.hop_s if hop_s is None else hop_s
        centres = (np.arange(seq.n_frames) + 0.5) * hop
        for tok in gold_units[uid].tokens:
            if tok.label == corpus.SILENCE_LABEL:
                continue
            sel = (centres >= tok.start_s) & (centres < tok.end_s)
            if np.any(sel):
                segments.setdefault(tok.label, list()).append(
                    seq.frames[sel])
    return {label: segments[label] for label in sorted(segments.keys())}


def source_units(sources, hyper=None, n_iters=5, seed=0):
    """Train one unit HMM per gold label of labelled source corpora.

    Parameters
    ----------
    sources : list
        (features, gold units) pairs; labels are made distinct per pair
    hyper : AudHyperParams or NoneType
        Hyperparameters (default=None)
    n_iters : int
        Training iterations per unit (default=5)
    seed : int
        Random seed (default=0)

    Returns
    -------
    units : list
        Trained UnitHmm objects
    labels : list
        Labels as '<source index>:<unit label>'

    Raises
    ------
    ValueError
        If a unit has no segment long enough to train its HMM

    """
    units = list()
    labels = list()
    for isrc, (features, gold) in enumerate(sources):
        for label, segments in unit_segments(features, gold).items():
            try:
                units.append(hmm.train_unit_hmm(segments, hyper=hyper,
                                                n_iters=n_iters, seed=seed))
            except ValueError as verr:
                raise ValueError('source {:d} unit "{:}": {:}'.format(
                    isrc, label, verr))
            labels.append('{:d}:{:}'.format(isrc, label))
    return units, labels


def fit_subspace(sources, e_dim=100, hyper=None, n_iters=5, seed=0):
    """Estimate a unit subspace from labelled source corpora.

    Parameters
    ----------
    sources : list
        (features, gold units) pairs, features keyed or listed by utterance
        and gold units keyed by utterance id
    e_dim : int
        Embedding dimension (default=100)
    hyper : AudHyperParams or NoneType
        Hyperparameters of the supervised unit HMMs (default=None)
    n_iters : int
        Training iterations per unit HMM (default=5)
    seed : int
        Random seed (default=0)

    Returns
    -------
    sub : Subspace
        Fitted subspace

    Raises
    ------
    ValueError
        If a unit lacks data or fewer than two units are found

    """
    units, labels = source_units(sources, hyper=hyper, n_iters=n_iters,
                                 seed=seed)
    return fit_subspace_from_units(units, e_dim=e_dim, labels=labels)


@dataclasses.dataclass(frozen=True, eq=False)
class HierSubspace(object):
    """Template subspaces combined by a language embedding.

    Parameters
    ----------
    M : np.ndarray
        (K + 1) x P x E template bases, the first one the shared basis
    m : np.ndarray
        (K + 1) x P template offsets
    layout : ParamLayout
        Packing layout of the unit parameters
    alphas : np.ndarray
        Embeddings of the source languages, one row per language
        (default=empty)
    reconstruction_error : float
        Relative error of the rebuilt source unit vectors (default=0.0)

    """

    M: np.ndarray
    m: np.ndarray
    layout: ParamLayout
    alphas: np.ndarray = dataclasses.field(
        default_factory=lambda: np.zeros((0, 0)))
    reconstruction_error: float = 0.0

    def __post_init__(self):
        """Check the template shapes."""
        object.__setattr__(self, 'M', np.array(self.M, dtype=np.float64))
        object.__setattr__(self, 'm', np.array(self.m, dtype=np.float64))
        if self.M.ndim != 3 or self.m.shape != self.M.shape[:2] \
                or self.M.shape[1] != self.layout.size:
            raise ValueError('inconsistent template shapes {:} and {:}'.format(
                self.M.shape, self.m.shape))
        return

    @property
    def n_lang_dim(self):
        """Language embedding dimension, K."""
        return self.M.shape[0] - 1

    @property
    def e_dim(self):
        """Unit embedding dimension, E."""
        return self.M.shape[2]

    def basis(self, alpha):
        """Derive W and b of the language with embedding `alpha`."""
        coef = np.concatenate([[1.0], np.asarray(alpha, dtype=np.float64)])
        return (np.tensordot(coef, self.M, axes=1),
                np.tensordot(coef, self.m, axes=1))

    def subspace(self, alpha):
        """Build the Subspace of the language with embedding `alpha`.

        Raises
        ------
        ValueError
            If the derived basis or offset is not finite

        """
        W, b = self.basis(alpha)
        return Subspace(W, b, self.layout)


def _language_fit(vectors, sub, alpha):
    """Embeddings minimizing the reconstruction error of one language."""
    W, b = sub.basis(alpha)
    if W.shape[1] == 0:
        return np.zeros((vectors.shape[0], 0))
    return np.linalg.lstsq(W, (vectors - b).T, rcond=None)[0].T


def _hier_loss(vectors, embeddings, alphas, M, m):
    """Summed squared reconstruction error over every language."""
    total = 0.0
    for vec, emb, alpha in zip(vectors, embeddings, alphas):
        coef = np.concatenate([[1.0], alpha])
        W = np.tensordot(coef, M, axes=1)
        b = np.tensordot(coef, m, axes=1)
        total += np.sum((vec - emb @ W.T - b)**2)
    return float(total)


def fit_hier_from_units(languages, n_lang_dim=6, e_dim=100, tol=1.0e-6,
                        max_iters=200):
    """Fit template subspaces to the unit HMMs of several languages.

    Parameters
    ----------
    languages : list
        One list of UnitHmm objects per source language
    n_lang_dim : int
        Language embedding dimension, K (default=6)
    e_dim : int
        Unit embedding dimension, E (default=100)
    tol : float
        Stop once the relative loss improves by less than this (default=1e-6)
    max_iters : int
        Most alternating rounds (default=200)

    Returns
    -------
    hier : HierSubspace
        Templates, source language embeddings and relative reconstruction
        error of the unit vectors

    Raises
    ------
    ValueError
        With fewer than two languages or more language dimensions than
        languages

    Note
    ----
    Each round refits the templates by joint least squares, then the unit
    embeddings and language embeddings of each language by least squares,
    so the loss never increases.

    """
    n_lang = len(languages)
    if n_lang < 2:
        raise ValueError('need at least 2 source languages, got {:d}'.format(
            n_lang))
    if n_lang_dim > n_lang:
        raise ValueError(''.join(['language embedding dimension {:d} '.format(
            n_lang_dim), 'exceeds the {:d} source languages'.format(n_lang)]))

    layout = layout_of(languages[0][0])
    vectors = [np.stack([vector_from_unit(unit) for unit in units])
               for units in languages]
    pooled = fit_subspace_from_units([unit for units in languages
                                      for unit in units], e_dim=e_dim)

    # Shared template from the pooled fit, language offsets from the
    # principal directions of the per-language mean residuals
    M = np.zeros((n_lang_dim + 1, layout.size, e_dim))
    m = np.zeros((n_lang_dim + 1, layout.size))
    M[0] = pooled.W
    m[0] = pooled.b
    alphas = np.zeros((n_lang, n_lang_dim))
    if n_lang_dim == 0:
        return HierSubspace(M, m, layout, alphas,
                            pooled.reconstruction_error)

    resid = np.stack([vec.mean(axis=0) for vec in vectors]) - pooled.b
    left, sing, right = np.linalg.svd(resid, full_matrices=False)
    scale = np.sqrt(n_lang)
    for k in range(min(n_lang_dim, sing.shape[0])):
        if sing[k] > 1.0e-10 * max(1.0, sing[0]):
            alphas[:, k] = left[:, k] * scale
            m[k + 1] = right[k] * sing[k] / scale

    sub = HierSubspace(M, m, layout)
    embeddings = [_language_fit(vec, sub, alpha)
                  for vec, alpha in zip(vectors, alphas)]
    norm = float(np.sum([np.sum(vec**2) for vec in vectors])) or 1.0
    loss = _hier_loss(vectors, embeddings, alphas, M, m) / norm

    for iteration in range(max_iters):
        # Templates: vec = G (coef kron [e, 1])
        design = np.vstack([np.hstack([coef * np.hstack([emb, np.ones(
            (len(emb), 1))]) for coef in np.concatenate([[1.0], alpha])])
            for emb, alpha in zip(embeddings, alphas)])
        stack = np.linalg.lstsq(design, np.vstack(vectors), rcond=None)[0]
        stack = stack.T.reshape((layout.size, n_lang_dim + 1, e_dim + 1))
        M = np.ascontiguousarray(stack[:, :, :e_dim].transpose(1, 0, 2))
        m = np.ascontiguousarray(stack[:, :, e_dim].T)
        sub = HierSubspace(M, m, layout)

        embeddings = [_language_fit(vec, sub, alpha)
                      for vec, alpha in zip(vectors, alphas)]

        for lang, (vec, emb) in enumerate(zip(vectors, embeddings)):
            target = (vec - emb @ M[0].T - m[0]).ravel()
            cols = np.stack([(emb @ M[k].T + m[k]).ravel()
                             for k in range(1, n_lang_dim + 1)], axis=1)
            alphas[lang] = np.linalg.lstsq(cols, target, rcond=None)[0]

        new_loss = _hier_loss(vectors, embeddings, alphas, M, m) / norm
        done = loss - new_loss < tol
        loss = new_loss
        if done:
            logger.info('hierarchical subspace converged after {:d} '
                        'rounds'.format(iteration + 1))
            break

    return HierSubspace(M, m, layout, alphas, float(np.sqrt(loss)))


def fit_hier_subspace(languages, n_lang_dim=6, e_dim=100, hyper=None,
                      n_iters=5, seed=0, tol=1.0e-6, max_iters=200):
    """Estimate template subspaces from several labelled source languages.

    Parameters
    ----------
    languages : list
        One (features, gold units) pair per source language
    n_lang_dim : int
        Language embedding dimension, K (default=6)
    e_dim : int
        Unit embedding dimension, E (default=100)
    hyper : AudHyperParams or NoneType
        Hyperparameters of the supervised unit HMMs (default=None)
    n_iters : int
        Training iterations per unit HMM (default=5)
    seed : int
        Random seed (default=0)
    tol : float
        Convergence threshold of the alternating fit (default=1e-6)
    max_iters : int
        Most alternating rounds (default=200)

    Returns
    -------
    hier : HierSubspace
        Fitted templates and source language embeddings

    """
    per_lang = [source_units([lang], hyper=hyper, n_iters=n_iters,
                             seed=seed)[0] for lang in languages]
    return fit_hier_from_units(per_lang, n_lang_dim=n_lang_dim, e_dim=e_dim,
                               tol=tol, max_iters=max_iters)


# ----------------------------------------------------------------------------
# Training on an unlabelled target corpus


@dataclasses.dataclass(frozen=True)
class SubspaceTrainConfig(object):
    """Settings of the embedding updates in subspace training.

    Parameters
    ----------
    step_size : float
        Initial gradient step (default=1e-2)
    n_grad_steps : int
        Gradient steps per M-step; 0 keeps the initial units (default=10)
    max_halvings : int
        Step halvings tried before an update is dropped (default=30)
    init_scale : float
        Standard deviation of the initial unit embeddings (default=1.0)
    train_alpha : bool
        Update the language embedding of hierarchical models (default=True)

    """

    step_size: float = 1.0e-2
    n_grad_steps: int = 10
    max_halvings: int = 30
    init_scale: float = 1.0
    train_alpha: bool = True

    def __post_init__(self):
        """Check the settings."""
        if not self.step_size > 0.0 or self.n_grad_steps < 0 \
                or self.max_halvings < 0 or self.init_scale < 0.0:
            raise ValueError('invalid subspace training settings')
        return


@dataclasses.dataclass(eq=False)
class SubspaceVbState(object):
    """Variational state of a subspace trainer.

    Parameters
    ----------
    pi_prior : np.ndarray
        Dirichlet prior of the unit weights
    pi_posterior : np.ndarray
        Dirichlet posterior of the unit weights
    embeddings : np.ndarray
        U x E unit embeddings
    alpha : np.ndarray
        Language embedding, empty for plain subspace models
    elbo : list
        Lower bound after every E-step, the initial one first
    responsibilities : dict
        N x U unit posteriors of the last E-step, keyed by utterance id

    """

    pi_prior: np.ndarray
    pi_posterior: np.ndarray
    embeddings: np.ndarray
    alpha: np.ndarray
    elbo: list = dataclasses.field(default_factory=list)
    responsibilities: dict = dataclasses.field(default_factory=dict)


def unit_objective(vectors, stats, layout):
    """Expected complete-data log-likelihood of each unit and its gradient.

    Parameters
    ----------
    vectors : np.ndarray
        U x P packed unit vectors
    stats : SufficientStats
        Expected counts of the last E-step
    layout : ParamLayout
        Packing layout

    Returns
    -------
    value : np.ndarray
        U objective values, unit-weight terms excluded
    grad : np.ndarray
        U x P gradient with respect to the packed vectors

    """
    log_trans, log_weights, means, log_var = vectors_to_arrays(vectors,
                                                               layout)
    raw_log_var = layout.split(vectors)[3]
    inside = (raw_log_var >= MIN_LOG_VAR) & (raw_log_var <= MAX_LOG_VAR)
    prec = np.exp(-log_var)
    occ = stats.occupancy[..., None]
    resid = stats.sum_xx - 2.0 * means * stats.sum_x + occ * means**2

    value = np.sum(stats.trans * log_trans, axis=(1, 2)) \
        + np.sum(stats.occupancy * log_weights, axis=(1, 2)) \
        - 0.5 * np.sum(occ * (hmm.LOG_2PI + log_var) + resid * prec,
                       axis=(1, 2, 3))

    grad = layout.join([
        stats.trans - stats.trans.sum(axis=-1, keepdims=True)
        * np.exp(log_trans),
        stats.occupancy - stats.occupancy.sum(axis=-1, keepdims=True)
        * np.exp(log_weights),
        (stats.sum_x - occ * means) * prec,
        (-0.5 * occ + 0.5 * resid * prec) * inside])
    return value, grad


def subspace_log_params(vectors, layout, pi_posterior):
    """Log parameters of subspace units with expected log unit weights."""
    log_trans, log_weights, means, log_var = vectors_to_arrays(vectors,
                                                               layout)
    const = log_weights - 0.5 * np.sum(hmm.LOG_2PI + log_var, axis=-1)
    return hmm.LogParams(hmm.expected_log_dirichlet(pi_posterior), log_trans,
                         means, np.exp(-log_var), const)


def _embedding_steps(emb, steps, W, b, stats, layout, cfg):
    """Gradient ascent on the unit embeddings with per-unit step halving."""
    def objective(cur):
        val, grad = unit_objective(cur @ W.T + b, stats, layout)
        return val - 0.5 * np.sum(cur**2, axis=1), grad @ W - cur

    value, grad = objective(emb)
    for _ in range(cfg.n_grad_steps):
        pending = np.ones(emb.shape[0], dtype=bool)
        trial_steps = steps.copy()
        for _ in range(cfg.max_halvings + 1):
            trial = emb + trial_steps[:, None] * grad
            trial_val, _ = objective(trial)
            accept = pending & (trial_val >= value)
            emb[accept] = trial[accept]
            pending &= ~accept
            if not np.any(pending):
                break
            trial_steps[pending] *= 0.5

        if np.any(pending):
            logger.debug('{:d} unit updates dropped after {:d} halvings'
                         .format(int(pending.sum()), cfg.max_halvings))
        steps = np.where(pending, steps, 2.0 * trial_steps)
        value, grad = objective(emb)
    return emb, steps


def _alpha_steps(alpha, step, emb, hier, stats, cfg):
    """Gradient ascent on the language embedding with step halving."""
    layout = hier.layout

    def objective(cur):
        W, b = hier.basis(cur)
        val, grad = unit_objective(emb @ W.T + b, stats, layout)
        dalpha = np.einsum('up,kpe,ue->k', grad, hier.M[1:], emb) \
            + hier.m[1:] @ grad.sum(axis=0) - cur
        return float(val.sum() - 0.5 * np.sum(cur**2)), dalpha

    value, grad = objective(alpha)
    for _ in range(cfg.n_grad_steps):
        trial_step = step
        for _ in range(cfg.max_halvings + 1):
            trial = alpha + trial_step * grad
            trial_val, _ = objective(trial)
            if trial_val >= value:
                alpha = trial
                step = 2.0 * trial_step
                break
            trial_step *= 0.5
        value, grad = objective(alpha)
    return alpha, step


def silence_segments(features, silence):
    """Collect the runs of annotated silence frames."""
    segments = list()
    for uid, seq in features.items():
        mask = silence.get(uid, np.zeros(seq.n_frames, dtype=bool))
        edges = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int),
                                                       [0]])))
        for start, stop in zip(edges[::2], edges[1::2]):
            segments.append(seq.frames[start:stop])
    return segments


def _train_subspace_loop(features, hier, alpha, n_units, n_iters, seed, cfg,
                         hyper, silence, silence_unit, name):
    """Generalized EM shared by the plain and hierarchical trainers."""
    if hyper is None:
        hyper = hmm.AudHyperParams()
    if cfg is None:
        cfg = SubspaceTrainConfig()
    features = general.as_feature_dict(features)
    layout = hier.layout
    if next(iter(features.values())).dim != layout.dim:
        raise ValueError('features do not match the subspace dimension '
                         '{:d}'.format(layout.dim))
    silence_unit = hmm.resolve_silence_unit(silence, silence_unit)

    rng = np.random.default_rng(seed)
    emb = cfg.init_scale * rng.standard_normal((n_units, hier.e_dim))
    alpha = np.array(alpha, dtype=np.float64)
    sil_segs = silence_segments(features, silence) if silence else []
    if silence_unit is not None and len(sil_segs) > 0:
        sil_hmm = hmm.train_unit_hmm(sil_segs, hyper=dataclasses.replace(
            hyper, n_states=layout.n_states,
            n_components=layout.n_components), seed=seed)
        emb[silence_unit] = hier.subspace(alpha).project(sil_hmm)

    pi_prior = np.full(n_units, hyper.unit_concentration)
    state = SubspaceVbState(pi_prior, pi_prior.copy(), emb, alpha)
    steps = np.full(n_units, cfg.step_size)
    alpha_step = cfg.step_size

    for iteration in range(n_iters + 1):
        W, b = hier.basis(state.alpha)
        vectors = state.embeddings @ W.T + b
        stats = hmm.accumulate_stats(features, subspace_log_params(
            vectors, layout, state.pi_posterior))
        if not stats.is_finite():
            raise FloatingPointError('NaN in AUD statistics at iteration '
                                     '{:d}'.format(iteration))

        state.elbo.append(stats.log_marginal
                          - hmm.kl_dirichlet(state.pi_posterior, pi_prior)
                          - 0.5 * np.sum(state.embeddings**2)
                          - 0.5 * np.sum(state.alpha**2))
        state.responsibilities = stats.responsibilities
        hmm.check_elbo(state.elbo, name)
        logger.info('{:} iteration {:d}: lower bound {:.6g}'.format(
            name, iteration, state.elbo[-1]))
        if iteration == n_iters:
            break

        state.pi_posterior = pi_prior + stats.entries
        state.embeddings, steps = _embedding_steps(
            state.embeddings.copy(), steps, W, b, stats, layout, cfg)
        if cfg.train_alpha and state.alpha.shape[0] > 0:
            state.alpha, alpha_step = _alpha_steps(
                state.alpha.copy(), alpha_step, state.embeddings, hier, stats,
                cfg)

    W, b = hier.basis(state.alpha)
    units = [unit_from_vector(vec, layout)
             for vec in state.embeddings @ W.T + b]
    loop = hmm.PhoneLoop(units, state.pi_posterior / state.pi_posterior.sum(),
                         silence_unit=silence_unit)
    return loop, state


def as_hier(sub):
    """View a plain subspace as a hierarchy with no language templates."""
    return HierSubspace(sub.W[None], sub.b[None], sub.layout)


def train_shmm(features, subspace, n_units=100, n_iters=10, seed=0, cfg=None,
               hyper=None, silence=None, silence_unit=None):
    """Train a subspace phone loop on an unlabelled corpus.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects
    subspace : Subspace
        Fitted subspace
    n_units : int
        Number of units, U (default=100)
    n_iters : int
        E-step and M-step iterations (default=10)
    seed : int
        Random seed (default=0)
    cfg : SubspaceTrainConfig or NoneType
        Embedding update settings (default=None)
    hyper : AudHyperParams or NoneType
        Unit-weight prior and silence HMM settings (default=None)
    silence : dict or NoneType
        Boolean silence masks keyed by utterance id (default=None)
    silence_unit : int or NoneType
        Unit reserved for silence, unit 0 when `silence` flags any frame
        and None is given (default=None)

    Returns
    -------
    loop : PhoneLoop
        Phone loop decoded from the unit embeddings
    state : SubspaceVbState
        Unit-weight posterior, embeddings, lower bound trace and
        responsibilities

    Raises
    ------
    FloatingPointError
        If the statistics stop being finite

    """
    return _train_subspace_loop(features, as_hier(subspace), np.zeros(0),
                                n_units, n_iters, seed, cfg, hyper, silence,
                                silence_unit, 'SHMM')


def train_hshmm(features, hier, n_units=100, n_iters=10, seed=0, cfg=None,
                hyper=None, silence=None, silence_unit=None, alpha=None):
    """Train a hierarchical subspace phone loop on an unlabelled corpus.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects
    hier : HierSubspace
        Fitted templates
    n_units : int
        Number of units, U (default=100)
    n_iters : int
        E-step and M-step iterations (default=10)
    seed : int
        Random seed (default=0)
    cfg : SubspaceTrainConfig or NoneType
        Embedding update settings; `train_alpha` False freezes the language
        embedding (default=None)
    hyper : AudHyperParams or NoneType
        Unit-weight prior and silence HMM settings (default=None)
    silence : dict or NoneType
        Boolean silence masks keyed by utterance id (default=None)
    silence_unit : int or NoneType
        Unit reserved for silence (default=None)
    alpha : array-like or NoneType
        Initial language embedding, zeros if None (default=None)

    Returns
    -------
    loop : PhoneLoop
        Phone loop decoded from the unit embeddings
    state : SubspaceVbState
        Training state
    alpha : np.ndarray
        Language embedding of the target corpus

    """
    if alpha is None:
        alpha = np.zeros(hier.n_lang_dim)
    elif np.shape(alpha) != (hier.n_lang_dim,):
        raise ValueError('language embedding must have {:d} values'.format(
            hier.n_lang_dim))

    loop, state = _train_subspace_loop(features, hier, alpha, n_units,
                                       n_iters, seed, cfg, hyper, silence,
                                       silence_unit, 'H-SHMM')
    return loop, state, state.alpha


def save_subspace(sub, path):
    """Write a subspace model file."""
    general.write_model_file(
        path, general.model_magic['subspace'],
        {'W': sub.W, 'b': sub.b, 'embeddings': sub.embeddings},
        attrs={'layout': dataclasses.asdict(sub.layout),
               'labels': list(sub.labels),
               'reconstruction_error': sub.reconstruction_error})
    return


def load_subspace(path):
    """Read a subspace model file."""
    arrays, attrs = general.read_model_file(path,
                                            general.model_magic['subspace'])
    return Subspace(arrays['W'], arrays['b'], ParamLayout(**attrs['layout']),
                    arrays['embeddings'], tuple(attrs['labels']),
                    attrs['reconstruction_error'])


def save_hier_subspace(hier, path):
    """Write a hierarchical subspace model file."""
    general.write_model_file(
        path, general.model_magic['hier_subspace'],
        {'M': hier.M, 'm': hier.m, 'alphas': hier.alphas},
        attrs={'layout': dataclasses.asdict(hier.layout),
               'reconstruction_error': hier.reconstruction_error})
    return


def load_hier_subspace(path):
    """Read a hierarchical subspace model file."""
    arrays, attrs = general.read_model_file(
        path, general.model_magic['hier_subspace'])
    return HierSubspace(arrays['M'], arrays['m'],
                        ParamLayout(**attrs['layout']), arrays['alphas'],
                        attrs['reconstruction_error'])


def split_settings(settings):
    """Sort plug-in settings into training and hyperparameter blocks.

    Parameters
    ----------
    settings : dict
        SubspaceTrainConfig and AudHyperParams fields

    Returns
    -------
    cfg : SubspaceTrainConfig
        Embedding update settings
    hyper : AudHyperParams
        Hyperparameters

    Raises
    ------
    ValueError
        For a setting belonging to neither block

    """
    cfg_keys = [field.name for field in dataclasses.fields(
        SubspaceTrainConfig)]
    hyper_keys = [field.name for field in dataclasses.fields(
        hmm.AudHyperParams)]
    unknown = sorted(set(settings.keys()) - set(cfg_keys) - set(hyper_keys))
    if len(unknown) > 0:
        raise ValueError('unknown subspace training settings: {:}'.format(
            unknown))

    return (SubspaceTrainConfig(**{key: val for key, val in settings.items()
                                   if key in cfg_keys}),
            hmm.AudHyperParams(**{key: val for key, val in settings.items()
                                  if key in hyper_keys}))
