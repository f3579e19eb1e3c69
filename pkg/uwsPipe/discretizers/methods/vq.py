#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Vector-quantized neural discretizers.

A frame-wise VQ-VAE, trained with hand-written gradients and a
straight-through estimator, and the grouped quantizer and contrastive loss
of vq-wav2vec as stand-alone components.

Note
----
The VQ-VAE loss is minimized::

    (1/N) sum_n |x_n - dec(e_zn)|^2 + k1 |sg[e_zn] - v_n|^2
                                    + k2 |e_zn - sg[v_n]|^2

where v_n is the encoder output, z_n its nearest codebook row and sg the
stop-gradient operator.

"""

import dataclasses
from typing import Tuple

import numpy as np
import pandas as pds
from scipy import special

from uwsPipe import logger
from uwsPipe.discretizers.methods import general

# Names of the VQ-VAE weight arrays, in model-file order
PARAM_NAMES = ('enc_w1', 'enc_b1', 'enc_w2', 'enc_b2', 'codebook', 'dec_w1',
               'dec_b1', 'dec_w2', 'dec_b2')


@dataclasses.dataclass(frozen=True)
class VqVaeConfig(object):
    """VQ-VAE training settings.

    Parameters
    ----------
    n_units : int
        Codebook size U (default=50)
    latent_dim : int
        Latent dimension d_v (default=16)
    hidden_dim : int
        Hidden width of the encoder and decoder (default=32)
    k1 : float
        Commitment weight (default=2.0)
    k2 : float
        Codebook weight (default=4.0)
    lr : float
        Initial learning rate (default=2e-3)
    epochs : int
        Training epochs (default=20)
    batch_size : int
        Frames per update (default=256)
    stagnation_tol : float
        Relative loss improvement counted as stagnation (default=1e-4)
    patience : int
        Consecutive stagnant epochs that halve the learning rate (default=2)

    """

    n_units: int = 50
    latent_dim: int = 16
    hidden_dim: int = 32
    k1: float = 2.0
    k2: float = 4.0
    lr: float = 2.0e-3
    epochs: int = 20
    batch_size: int = 256
    stagnation_tol: float = 1.0e-4
    patience: int = 2

    def __post_init__(self):
        """Check the settings."""
        if self.n_units < 2:
            raise ValueError('the codebook needs at least 2 units')
        if min(self.latent_dim, self.hidden_dim, self.batch_size) < 1:
            raise ValueError('latent_dim, hidden_dim and batch_size must be '
                             'positive')
        if self.lr <= 0.0 or self.epochs < 0 or self.patience < 1:
            raise ValueError('lr, epochs or patience out of range')
        return


@dataclasses.dataclass(frozen=True, eq=False)
class VqVaeModel(object):
    """Frame-wise VQ-VAE weights.

    Parameters
    ----------
    enc_w1, enc_b1, enc_w2, enc_b2 : np.ndarray
        Encoder ``v = tanh(x W1 + b1) W2 + b2``
    codebook : np.ndarray
        U x d_v embeddings
    dec_w1, dec_b1, dec_w2, dec_b2 : np.ndarray
        Decoder ``mu(e) = tanh(e W1 + b1) W2 + b2``
    k1 : float
        Commitment weight
    k2 : float
        Codebook weight

    """

    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    codebook: np.ndarray
    dec_w1: np.ndarray
    dec_b1: np.ndarray
    dec_w2: np.ndarray
    dec_b2: np.ndarray
    k1: float = 2.0
    k2: float = 4.0

    def __post_init__(self):
        """Coerce the weights and check the model invariants."""
        for name in PARAM_NAMES:
            value = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(value)):
                raise ValueError('non-finite values in {:}'.format(name))
            object.__setattr__(self, name, value)

        if self.codebook.ndim != 2 or self.codebook.shape[0] < 2:
            raise ValueError('the codebook needs at least 2 rows')
        if self.enc_w2.shape[1] != self.codebook.shape[1] \
                or self.dec_w1.shape[0] != self.codebook.shape[1]:
            raise ValueError('latent dimensions of the encoder, codebook and '
                             'decoder differ')
        if self.dec_w2.shape[1] != self.enc_w1.shape[0]:
            raise ValueError('decoder output and encoder input differ')
        return

    @property
    def n_units(self):
        """Codebook size."""
        return self.codebook.shape[0]

    @property
    def feature_dim(self):
        """Input feature dimension."""
        return self.enc_w1.shape[0]

    @property
    def latent_dim(self):
        """Latent dimension."""
        return self.codebook.shape[1]

    def params(self):
        """Collect the weight arrays by name."""
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **kwargs):
        """Copy the model with some weights replaced."""
        return dataclasses.replace(self, **kwargs)


def quantize_nearest(latent, codebook):
    """Assign a latent vector to its closest codebook row.

    Parameters
    ----------
    latent : array-like
        Latent vector of length d
    codebook : array-like
        U x d embeddings

    Returns
    -------
    index : int
        Index of the nearest row in the Euclidean sense, lowest on ties

    """
    dist = np.sum((np.asarray(codebook) - np.asarray(latent))**2, axis=1)
    return int(np.argmin(dist))


def quantize_batch(latents, codebook):
    """Assign each row of a latent matrix to its closest codebook row.

    Parameters
    ----------
    latents : np.ndarray
        N x d latents
    codebook : np.ndarray
        U x d embeddings

    Returns
    -------
    indices : np.ndarray
        Nearest row per latent, lowest on ties

    """
    dist = np.sum((latents[:, None, :] - codebook[None, :, :])**2, axis=2)
    return np.argmin(dist, axis=1)


def _mlp(inputs, w1, b1, w2, b2):
    """Apply an affine, tanh, affine map, keeping the hidden activation."""
    hidden = np.tanh(inputs @ w1 + b1)
    return hidden @ w2 + b2, hidden


def encode(model, frames):
    """Map frames to latent vectors.

    Parameters
    ----------
    model : VqVaeModel
        Model weights
    frames : np.ndarray
        N x feature_dim frames

    Returns
    -------
    latents : np.ndarray
        N x latent_dim encoder outputs

    """
    return _mlp(np.asarray(frames, dtype=np.float64), model.enc_w1,
                model.enc_b1, model.enc_w2, model.enc_b2)[0]


def decode(model, embeddings):
    """Map codebook embeddings back to the feature space.

    Parameters
    ----------
    model : VqVaeModel
        Model weights
    embeddings : np.ndarray
        N x latent_dim embeddings

    Returns
    -------
    recon : np.ndarray
        N x feature_dim reconstructions

    """
    return _mlp(embeddings, model.dec_w1, model.dec_b1, model.dec_w2,
                model.dec_b2)[0]


def _as_frames(batch, model):
    """Extract a frame matrix and check its dimension."""
    frames = np.asarray(getattr(batch, 'frames', batch), dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != model.feature_dim:
        raise ValueError('frames of shape {:} do not match the feature '
                         'dimension {:d}'.format(frames.shape,
                                                 model.feature_dim))
    return frames


def vqvae_loss(batch, model, latents=None):
    """Evaluate the VQ-VAE loss.

    Parameters
    ----------
    batch : FrameSequence or np.ndarray
        Frames to evaluate
    model : VqVaeModel
        Model weights
    latents : np.ndarray or NoneType
        Latents to quantize in place of the encoder output (default=None)

    Returns
    -------
    loss : float
        Mean per-frame loss, to be minimized
    terms : dict
        Mean 'reconstruction', 'commitment' (k1) and 'codebook' (k2) terms

    Raises
    ------
    ValueError
        If the frame or latent dimensions do not match the model

    """
    frames = _as_frames(batch, model)
    if latents is None:
        latents = encode(model, frames)
    else:
        latents = np.asarray(latents, dtype=np.float64)
        if latents.shape != (frames.shape[0], model.latent_dim):
            raise ValueError('latents of shape {:} do not match {:}'.format(
                latents.shape, (frames.shape[0], model.latent_dim)))

    chosen = model.codebook[quantize_batch(latents, model.codebook)]
    recon = decode(model, chosen)
    sq_dist = np.sum((chosen - latents)**2, axis=1)

    terms = {'reconstruction': float(np.mean(np.sum((frames - recon)**2,
                                                    axis=1))),
             'commitment': float(model.k1 * np.mean(sq_dist)),
             'codebook': float(model.k2 * np.mean(sq_dist))}
    return sum(terms.values()), terms


def vqvae_gradients(batch, model):
    """Compute the loss gradients with the straight-through estimator.

    Parameters
    ----------
    batch : FrameSequence or np.ndarray
        Frames to evaluate
    model : VqVaeModel
        Model weights

    Returns
    -------
    loss : float
        Mean per-frame loss
    terms : dict
        Loss terms as in `vqvae_loss`
    grads : dict
        Gradient of each weight array, keyed as `PARAM_NAMES`

    Note
    ----
    Decoder and codebook gradients are exact for the reconstruction and
    codebook terms.  The encoder receives the gradient reaching the chosen
    embeddings from the decoder, copied through the quantizer, plus the
    commitment gradient.

    """
    frames = _as_frames(batch, model)
    n_frames = frames.shape[0]

    latents, enc_hidden = _mlp(frames, model.enc_w1, model.enc_b1,
                               model.enc_w2, model.enc_b2)
    index = quantize_batch(latents, model.codebook)
    chosen = model.codebook[index]
    recon, dec_hidden = _mlp(chosen, model.dec_w1, model.dec_b1,
                             model.dec_w2, model.dec_b2)

    diff = chosen - latents
    sq_dist = np.sum(diff**2, axis=1)
    terms = {'reconstruction': float(np.mean(np.sum((frames - recon)**2,
                                                    axis=1))),
             'commitment': float(model.k1 * np.mean(sq_dist)),
             'codebook': float(model.k2 * np.mean(sq_dist))}

    grads = dict()

    # Decoder
    d_recon = 2.0 * (recon - frames) / n_frames
    grads['dec_w2'] = dec_hidden.T @ d_recon
    grads['dec_b2'] = d_recon.sum(axis=0)
    d_dec_pre = (d_recon @ model.dec_w2.T) * (1.0 - dec_hidden**2)
    grads['dec_w1'] = chosen.T @ d_dec_pre
    grads['dec_b1'] = d_dec_pre.sum(axis=0)
    d_chosen = d_dec_pre @ model.dec_w1.T

    # Codebook: reconstruction and k2 terms, summed over the frames per row
    grads['codebook'] = np.zeros(shape=model.codebook.shape)
    np.add.at(grads['codebook'], index,
              d_chosen + 2.0 * model.k2 * diff / n_frames)

    # Encoder: straight-through copy plus the k1 term
    d_latents = d_chosen - 2.0 * model.k1 * diff / n_frames
    grads['enc_w2'] = enc_hidden.T @ d_latents
    grads['enc_b2'] = d_latents.sum(axis=0)
    d_enc_pre = (d_latents @ model.enc_w2.T) * (1.0 - enc_hidden**2)
    grads['enc_w1'] = frames.T @ d_enc_pre
    grads['enc_b1'] = d_enc_pre.sum(axis=0)

    return sum(terms.values()), terms, grads


def farthest_point_rows(points, n_rows, rng):
    """Pick distinct, well spread rows by farthest-point traversal.

    Parameters
    ----------
    points : np.ndarray
        Candidate points, one per row
    n_rows : int
        Number of rows to pick
    rng : np.random.Generator
        Generator choosing the first point

    Returns
    -------
    rows : np.ndarray
        n_rows x d chosen points; a small jitter separates duplicates when
        there are fewer distinct candidates than rows

    """
    chosen = [int(rng.integers(points.shape[0]))]
    dist = np.sum((points - points[chosen[0]])**2, axis=1)
    for _ in range(1, n_rows):
        chosen.append(int(np.argmax(dist)))
        dist = np.minimum(dist, np.sum((points - points[chosen[-1]])**2,
                                       axis=1))

    rows = points[chosen].copy()
    _, first = np.unique(rows, axis=0, return_index=True)
    dups = np.setdiff1d(np.arange(n_rows), first)
    if len(dups) > 0:
        scale = max(float(np.std(points)), 1.0e-3) * 1.0e-2
        rows[dups] += scale * rng.standard_normal((len(dups), rows.shape[1]))
    return rows


def init_model(feature_dim, cfg, rng, frames=None):
    """Draw initial VQ-VAE weights.

    Parameters
    ----------
    feature_dim : int
        Input feature dimension
    cfg : VqVaeConfig
        Model settings
    rng : np.random.Generator
        Random generator
    frames : np.ndarray or NoneType
        Training frames; the codebook starts on their encoded latents by
        farthest-point selection when given, at random otherwise
        (default=None)

    Returns
    -------
    model : VqVaeModel
        Initial model with distinct codebook rows

    """
    def _layer(n_in, n_out):
        return (rng.standard_normal((n_in, n_out)) / np.sqrt(n_in),
                np.zeros(n_out))

    enc_w1, enc_b1 = _layer(feature_dim, cfg.hidden_dim)
    enc_w2, enc_b2 = _layer(cfg.hidden_dim, cfg.latent_dim)
    dec_w1, dec_b1 = _layer(cfg.latent_dim, cfg.hidden_dim)
    dec_w2, dec_b2 = _layer(cfg.hidden_dim, feature_dim)

    if frames is None:
        codebook = rng.standard_normal((cfg.n_units, cfg.latent_dim))
    else:
        latents = _mlp(frames, enc_w1, enc_b1, enc_w2, enc_b2)[0]
        codebook = farthest_point_rows(latents, cfg.n_units, rng)

    return VqVaeModel(enc_w1, enc_b1, enc_w2, enc_b2, codebook, dec_w1,
                      dec_b1, dec_w2, dec_b2, k1=cfg.k1, k2=cfg.k2)


class LearningRateSchedule(object):
    """Halve the learning rate when the loss stagnates.

    Parameters
    ----------
    lr : float
        Initial learning rate
    tol : float
        Relative improvement below which an epoch is stagnant
        (default=1e-4)
    patience : int
        Consecutive stagnant epochs that trigger halving (default=2)

    """

    def __init__(self, lr, tol=1.0e-4, patience=2):
        """Initialize the schedule at the starting rate."""
        self.lr = lr
        self.tol = tol
        self.patience = patience
        self.stagnant = 0
        self.prev_loss = None
        return

    def step(self, loss):
        """Record an epoch loss.

        Parameters
        ----------
        loss : float
            Loss of the finished epoch

        Returns
        -------
        lr : float
            Learning rate for the next epoch

        """
        if self.prev_loss is not None:
            gain = (self.prev_loss - loss) / max(abs(self.prev_loss),
                                                 np.finfo(float).tiny)
            self.stagnant = self.stagnant + 1 if gain < self.tol else 0

        if self.stagnant >= self.patience:
            self.lr *= 0.5
            self.stagnant = 0
            logger.debug('learning rate halved to {:g}'.format(self.lr))

        self.prev_loss = loss
        return self.lr


class Adam(object):
    """Adam updates over a dictionary of weight arrays.

    Parameters
    ----------
    params : dict
        Initial weight arrays
    beta1 : float
        First moment decay (default=0.9)
    beta2 : float
        Second moment decay (default=0.999)
    eps : float
        Denominator floor (default=1e-8)

    """

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1.0e-8):
        """Initialize zero moments."""
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.n_steps = 0
        self.mom1 = {key: np.zeros_like(val) for key, val in params.items()}
        self.mom2 = {key: np.zeros_like(val) for key, val in params.items()}
        return

    def update(self, params, grads, lr):
        """Take one step.

        Parameters
        ----------
        params : dict
            Current weights
        grads : dict
            Loss gradients
        lr : float
            Learning rate

        Returns
        -------
        new_params : dict
            Updated weights

        """
        self.n_steps += 1
        new_params = dict()
        for key, val in params.items():
            self.mom1[key] = self.beta1 * self.mom1[key] \
                + (1.0 - self.beta1) * grads[key]
            self.mom2[key] = self.beta2 * self.mom2[key] \
                + (1.0 - self.beta2) * grads[key]**2
            mhat = self.mom1[key] / (1.0 - self.beta1**self.n_steps)
            vhat = self.mom2[key] / (1.0 - self.beta2**self.n_steps)
            new_params[key] = val - lr * mhat / (np.sqrt(vhat) + self.eps)
        return new_params


def vqvae_train(features, cfg=None, seed=0):
    """Train a VQ-VAE on every frame of a corpus.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects
    cfg : VqVaeConfig or NoneType
        Training settings, defaults if None (default=None)
    seed : int
        Random seed (default=0)

    Returns
    -------
    model : VqVaeModel
        Trained model
    trace : pds.DataFrame
        Per-epoch mean 'loss', its three terms and the 'lr' used, indexed
        by epoch number starting at 1

    Raises
    ------
    FloatingPointError
        If the loss stops being finite

    """
    if cfg is None:
        cfg = VqVaeConfig()

    frames = general.stack_frames(general.as_feature_dict(features))
    rng = np.random.default_rng(seed)
    model = init_model(frames.shape[1], cfg, rng, frames=frames)

    params = model.params()
    adam = Adam(params)
    schedule = LearningRateSchedule(cfg.lr, tol=cfg.stagnation_tol,
                                    patience=cfg.patience)
    lr = cfg.lr

    rows = list()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(frames.shape[0])
        sums = {'loss': 0.0, 'reconstruction': 0.0, 'commitment': 0.0,
                'codebook': 0.0}
        for start in range(0, frames.shape[0], cfg.batch_size):
            batch = frames[order[start:start + cfg.batch_size]]
            loss, terms, grads = vqvae_gradients(batch, model)
            if not np.isfinite(loss):
                raise FloatingPointError(''.join([
                    'VQ-VAE loss diverged at epoch {:d} '.format(epoch),
                    '(learning rate {:g}); lower the '.format(lr),
                    'learning rate']))

            weight = batch.shape[0] / frames.shape[0]
            sums['loss'] += weight * loss
            for key, val in terms.items():
                sums[key] += weight * val

            params = adam.update(params, grads, lr)
            model = model.replace(**params)

        sums['lr'] = lr
        rows.append(sums)
        logger.info('VQ-VAE epoch {:d}: loss {:.6g}'.format(epoch,
                                                            sums['loss']))
        lr = schedule.step(sums['loss'])

    trace = pds.DataFrame(rows, columns=['loss', 'reconstruction',
                                         'commitment', 'codebook', 'lr'],
                          index=pds.RangeIndex(1, len(rows) + 1,
                                               name='epoch'))
    return model, trace


def frame_units(model, seq):
    """Label every frame with its nearest codebook row.

    Parameters
    ----------
    model : VqVaeModel
        Trained model
    seq : FrameSequence
        Frames of one utterance

    Returns
    -------
    indices : np.ndarray
        Unit index per frame

    """
    return quantize_batch(encode(model, _as_frames(seq, model)),
                          model.codebook)


def decode_units(model, seq):
    """Discretize one utterance into a RAW unit sequence.

    Parameters
    ----------
    model : VqVaeModel
        Trained model
    seq : FrameSequence
        Frames of one utterance

    Returns
    -------
    units : UnitSequence
        Runs of frames sharing a codebook row

    """
    return general.labels_to_units(frame_units(model, seq), seq.hop_s,
                                   seq.utterance_id)


def save_vqvae(model, path):
    """Write a VQ-VAE model file."""
    general.write_model_file(path, general.model_magic['vq'], model.params(),
                             attrs={'k1': model.k1, 'k2': model.k2})
    return


def load_vqvae(path):
    """Read a VQ-VAE model file.

    Parameters
    ----------
    path : str
        Model file

    Returns
    -------
    model : VqVaeModel
        Stored model

    """
    arrays, attrs = general.read_model_file(path, general.model_magic['vq'])
    return VqVaeModel(k1=attrs['k1'], k2=attrs['k2'],
                      **{name: arrays[name] for name in PARAM_NAMES})


# ----------------------------------------------------------------------------
# vq-wav2vec building blocks


@dataclasses.dataclass(frozen=True, eq=False)
class GroupedCodebook(object):
    """Per-group codebooks that quantize partitions of a latent vector.

    Parameters
    ----------
    codebooks : np.ndarray
        G x V x (d / G) group codebooks

    """

    codebooks: np.ndarray

    def __post_init__(self):
        """Check the codebook shape."""
        books = np.array(self.codebooks, dtype=np.float64)
        if books.ndim != 3:
            raise ValueError('group codebooks must be a G x V x (d/G) array')
        if books.shape[1] < 2:
            raise ValueError('each group needs at least 2 variables')
        object.__setattr__(self, 'codebooks', books)
        return

    @property
    def groups(self):
        """Number of groups, G."""
        return self.codebooks.shape[0]

    @property
    def n_vars(self):
        """Variables per group, V."""
        return self.codebooks.shape[1]

    @property
    def dim(self):
        """Full latent dimension, d."""
        return self.codebooks.shape[0] * self.codebooks.shape[2]

    @property
    def n_labels(self):
        """Number of distinct index tuples, V**G."""
        return self.n_vars**self.groups


def init_grouped_codebook(dim, groups=2, n_vars=4, rng=None):
    """Draw random group codebooks.

    Parameters
    ----------
    dim : int
        Latent dimension d
    groups : int
        Number of groups G (default=2)
    n_vars : int
        Variables per group V (default=4)
    rng : np.random.Generator or NoneType
        Random generator, seeded with 0 if None (default=None)

    Returns
    -------
    gc : GroupedCodebook
        Random codebooks

    Raises
    ------
    ValueError
        If d is not divisible by G

    """
    if groups < 1 or dim % groups != 0:
        raise ValueError('latent dimension {:d} is not divisible by {:d} '
                         'groups'.format(dim, groups))
    if rng is None:
        rng = np.random.default_rng(0)
    return GroupedCodebook(rng.standard_normal((groups, n_vars,
                                                dim // groups)))


def grouped_quantize(latent, gc, mode='hard', temperature=1.0, seed=None):
    """Quantize each partition of a latent vector with its group codebook.

    Parameters
    ----------
    latent : array-like
        Latent vector of length d
    gc : GroupedCodebook
        Group codebooks
    mode : str
        'hard' for the nearest row per group or 'gumbel' for a Gumbel-max
        sample per group (default='hard')
    temperature : float
        Gumbel temperature, larger is more random (default=1.0)
    seed : int or NoneType
        Seed of the Gumbel noise (default=None)

    Returns
    -------
    indices : tuple
        Selected variable per group, in [0, V)
    quantized : np.ndarray
        Concatenation of the selected rows

    Raises
    ------
    ValueError
        If the latent length differs from the codebook dimension or the
        mode is unknown

    Note
    ----
    Logits are negative squared distances.  Gumbel mode returns
    argmax(logits / temperature + g) with g drawn from a standard Gumbel
    distribution, a sample of softmax(logits / temperature) that tends to
    the hard choice as the temperature tends to zero.

    """
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape != (gc.dim,):
        raise ValueError('latent of shape {:} does not match dimension {:d}'
                         .format(latent.shape, gc.dim))

    parts = latent.reshape((gc.groups, 1, -1))
    logits = -np.sum((gc.codebooks - parts)**2, axis=2)

    if mode == 'hard':
        index = np.argmax(logits, axis=1)
    elif mode == 'gumbel':
        if temperature <= 0.0:
            raise ValueError('the Gumbel temperature must be positive')
        noise = np.random.default_rng(seed).gumbel(size=logits.shape)
        index = np.argmax(logits / temperature + noise, axis=1)
    else:
        raise ValueError('unknown quantization mode "{:}"'.format(mode))

    quantized = np.concatenate([gc.codebooks[g, index[g]]
                                for g in range(gc.groups)])
    return tuple(int(ii) for ii in index), quantized


def tuple_to_label(indices, n_vars):
    """Map an index tuple to a single unit label.

    Parameters
    ----------
    indices : tuple
        Variable per group
    n_vars : int
        Variables per group, V

    Returns
    -------
    label : int
        Row-major (lexicographic) position of the tuple in [V]^G

    """
    return int(np.ravel_multi_index(tuple(indices),
                                    tuple([n_vars] * len(indices))))


def grouped_frame_units(latents, gc):
    """Label a latent sequence with hard grouped quantization.

    Parameters
    ----------
    latents : np.ndarray
        N x d latents
    gc : GroupedCodebook
        Group codebooks

    Returns
    -------
    labels : np.ndarray
        Lexicographic tuple label per frame

    """
    return np.array([tuple_to_label(grouped_quantize(row, gc)[0], gc.n_vars)
                     for row in np.asarray(latents)], dtype=int)


@dataclasses.dataclass(frozen=True)
class ContrastiveLossConfig(object):
    """Settings of the contrastive future-prediction loss.

    Parameters
    ----------
    transforms : tuple
        K step transforms h_k given as (W_k, b_k) pairs
    lam : float
        Weight of the negative samples (default=1.0)
    n_negatives : int
        Negatives drawn per position (default=10)

    """

    transforms: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    lam: float = 1.0
    n_negatives: int = 10

    def __post_init__(self):
        """Coerce the transforms and check the settings."""
        object.__setattr__(self, 'transforms', tuple(
            (np.asarray(w_k, dtype=np.float64),
             np.asarray(b_k, dtype=np.float64))
            for w_k, b_k in self.transforms))
        if len(self.transforms) < 1:
            raise ValueError('at least one prediction step is needed')
        if self.n_negatives < 1:
            raise ValueError('at least one negative is needed')
        return

    @property
    def n_steps(self):
        """Number of prediction steps, K."""
        return len(self.transforms)


def identity_transforms(n_steps, dim):
    """Build K identity step transforms of dimension d."""
    return tuple((np.eye(dim), np.zeros(dim)) for _ in range(n_steps))


def sample_negatives(targets, n_negatives, rng):
    """Draw distractors uniformly from the same utterance.

    Parameters
    ----------
    targets : np.ndarray
        T x d quantized vectors of one utterance
    n_negatives : int
        Distractors per position
    rng : np.random.Generator
        Random generator

    Returns
    -------
    negatives : np.ndarray
        T x n_negatives x d distractors

    """
    targets = np.asarray(targets)
    draw = rng.integers(targets.shape[0], size=(targets.shape[0],
                                                n_negatives))
    return targets[draw]


def contrastive_loss(context, targets, negatives, cfg):
    """Evaluate the contrastive future-prediction objective.

    Parameters
    ----------
    context : np.ndarray
        T x d context vectors c_i
    targets : np.ndarray
        T x d true quantized vectors
    negatives : np.ndarray
        T x n x d distractors; row i holds the distractors of position i
    cfg : ContrastiveLossConfig
        Step transforms and negative weight

    Returns
    -------
    objective : float
        Sum over steps k and positions i < T - k of
        log sigma(z_{i+k} . h_k(c_i)) + lam * mean_j log sigma(-n_{i+k,j} .
        h_k(c_i)); maximized, callers negate it to minimize

    Raises
    ------
    ValueError
        If T <= K, no negatives are given, or shapes disagree

    """
    context = np.asarray(context, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64)

    n_times = context.shape[0]
    if n_times <= cfg.n_steps:
        raise ValueError('sequence length {:d} must exceed the {:d} '
                         'prediction steps'.format(n_times, cfg.n_steps))
    if negatives.ndim != 3 or negatives.shape[1] == 0:
        raise ValueError('at least one negative per position is needed')
    if targets.shape != context.shape \
            or negatives.shape[0] != n_times \
            or negatives.shape[2] != context.shape[1]:
        raise ValueError('context, target and negative shapes disagree')

    total = 0.0
    for k, (w_k, b_k) in enumerate(cfg.transforms, start=1):
        pred = context[:n_times - k] @ w_k.T + b_k
        pos = np.sum(targets[k:] * pred, axis=1)
        neg = np.einsum('ijd,id->ij', negatives[k:], pred)
        total += np.sum(special.log_expit(pos)) + cfg.lam * np.sum(
            np.mean(special.log_expit(-neg), axis=1))
    return float(total)
