"""Logit-conditioned autoencoder: reconstruct inputs from a narrow bottleneck
plus the classifier's logits.

The decoder sees concatenation(bottleneck(x), logits(x)), so reconstructions
lean on what the classifier believes the image is. The classifier is frozen
while the autoencoder trains; attack-time input gradients still flow through
the classifier path (see ``recon_loss_and_input_grad``).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatchError
from .network import (
    Network,
    NetworkSpec,
    adam_step,
    backward,
    forward,
    init_adam,
    init_network,
    network_from_bytes,
    network_to_bytes,
)
from .validation import as_float_matrix

AE_MAGIC = b"AEN1"


@dataclass(eq=False)
class AutoencoderNet:
    """Encoder (d -> hidden -> bottleneck), decoder (bottleneck + K -> hidden -> d)
    and the trained classifier supplying logits."""

    encoder: Network
    decoder: Network
    classifier: Network

    def __post_init__(self):
        bottleneck = self.encoder.output_dim
        n_classes = self.classifier.output_dim
        if self.decoder.input_dim != bottleneck + n_classes:
            raise DimensionMismatchError(
                f"decoder input width {self.decoder.input_dim} != "
                f"bottleneck {bottleneck} + classes {n_classes}"
            )


def reconstruct(ae, x):
    """Decoder output in input space (not clipped)."""
    single = np.ndim(x) == 1
    X = as_float_matrix(x, d=ae.encoder.input_dim, name="x")
    code = forward(ae.encoder, X).logits
    logits = forward(ae.classifier, X).logits
    recon = forward(ae.decoder, np.hstack([code, logits])).logits
    return recon[0] if single else recon


def recon_loss_and_input_grad(ae, x):
    """Mean-squared reconstruction loss of one example and its full-graph
    input gradient (through encoder, decoder, classifier logits, and the
    direct appearance of x as the target)."""
    x = np.asarray(x, dtype=np.float64)
    enc_trace = forward(ae.encoder, x)
    clf_trace = forward(ae.classifier, x)
    code = np.hstack([enc_trace.logits, clf_trace.logits])
    dec_trace = forward(ae.decoder, code)
    recon = dec_trace.logits
    target = x[None, :] if x.ndim == 1 else x
    diff = recon - target
    loss = float(np.mean(diff * diff))
    grad_recon = 2.0 * diff / diff.size
    _, grad_code = backward(ae.decoder, dec_trace, grad_recon, need_param_grads=False)
    grad_code = np.atleast_2d(grad_code)
    bottleneck = ae.encoder.output_dim
    _, g_enc = backward(ae.encoder, enc_trace, grad_code[:, :bottleneck], need_param_grads=False)
    _, g_clf = backward(ae.classifier, clf_trace, grad_code[:, bottleneck:], need_param_grads=False)
    g_target = -grad_recon.sum(axis=0) if x.ndim == 1 else -grad_recon
    input_grad = np.atleast_2d(g_enc) + np.atleast_2d(g_clf) + np.atleast_2d(g_target)
    return loss, (input_grad[0] if x.ndim == 1 else input_grad)


class LogitAutoencoder(BaseEstimator):
    """Autoencoder whose decoder is conditioned on classifier logits.

    Parameters
    ----------
    classifier : DenseClassifier or Network
        Trained classifier; frozen during autoencoder training.
    hidden : int
        Hidden width of encoder and decoder.
    bottleneck : int
        Width of the bottleneck proper (the logits are concatenated to it).
    epochs, batch_size, learning_rate, seed : training schedule.
    """

    def __init__(
        self,
        classifier=None,
        hidden=256,
        bottleneck=10,
        epochs=20,
        batch_size=64,
        learning_rate=1e-3,
        seed=0,
    ):
        self.classifier = classifier
        self.hidden = hidden
        self.bottleneck = bottleneck
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def _classifier_net(self):
        if isinstance(self.classifier, Network):
            return self.classifier
        if hasattr(self.classifier, "network_"):
            return self.classifier.network_
        raise ValueError("classifier must be a trained DenseClassifier or Network")

    def fit(self, X, y=None):
        X = as_float_matrix(X, name="X")
        clf = self._classifier_net()
        d = X.shape[1]
        n_classes = clf.output_dim
        enc_spec = NetworkSpec((d, self.hidden, self.bottleneck), "gelu",
                               "linear_reconstruction", self.seed)
        dec_spec = NetworkSpec((self.bottleneck + n_classes, self.hidden, d), "gelu",
                               "linear_reconstruction", self.seed + 1)
        encoder = init_network(enc_spec)
        decoder = init_network(dec_spec)
        enc_state = init_adam(encoder, self.learning_rate)
        dec_state = init_adam(decoder, self.learning_rate)
        logits_all = forward(clf, X).logits  # constants w.r.t. training
        rng = np.random.default_rng(self.seed)
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], self.batch_size):
                idx = order[start : start + self.batch_size]
                xb = X[idx]
                enc_trace = forward(encoder, xb)
                code = np.hstack([enc_trace.logits, logits_all[idx]])
                dec_trace = forward(decoder, code)
                diff = dec_trace.logits - xb
                grad_recon = 2.0 * diff / diff.size
                dec_grads, grad_code = backward(decoder, dec_trace, grad_recon)
                enc_grads, _ = backward(encoder, enc_trace, grad_code[:, : self.bottleneck])
                adam_step(dec_state, decoder, dec_grads)
                adam_step(enc_state, encoder, enc_grads)
        self.net_ = AutoencoderNet(encoder, decoder, clf)
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("LogitAutoencoder is not fitted yet")

    def reconstruct(self, X):
        self._check_fitted()
        return reconstruct(self.net_, X)

    def save(self, path):
        """Write encoder and decoder as stacked NET1 blocks under an AEN1 header.

        The classifier is not embedded; it ships as its own NET1 checkpoint
        and is passed back in at load time.
        """
        self._check_fitted()
        save_autoencoder(self.net_, path)


def save_autoencoder(ae, path):
    with open(path, "wb") as fh:
        fh.write(AE_MAGIC)
        for net in (ae.encoder, ae.decoder):
            blob = network_to_bytes(net)
            fh.write(np.array([len(blob)], dtype="<f8").tobytes())
            fh.write(blob)


def load_autoencoder(path, classifier):
    """Load an AEN1 file; ``classifier`` is the Network that supplied logits."""
    from .errors import BadMagicError, TruncatedFileError

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != AE_MAGIC:
        raise BadMagicError(f"expected {AE_MAGIC!r} header, got {raw[:4]!r}")
    pos = 4
    nets = []
    for _ in range(2):
        if len(raw) < pos + 8:
            raise TruncatedFileError("AEN1 file ends inside a block header")
        size = int(np.frombuffer(raw, dtype="<f8", count=1, offset=pos)[0])
        pos += 8
        if len(raw) < pos + size:
            raise TruncatedFileError("AEN1 file ends inside a NET1 block")
        nets.append(network_from_bytes(raw[pos : pos + size]))
        pos += size
    return AutoencoderNet(nets[0], nets[1], classifier)
