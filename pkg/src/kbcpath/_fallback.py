"""Pure NumPy implementation of the training kernel.

Mirrors ``_kernels.pyx`` argument for argument; used when the compiled
extension is unavailable or when explicitly selected.
"""

import numpy as np


def _log_sigmoid_neg(s):
    # softplus(s) = -log(sigmoid(-s))
    return np.logaddexp(0.0, s)


def batch_loss_grad(E, R, se, sr, bc, bp, qe, qr, cand, labels, weights, drop, scale,
                    gE, gR, gse, gsr, gbc):
    """Binary cross-entropy of a batch of sampled candidate lists and its gradient.

    Gradients are *added* into ``gE, gR, gse, gsr, gbc``.  Returns
    ``(loss, grad_projection_bias)``.
    """
    e_rows = E[qe]
    r_rows = R[qr]
    z = se * e_rows + sr * r_rows + bc
    a = np.tanh(z)
    qd = a * drop
    C = E[cand]
    s = np.einsum("bd,bkd->bk", qd, C) + bp
    loss = scale * float(np.sum(weights * (_log_sigmoid_neg(s) - labels * s)))

    g = scale * weights * (np.exp(-_log_sigmoid_neg(-s)) - labels)
    np.add.at(gE, cand, g[:, :, None] * qd[:, None, :])
    dz = np.einsum("bk,bkd->bd", g, C) * drop * (1.0 - a * a)
    np.add.at(gE, qe, dz * se)
    np.add.at(gR, qr, dz * sr)
    gse += np.sum(dz * e_rows, axis=0)
    gsr += np.sum(dz * r_rows, axis=0)
    gbc += np.sum(dz, axis=0)
    return loss, float(np.sum(g))
