"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
here with the same signature and must agree to within a few ulps.
All arrays are float64, laid out (features, batch).
"""
import numpy as np

NAME = "python"


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_gates(a_r, a_z, h):
    """Reset/update gates from their pre-activations; also returns r*h."""
    r = sigmoid(a_r)
    z = sigmoid(a_z)
    return r, z, r * h


def gru_blend(a_g, z, h):
    """Candidate state and the convex blend z*h + (1-z)*g."""
    g = np.tanh(a_g)
    return g, z * h + (1.0 - z) * g


def gru_blend_backward(dh_new, h, z, g):
    dz = dh_new * (h - g)
    da_z = dz * z * (1.0 - z)
    da_g = dh_new * (1.0 - z) * (1.0 - g * g)
    dh = dh_new * z
    return da_g, da_z, dh


def gru_reset_backward(drh, h, r):
    da_r = drh * h * r * (1.0 - r)
    return da_r, drh * r


def log_softmax_cols(logits):
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def softmax_cols(logits):
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def softmax_xent_cols(logits, targets):
    """Column softmax plus per-column NLL of ``targets``.

    ``targets`` is int64; a negative entry marks a padded column whose loss
    is 0. Returns (probs, nll).
    """
    logp = log_softmax_cols(logits)
    probs = np.exp(logp)
    nll = np.zeros(logits.shape[1])
    live = np.flatnonzero(targets >= 0)
    nll[live] = -logp[targets[live], live]
    return probs, nll


def lcs_length(a, b):
    a = list(a)
    b = list(b)
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                cur.append(max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]
