"""NRT model: shared user/item factors feeding three heads.

* rating head: sigmoid MLP over (u, v) with a linear readout;
* review head: sigmoid MLP over (u, v) with a softmax over the vocabulary,
  scored against the review's term frequencies;
* tips head: a GRU decoder whose initial state fuses u, v, the one-hot of the
  predicted rating level and the review head's last hidden layer.

Everything is batched column-wise: ``u`` is ``(k_u, B)``, hidden states are
``(d, B)``, vocabulary distributions are ``(|V|, B)``.
"""
from dataclasses import asdict, dataclass, fields

import numpy as np

from nrt import kernels
from nrt.numerics import ParamSlot, log_softmax, softmax


class TrainingError(RuntimeError):
    pass


@dataclass
class Hypers:
    k_u: int = 300
    k_v: int = 300
    word_dim: int = 300
    d: int = 400
    rating_layers: int = 4
    review_layers: int = 1
    gru_layers: int = 1
    rating_levels: int = 6
    lambda_r: float = 1.0
    lambda_c: float = 1.0
    lambda_s: float = 1.0
    lambda_n: float = 1e-4
    batch_size: int = 200
    init_range: float = 0.1
    beam: int = 4
    max_len: int = 20
    ln_n: float = 2.0
    ln_alpha: float = 0.6
    rho: float = 0.95
    eps: float = 1e-6

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("k_u", "k_v", "word_dim", "d", "rating_layers", "review_layers",
                     "gru_layers", "rating_levels", "batch_size", "beam", "max_len"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.gru_layers != 1:
            raise ValueError("only a single GRU layer is supported")
        for name in ("lambda_r", "lambda_c", "lambda_s", "lambda_n", "ln_n", "ln_alpha"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.eps <= 0 or self.init_range < 0:
            raise ValueError("eps must be > 0 and init_range >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        cast = {k: (int(v) if known[k] in (int, "int") else float(v)) for k, v in data.items()}
        return cls(**cast)


def param_shapes(h, n_users, n_items, vocab_size):
    """Ordered mapping of parameter name -> shape."""
    d = h.d
    shapes = {
        "U": (h.k_u, n_users),
        "V": (h.k_v, n_items),
        "E": (h.word_dim, vocab_size),
    }
    for head, layers in (("r", h.rating_layers), ("c", h.review_layers)):
        shapes[f"{head}.W_uh"] = (d, h.k_u)
        shapes[f"{head}.W_vh"] = (d, h.k_v)
        shapes[f"{head}.b_h"] = (d, 1)
        for l in range(2, layers + 1):
            shapes[f"{head}.W_hh{l}"] = (d, d)
            shapes[f"{head}.b_h{l}"] = (d, 1)
    shapes["r.W_hr"] = (1, d)
    shapes["r.b"] = (1, 1)
    shapes["c.W_hc"] = (vocab_size, d)
    shapes["c.b"] = (vocab_size, 1)
    for gate in ("r", "z", "h"):
        shapes[f"s.W_s{gate}"] = (d, h.word_dim)
        shapes[f"s.W_h{gate}"] = (d, d)
        shapes[f"s.b_{gate}"] = (d, 1)
    shapes["s.W_uh"] = (d, h.k_u)
    shapes["s.W_vh"] = (d, h.k_v)
    shapes["s.W_rh"] = (d, h.rating_levels)
    shapes["s.W_ch"] = (d, d)
    shapes["s.b_c"] = (d, 1)
    shapes["s.W_hs"] = (vocab_size, d)
    shapes["s.b"] = (vocab_size, 1)
    return shapes


def is_bias(name):
    return name.rsplit(".", 1)[-1].startswith("b")


def is_regularized(name):
    # U, V and the neural parameters; word embeddings are left out.
    return name != "E"


def rating_loss(r_hat, r):
    """(1 / 2B) * sum (r_hat - r)^2."""
    r_hat = np.atleast_1d(np.asarray(r_hat, dtype=np.float64))
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if r_hat.size == 0:
        raise ValueError("rating_loss of an empty batch")
    err = r_hat - r
    return float(err @ err) / (2.0 * r_hat.size)


def review_loss(c_hat, bow):
    """Negative log-likelihood of a term-frequency bag under ``c_hat``."""
    return float(-sum(count * np.log(c_hat[k]) for k, count in bow.items()))


def rating_to_onehot(r_hat, levels):
    """Indicator of floor(r_hat) clamped to [0, levels-1].

    A scalar gives a ``(levels,)`` vector; an array of B ratings a
    ``(levels, B)`` matrix.
    """
    r = np.asarray(r_hat, dtype=np.float64)
    idx = np.clip(np.floor(r), 0, levels - 1).astype(np.int64)
    if r.ndim == 0:
        out = np.zeros(levels)
        out[idx] = 1.0
        return out
    out = np.zeros((levels, r.size))
    out[idx, np.arange(r.size)] = 1.0
    return out


@dataclass
class Losses:
    total: float
    rating: float
    review: float
    tips: float
    reg: float
    batch_size: int


class NRT:
    """Parameters and heads of the joint rating/review/tips model."""

    model_type = "nrt"

    def __init__(self, hypers, n_users, n_items, vocab_size, params=None):
        self.hypers = hypers
        self.n_users = n_users
        self.n_items = n_items
        self.vocab_size = vocab_size
        shapes = param_shapes(hypers, n_users, n_items, vocab_size)
        if params is None:
            params = {name: ParamSlot(name, np.zeros(shape)) for name, shape in shapes.items()}
        missing = set(shapes) - set(params)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise ValueError(f"parameter {name}: shape {params[name].shape}, expected {shape}")
        self.params = {name: params[name] for name in shapes}

    def __getitem__(self, name):
        return self.params[name].value

    def slots(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.reset()

    def copy(self):
        return NRT(self.hypers, self.n_users, self.n_items, self.vocab_size,
                   {k: p.copy() for k, p in self.params.items()})

    # -- shared MLP body -------------------------------------------------

    def _mlp_forward(self, head, u, v, layers):
        hs = [kernels.sigmoid(self[f"{head}.W_uh"] @ u + self[f"{head}.W_vh"] @ v
                              + self[f"{head}.b_h"])]
        for l in range(2, layers + 1):
            hs.append(kernels.sigmoid(self[f"{head}.W_hh{l}"] @ hs[-1] + self[f"{head}.b_h{l}"]))
        return hs

    def _mlp_backward(self, head, dh, hs, u, v):
        g = self.params
        for l in range(len(hs), 1, -1):
            da = dh * hs[l - 1] * (1.0 - hs[l - 1])
            g[f"{head}.W_hh{l}"].grad += da @ hs[l - 2].T
            g[f"{head}.b_h{l}"].grad += da.sum(axis=1, keepdims=True)
            dh = self[f"{head}.W_hh{l}"].T @ da
        da = dh * hs[0] * (1.0 - hs[0])
        g[f"{head}.W_uh"].grad += da @ u.T
        g[f"{head}.W_vh"].grad += da @ v.T
        g[f"{head}.b_h"].grad += da.sum(axis=1, keepdims=True)
        return self[f"{head}.W_uh"].T @ da, self[f"{head}.W_vh"].T @ da

    def _factors(self, users, items):
        users = np.atleast_1d(np.asarray(users, dtype=np.int64))
        items = np.atleast_1d(np.asarray(items, dtype=np.int64))
        if users.size and (users.min() < 0 or users.max() >= self.n_users):
            raise IndexError("user index out of range")
        if items.size and (items.min() < 0 or items.max() >= self.n_items):
            raise IndexError("item index out of range")
        return users, items, self["U"][:, users], self["V"][:, items]

    # -- heads --------------------------------------------------------------

    def rating_forward(self, users, items):
        """Predicted ratings (B,), last hidden layer (d, B), and the layer trace."""
        _, _, u, v = self._factors(users, items)
        hs = self._mlp_forward("r", u, v, self.hypers.rating_layers)
        r_hat = (self["r.W_hr"] @ hs[-1] + self["r.b"])[0]
        return r_hat, hs[-1], hs

    def predict_ratings(self, users, items, chunk=4096):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        out = [self.rating_forward(users[s:s + chunk], items[s:s + chunk])[0]
               for s in range(0, len(users), chunk)]
        return np.concatenate(out) if out else np.zeros(0)

    def review_forward(self, users, items):
        """Review word distribution (|V|, B), last hidden layer, layer trace."""
        _, _, u, v = self._factors(users, items)
        hs = self._mlp_forward("c", u, v, self.hypers.review_layers)
        c_hat = kernels.softmax_cols(self["c.W_hc"] @ hs[-1] + self["c.b"])
        return c_hat, hs[-1], hs

    def decoder_init(self, u, v, r_onehot, h_c):
        return np.tanh(self["s.W_uh"] @ u + self["s.W_vh"] @ v + self["s.W_rh"] @ r_onehot
                       + self["s.W_ch"] @ h_c + self["s.b_c"])

    def decoder_state(self, users, items):
        """Initial decoder state h0 (d, B) for (user, item) pairs."""
        _, _, u, v = self._factors(users, items)
        r_hat, _, _ = self.rating_forward(users, items)
        _, h_c, _ = self.review_forward(users, items)
        onehot = rating_to_onehot(r_hat, self.hypers.rating_levels)
        return self.decoder_init(u, v, onehot, h_c)

    def gru_step(self, h_prev, tokens):
        """One GRU update. ``h_prev`` (d,) with an int token, or (d, B) with B tokens."""
        vector = np.ndim(h_prev) == 1
        h = h_prev.reshape(-1, 1) if vector else h_prev
        x = self["E"][:, np.atleast_1d(tokens)]
        r, z, rh = kernels.gru_gates(self["s.W_sr"] @ x + self["s.W_hr"] @ h + self["s.b_r"],
                                     self["s.W_sz"] @ x + self["s.W_hz"] @ h + self["s.b_z"], h)
        _, h_new = kernels.gru_blend(self["s.W_sh"] @ x + self["s.W_hh"] @ rh + self["s.b_h"], z, h)
        return h_new[:, 0] if vector else h_new

    def word_logits(self, h):
        return self["s.W_hs"] @ h + (self["s.b"][:, 0] if np.ndim(h) == 1 else self["s.b"])

    def word_dist(self, h):
        return softmax(self.word_logits(h))

    def word_log_probs(self, h):
        return log_softmax(self.word_logits(h))

    def tips_nll(self, users, items, tips):
        """Teacher-forced per-sample tips NLL; ``tips`` is (B, T) padded with PAD_ID."""
        h = self.decoder_state(users, items)
        tips = np.atleast_2d(np.asarray(tips, dtype=np.int64))
        nll = np.zeros(tips.shape[0])
        for t in range(tips.shape[1]):
            _, step = kernels.softmax_xent_cols(self.word_logits(h), tips[:, t])
            nll += step
            if t + 1 < tips.shape[1]:
                h = self.gru_step(h, np.maximum(tips[:, t], 0))
        return nll

    # -- joint objective -----------------------------------------------

    def regularizer(self):
        return sum(float(np.vdot(p.value, p.value))
                   for name, p in self.params.items() if is_regularized(name))

    def joint_loss_and_backward(self, batch, backward=True):
        """Weighted multi-task loss for a Batch; accumulates gradients if ``backward``.

        The review and tips terms are per-batch means of per-sample sums.
        """
        hp = self.hypers
        B = len(batch)
        if B == 0:
            raise ValueError("empty batch")
        g = self.params
        users, items, u, v = self._factors(batch.users, batch.items)

        # rating head
        hr = self._mlp_forward("r", u, v, hp.rating_layers)
        r_hat = (self["r.W_hr"] @ hr[-1] + self["r.b"])[0]
        err = r_hat - batch.ratings
        loss_r = float(err @ err) / (2.0 * B)

        # review head
        hc = self._mlp_forward("c", u, v, hp.review_layers)
        logp_c = kernels.log_softmax_cols(self["c.W_hc"] @ hc[-1] + self["c.b"])
        C = batch.review_counts(self.vocab_size)
        loss_c = float(-(C * logp_c).sum()) / B

        # tips head, teacher forced
        onehot = rating_to_onehot(r_hat, hp.rating_levels)
        h0 = self.decoder_init(u, v, onehot, hc[-1])
        tips = batch.tips
        T = tips.shape[1]
        states, caches = [h0], []
        if T > 1:
            inputs = np.maximum(tips[:, :-1].T.reshape(-1), 0)
            X = self["E"][:, inputs]
            Xr = self["s.W_sr"] @ X + self["s.b_r"]
            Xz = self["s.W_sz"] @ X + self["s.b_z"]
            Xh = self["s.W_sh"] @ X + self["s.b_h"]
            for t in range(T - 1):
                sl = slice(t * B, (t + 1) * B)
                h = states[-1]
                r, z, rh = kernels.gru_gates(Xr[:, sl] + self["s.W_hr"] @ h,
                                             Xz[:, sl] + self["s.W_hz"] @ h, h)
                gc, h_new = kernels.gru_blend(Xh[:, sl] + self["s.W_hh"] @ rh, z, h)
                caches.append((r, z, rh, gc))
                states.append(h_new)
        H = np.hstack(states)
        targets = tips.T.reshape(-1)
        probs_s, nll = kernels.softmax_xent_cols(self["s.W_hs"] @ H + self["s.b"], targets)
        loss_s = float(nll.sum()) / B

        reg = self.regularizer()
        total = hp.lambda_r * loss_r + hp.lambda_c * loss_c + hp.lambda_s * loss_s + hp.lambda_n * reg
        for label, value in (("rating", loss_r), ("review", loss_c), ("tips", loss_s),
                             ("regularizer", reg)):
            if not np.isfinite(value):
                raise TrainingError(f"non-finite {label} loss ({value})")
        losses = Losses(total, loss_r, loss_c, loss_s, reg, B)
        if not backward:
            return losses

        # rating head backward
        dr = (hp.lambda_r / B) * err.reshape(1, -1)
        g["r.W_hr"].grad += dr @ hr[-1].T
        g["r.b"].grad += dr.sum(axis=1, keepdims=True)
        du, dv = self._mlp_backward("r", self["r.W_hr"].T @ dr, hr, u, v)

        # review head backward (gradient of the mean NLL wrt logits)
        dlog_c = (hp.lambda_c / B) * (np.exp(logp_c) * C.sum(axis=0) - C)
        g["c.W_hc"].grad += dlog_c @ hc[-1].T
        g["c.b"].grad += dlog_c.sum(axis=1, keepdims=True)
        dh_c = self["c.W_hc"].T @ dlog_c

        # tips head backward
        live = targets >= 0
        dlog_s = probs_s
        dlog_s[targets[live], np.flatnonzero(live)] -= 1.0
        dlog_s[:, ~live] = 0.0
        dlog_s *= hp.lambda_s / B
        g["s.W_hs"].grad += dlog_s @ H.T
        g["s.b"].grad += dlog_s.sum(axis=1, keepdims=True)
        dH = self["s.W_hs"].T @ dlog_s
        dh = dH[:, (T - 1) * B:]
        if T > 1:
            dXr = np.empty_like(Xr)
            dXz = np.empty_like(Xz)
            dXh = np.empty_like(Xh)
            for t in range(T - 2, -1, -1):
                sl = slice(t * B, (t + 1) * B)
                h = states[t]
                r, z, rh, gc = caches[t]
                da_g, da_z, dh_prev = kernels.gru_blend_backward(dh, h, z, gc)
                g["s.W_hh"].grad += da_g @ rh.T
                da_r, dh_reset = kernels.gru_reset_backward(self["s.W_hh"].T @ da_g, h, r)
                g["s.W_hz"].grad += da_z @ h.T
                g["s.W_hr"].grad += da_r @ h.T
                dh = (dh_prev + dh_reset + self["s.W_hz"].T @ da_z + self["s.W_hr"].T @ da_r
                      + dH[:, sl])
                dXr[:, sl] = da_r
                dXz[:, sl] = da_z
                dXh[:, sl] = da_g
            dX = np.zeros_like(X)
            for gate, dXg in (("r", dXr), ("z", dXz), ("h", dXh)):
                g[f"s.W_s{gate}"].grad += dXg @ X.T
                g[f"s.b_{gate}"].grad += dXg.sum(axis=1, keepdims=True)
                dX += self[f"s.W_s{gate}"].T @ dXg
            np.add.at(g["E"].grad.T, inputs, dX.T)

        dpre = dh * (1.0 - h0 * h0)
        g["s.W_uh"].grad += dpre @ u.T
        g["s.W_vh"].grad += dpre @ v.T
        g["s.W_rh"].grad += dpre @ onehot.T
        g["s.W_ch"].grad += dpre @ hc[-1].T
        g["s.b_c"].grad += dpre.sum(axis=1, keepdims=True)
        du += self["s.W_uh"].T @ dpre
        dv += self["s.W_vh"].T @ dpre
        dh_c += self["s.W_ch"].T @ dpre

        du_c, dv_c = self._mlp_backward("c", dh_c, hc, u, v)
        np.add.at(g["U"].grad.T, users, (du + du_c).T)
        np.add.at(g["V"].grad.T, items, (dv + dv_c).T)

        if hp.lambda_n:
            for name, p in self.params.items():
                if is_regularized(name):
                    p.grad += (2.0 * hp.lambda_n) * p.value
        return losses
