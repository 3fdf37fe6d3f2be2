"""Biased inner-product latent factor model: r = u.v + b_u + b_v + b."""
import numpy as np

from nrt.model import Losses, TrainingError
from nrt.numerics import ParamSlot


class MatrixFactorization:
    model_type = "mf"

    def __init__(self, k, n_users, n_items, lambda_n=0.0, params=None, rho=0.95, eps=1e-6):
        self.k = k
        self.n_users = n_users
        self.n_items = n_items
        self.vocab_size = 0
        self.lambda_n = lambda_n
        self.hypers = {"k": k, "lambda_n": lambda_n, "rho": rho, "eps": eps}
        shapes = self.param_shapes(k, n_users, n_items)
        if params is None:
            params = {name: ParamSlot(name, np.zeros(s)) for name, s in shapes.items()}
        self.params = {name: params[name] for name in shapes}
        for name, s in shapes.items():
            if self.params[name].shape != s:
                raise ValueError(f"parameter {name}: shape {self.params[name].shape}, expected {s}")

    @staticmethod
    def param_shapes(k, n_users, n_items):
        return {"U": (k, n_users), "V": (k, n_items), "b_u": (1, n_users),
                "b_v": (1, n_items), "b": (1, 1)}

    def __getitem__(self, name):
        return self.params[name].value

    def slots(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.reset()

    def copy(self):
        return MatrixFactorization(self.k, self.n_users, self.n_items, self.lambda_n,
                                   {n: p.copy() for n, p in self.params.items()},
                                   self.hypers["rho"], self.hypers["eps"])

    def predict_ratings(self, users, items):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        return (np.einsum("kb,kb->b", self["U"][:, users], self["V"][:, items])
                + self["b_u"][0, users] + self["b_v"][0, items] + self["b"][0, 0])

    def mf_predict(self, u_idx, i_idx):
        return float(self.predict_ratings([u_idx], [i_idx])[0])

    def regularizer(self):
        return sum(float(np.vdot(self[n], self[n])) for n in ("U", "V", "b_u", "b_v"))

    def joint_loss_and_backward(self, batch, backward=True):
        """(1/2B) sum (r_hat - r)^2 + lambda * (|U|^2 + |V|^2 + |b_u|^2 + |b_v|^2)."""
        B = len(batch)
        if B == 0:
            raise ValueError("empty batch")
        users, items = batch.users, batch.items
        err = self.predict_ratings(users, items) - batch.ratings
        loss_r = float(err @ err) / (2.0 * B)
        reg = self.regularizer()
        total = loss_r + self.lambda_n * reg
        if not np.isfinite(total):
            raise TrainingError(f"non-finite rating loss ({total})")
        if backward:
            g = self.params
            e = err / B
            np.add.at(g["U"].grad.T, users, (self["V"][:, items] * e).T)
            np.add.at(g["V"].grad.T, items, (self["U"][:, users] * e).T)
            np.add.at(g["b_u"].grad[0], users, e)
            np.add.at(g["b_v"].grad[0], items, e)
            g["b"].grad[0, 0] += e.sum()
            if self.lambda_n:
                for n in ("U", "V", "b_u", "b_v"):
                    g[n].grad += 2.0 * self.lambda_n * self[n]
        return Losses(total, loss_r, 0.0, 0.0, reg, B)


def mf_init(k, n_users, n_items, lambda_n, seed, init_range=0.1, global_mean=0.0):
    rng = np.random.default_rng(seed)
    model = MatrixFactorization(k, n_users, n_items, lambda_n)
    model["U"][...] = rng.uniform(-init_range, init_range, (k, n_users))
    model["V"][...] = rng.uniform(-init_range, init_range, (k, n_items))
    model["b"][0, 0] = global_mean
    return model


def mf_train(split_corpus, k=10, lambda_n=1e-4, seed=0, epochs=50, batch_size=200,
             patience=5, rho=0.95, eps=1e-6, init_range=0.1):
    """Fit the biased MF model with the same Adadelta loop used for NRT.

    The global bias starts at the training mean rating. Returns (model, report).
    """
    from nrt.train import fit

    mean = float(np.mean([x.rating for x in split_corpus.train])) if split_corpus.train else 0.0
    model = mf_init(k, split_corpus.n_users, split_corpus.n_items, lambda_n, seed, init_range, mean)
    model.hypers.update(rho=rho, eps=eps)
    best, _, report = fit(model, split_corpus.train, split_corpus.valid, batch_size, seed,
                          epochs, patience, rho, eps)
    return best, report
