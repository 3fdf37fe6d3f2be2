"""Initialization, Adadelta, the epoch loop with early stopping, and checkpoints."""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from nrt import corpus as corpus_mod
from nrt.container import ContainerError, read_container, write_container
from nrt.evalmetrics import rating_metrics
from nrt.model import NRT, Hypers, TrainingError, is_bias, param_shapes
from nrt.numerics import ParamSlot

logger = logging.getLogger(__name__)


class CheckpointError(RuntimeError):
    pass


def init_params(hypers, n_users, n_items, vocab_size, seed):
    """All weights and factors ~ U[-init_range, init_range]; biases zero."""
    rng = np.random.default_rng(seed)
    a = hypers.init_range
    params = {}
    for name, shape in param_shapes(hypers, n_users, n_items, vocab_size).items():
        value = np.zeros(shape) if is_bias(name) else rng.uniform(-a, a, size=shape)
        params[name] = ParamSlot(name, value)
    return NRT(hypers, n_users, n_items, vocab_size, params)


class Adadelta:
    """Per-slot Adadelta accumulators E[g^2] and E[dx^2]."""

    def __init__(self, slots, rho=0.95, eps=1e-6):
        self.rho = rho
        self.eps = eps
        self.sq_grad = {p.name: np.zeros_like(p.value) for p in slots}
        self.sq_delta = {p.name: np.zeros_like(p.value) for p in slots}

    def step_slot(self, slot):
        g = slot.grad
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {slot.name}")
        rho, eps = self.rho, self.eps
        eg = self.sq_grad[slot.name]
        ed = self.sq_delta[slot.name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = -(np.sqrt(ed + eps) / np.sqrt(eg + eps)) * g
        ed *= rho
        ed += (1.0 - rho) * delta * delta
        slot.value += delta
        slot.reset()

    def step(self, slots):
        for p in slots:
            self.step_slot(p)

    def arrays(self):
        out = {}
        for name in self.sq_grad:
            out[f"adadelta.sq_grad/{name}"] = self.sq_grad[name]
            out[f"adadelta.sq_delta/{name}"] = self.sq_delta[name]
        return out

    def load_arrays(self, arrays):
        for name in self.sq_grad:
            self.sq_grad[name] = arrays[f"adadelta.sq_grad/{name}"].copy()
            self.sq_delta[name] = arrays[f"adadelta.sq_delta/{name}"].copy()


@dataclass
class EpochRow:
    epoch: int
    total: float
    rating: float
    review: float
    tips: float
    valid_mae: float
    valid_rmse: float
    seconds: float
    best: bool = False
    valid_rouge1_f: float = float("nan")
    monitor: str = "valid"  # part the valid_* columns were measured on


@dataclass
class TrainReport:
    rows: list = field(default_factory=list)

    @property
    def best_epoch(self):
        best = [r.epoch for r in self.rows if r.best]
        return best[-1] if best else None

    COLUMNS = ("epoch", "total", "rating", "review", "tips", "valid_mae", "valid_rmse",
               "valid_rouge1_f", "monitor", "seconds", "best")

    def to_csv(self):
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            vals = []
            for c in self.COLUMNS:
                v = getattr(r, c)
                vals.append(str(int(v)) if isinstance(v, bool) else
                            (f"{v:.10g}" if isinstance(v, float) else str(v)))
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def epoch_seed(seed, epoch):
    return np.random.SeedSequence([seed, epoch])


def evaluate_ratings(model, part):
    if not part:
        return float("nan"), float("nan")
    users = np.array([x.user_id for x in part])
    items = np.array([x.item_id for x in part])
    ev = rating_metrics(list(zip([x.rating for x in part], model.predict_ratings(users, items))))
    return ev.mae, ev.rmse


def fit(model, train_part, valid_part, batch_size, seed, max_epochs, patience=5,
        rho=0.95, eps=1e-6, on_epoch=None, optimizer=None):
    """Adadelta over shuffled mini-batches with early stopping on validation RMSE.

    Works for any model exposing ``slots()``, ``copy()``,
    ``joint_loss_and_backward(batch)`` and ``predict_ratings``. The end-of-epoch
    rating RMSE is measured on ``valid_part``, or on ``train_part`` when there
    is no validation data; the best epoch by that RMSE is returned. Early
    stopping after ``patience`` stale epochs applies only with validation data.
    Returns (best model, optimizer, TrainReport).
    """
    opt = optimizer or Adadelta(model.slots(), rho, eps)
    report = TrainReport()
    best_model, best_rmse, stale = model.copy(), float("inf"), 0
    for epoch in range(1, max_epochs + 1):
        start = time.perf_counter()
        sums = np.zeros(4)
        try:
            for batch in corpus_mod.batches(train_part, batch_size, epoch_seed(seed, epoch)):
                model.zero_grad()
                losses = model.joint_loss_and_backward(batch)
                opt.step(model.slots())
                sums += len(batch) * np.array([losses.total, losses.rating, losses.review, losses.tips])
        except TrainingError as exc:
            exc.best_model, exc.report = best_model, report
            raise
        sums /= max(len(train_part), 1)
        mae, rmse = evaluate_ratings(model, valid_part or train_part)
        row = EpochRow(epoch, *map(float, sums), mae, rmse, time.perf_counter() - start,
                       monitor="valid" if valid_part else "train")
        if on_epoch is not None:
            on_epoch(model, row)
        if rmse < best_rmse:
            best_model, best_rmse, stale = model.copy(), rmse, 0
            row.best = True
        else:
            stale += 1
        report.rows.append(row)
        logger.info("epoch %d J=%.4f Lr=%.4f Lc=%.4f Ls=%.4f %s MAE=%.4f RMSE=%.4f",
                    epoch, row.total, row.rating, row.review, row.tips, row.monitor, mae, rmse)
        if valid_part and stale >= patience:
            break
    return best_model, opt, report


def train(split_corpus, hypers, seed=0, max_epochs=50, patience=5, on_epoch=None):
    """Initialize an NRT model for ``split_corpus`` and fit it."""
    model = init_params(hypers, split_corpus.n_users, split_corpus.n_items,
                        len(split_corpus.vocab), seed)
    best, opt, report = fit(model, split_corpus.train, split_corpus.valid, hypers.batch_size,
                            seed, max_epochs, patience, hypers.rho, hypers.eps, on_epoch)
    return best, report


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(model, path, vocab_hash, optimizer=None, extra_meta=None):
    arrays = {name: p.value for name, p in model.params.items()}
    if optimizer is not None:
        arrays.update(optimizer.arrays())
    meta = {
        "model_type": model.model_type,
        "hypers": model.hypers.to_dict() if hasattr(model.hypers, "to_dict") else dict(model.hypers),
        "dims": {"n_users": model.n_users, "n_items": model.n_items,
                 "vocab_size": getattr(model, "vocab_size", 0)},
        "vocab_hash": vocab_hash,
        "has_optimizer": optimizer is not None,
    }
    meta.update(extra_meta or {})
    write_container(path, "checkpoint", arrays, meta)


def load_checkpoint(path, expected_vocab_hash=None, expected_vocab_size=None):
    """Return (model, optimizer-or-None, meta)."""
    from nrt.baseline import MatrixFactorization

    try:
        meta, arrays = read_container(path, kind="checkpoint")
    except ContainerError as exc:
        raise CheckpointError(str(exc)) from None
    dims = meta["dims"]
    if expected_vocab_hash is not None and meta["vocab_hash"] != expected_vocab_hash:
        raise CheckpointError(f"{path}: field vocab_hash does not match the corpus vocabulary")
    if expected_vocab_size is not None and dims["vocab_size"] != expected_vocab_size \
            and meta["model_type"] == "nrt":
        raise CheckpointError(
            f"{path}: field vocab_size is {dims['vocab_size']}, expected {expected_vocab_size}")
    if meta["model_type"] == "nrt":
        hypers = Hypers.from_dict(meta["hypers"])
        shapes = param_shapes(hypers, dims["n_users"], dims["n_items"], dims["vocab_size"])
        model_cls = None
    elif meta["model_type"] == "mf":
        hypers = dict(meta["hypers"])
        shapes = MatrixFactorization.param_shapes(hypers["k"], dims["n_users"], dims["n_items"])
        model_cls = MatrixFactorization
    else:
        raise CheckpointError(f"{path}: field model_type is {meta['model_type']!r}")
    params = {}
    for name, shape in shapes.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: field {name} missing")
        if tuple(arrays[name].shape) != tuple(shape):
            raise CheckpointError(f"{path}: field {name} has shape {arrays[name].shape}, expected {shape}")
        params[name] = ParamSlot(name, arrays[name])
    if model_cls is None:
        model = NRT(hypers, dims["n_users"], dims["n_items"], dims["vocab_size"], params)
        rho, eps = hypers.rho, hypers.eps
    else:
        model = model_cls(hypers["k"], dims["n_users"], dims["n_items"], hypers["lambda_n"], params)
        rho, eps = hypers.get("rho", 0.95), hypers.get("eps", 1e-6)
    opt = None
    if meta.get("has_optimizer"):
        opt = Adadelta(model.slots(), rho, eps)
        try:
            opt.load_arrays(arrays)
        except KeyError as exc:
            raise CheckpointError(f"{path}: field {exc.args[0]} missing") from None
    return model, opt, meta
