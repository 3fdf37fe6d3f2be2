"""Dense float64 kernels with paired backward passes, plus a gradient checker.

Vectors are columns: a batch of ``B`` vectors of size ``k`` is a ``(k, B)``
array. Backward functions accumulate (``+=``) into the gradient buffers they
are handed and return the gradient with respect to their input.
"""
from dataclasses import dataclass, field

import numpy as np

from nrt import kernels


class DimensionError(ValueError):
    pass


class GradientCheckError(RuntimeError):
    pass


@dataclass
class ParamSlot:
    name: str
    value: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise DimensionError(
                f"{self.name}: grad shape {self.grad.shape} != value shape {self.value.shape}"
            )

    @property
    def shape(self):
        return self.value.shape

    def reset(self):
        self.grad[...] = 0.0

    def copy(self):
        return ParamSlot(self.name, self.value.copy(), self.grad.copy())


def as_column(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def affine(W, x, b):
    """``W @ x + b`` with ``b`` of shape (d, 1) broadcast across the batch."""
    x = as_column(x)
    b = as_column(b)
    if W.ndim != 2 or W.shape[1] != x.shape[0]:
        raise DimensionError(f"affine: W {W.shape} incompatible with x {x.shape}")
    if b.shape != (W.shape[0], 1):
        raise DimensionError(f"affine: bias {b.shape} incompatible with W {W.shape}")
    return W @ x + b


def affine_backward(dout, W, x, dW=None, db=None):
    """Accumulate dL/dW and dL/db; return dL/dx."""
    x = as_column(x)
    if dW is not None:
        dW += dout @ x.T
    if db is not None:
        db += dout.sum(axis=1, keepdims=True)
    return W.T @ dout


def activate(x, kind):
    if kind == "sigmoid":
        return kernels.sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def activate_backward(dout, y, kind):
    """Backward through an activation, in terms of its output ``y``."""
    if kind == "sigmoid":
        return dout * y * (1.0 - y)
    if kind == "tanh":
        return dout * (1.0 - y * y)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(x):
    """Softmax of a vector, or of each column of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return kernels.softmax_cols(x.reshape(-1, 1))[:, 0]
    return kernels.softmax_cols(x)


def log_softmax(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return kernels.log_softmax_cols(x.reshape(-1, 1))[:, 0]
    return kernels.log_softmax_cols(x)


def _check_index(E, index):
    idx = np.asarray(index)
    if idx.size and (idx.min() < 0 or idx.max() >= E.shape[1]):
        raise IndexError(f"token index out of range for table with {E.shape[1]} columns")
    return idx


def embed_lookup(E, index):
    """Column(s) of ``E`` for ``index`` (an int gives a vector, an array a matrix)."""
    idx = _check_index(E, index)
    return E[:, idx]


def embed_scatter_grad(dE, index, dvec):
    """Add ``dvec`` into the columns of ``dE`` picked by ``index`` (repeats sum)."""
    idx = _check_index(dE, index)
    if idx.ndim == 0:
        dE[:, int(idx)] += np.asarray(dvec).reshape(-1)
    else:
        np.add.at(dE.T, idx, np.asarray(dvec).T)


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    worst: dict = field(default_factory=dict)  # param name -> max rel error
    checked: int = 0

    @property
    def passed(self):
        return self.max_rel_error < self.tol

    def __str__(self):
        lines = [f"gradient check: max rel err {self.max_rel_error:.3e} (tol {self.tol:g}) "
                 f"over {self.checked} entries -> {'PASS' if self.passed else 'FAIL'}"]
        for name, err in self.worst.items():
            lines.append(f"  {name:<12} {err:.3e}")
        return "\n".join(lines)


def rel_error(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradient_check(f, params, tol=1e-4, step=1e-5, floor=1e-6, max_entries=None, rng=None):
    """Compare analytic gradients with central finite differences.

    ``f()`` must return the scalar loss and accumulate its analytic gradient
    into each slot's ``grad``; grads are reset before every call. With
    ``max_entries`` set, a random subset of each slot's entries is checked.
    """
    def evaluate():
        for p in params:
            p.reset()
        loss = float(f())
        if not np.isfinite(loss):
            raise GradientCheckError(f"non-finite loss {loss} during gradient check")
        return loss

    evaluate()
    analytic = {p.name: p.grad.copy() for p in params}
    rng = rng or np.random.default_rng(0)
    report = GradCheckReport(0.0, tol)
    for p in params:
        flat = p.value.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            plus = evaluate()
            flat[i] = orig - step
            minus = evaluate()
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, rel_error(analytic[p.name].reshape(-1)[i], numeric, floor))
        report.worst[p.name] = worst
        report.checked += len(idx)
        report.max_rel_error = max(report.max_rel_error, worst)
    for p in params:
        p.grad[...] = analytic[p.name]
    return report
