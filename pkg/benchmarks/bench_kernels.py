"""Time the pure-Python and Cython kernel backends on representative shapes.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--epochs 3]

Prints per-kernel microbenchmarks, then wall time for a few training epochs
on the synthetic overfit corpus under each backend.
"""
import argparse
import timeit

import numpy as np

from nrt import kernels
from nrt.model import Hypers
from nrt.synthetic import overfit_corpus
from nrt.train import fit, init_params


def kernel_cases(rng):
    d, batch, vocab = 32, 200, 5000
    a, h = rng.normal(size=(d, batch)), np.tanh(rng.normal(size=(d, batch)))
    z, g = kernels.sigmoid(a), np.tanh(a)
    logits = rng.normal(size=(vocab, batch))
    targets = rng.integers(-1, vocab, batch).astype(np.int64)
    x, y = list(rng.integers(0, 20, 60)), list(rng.integers(0, 20, 60))
    return {
        "sigmoid": lambda: kernels.sigmoid(a),
        "gru_gates": lambda: kernels.gru_gates(a, a, h),
        "gru_blend": lambda: kernels.gru_blend(a, z, h),
        "gru_blend_backward": lambda: kernels.gru_blend_backward(a, h, z, g),
        "gru_reset_backward": lambda: kernels.gru_reset_backward(a, h, z),
        "log_softmax_cols": lambda: kernels.log_softmax_cols(logits),
        "softmax_xent_cols": lambda: kernels.softmax_xent_cols(logits, targets),
        "lcs_length": lambda: kernels.lcs_length(x, y),
    }


def bench_kernels(backend, repeat):
    kernels.set_backend(backend)
    out = {}
    for name, fn in kernel_cases(np.random.default_rng(0)).items():
        number = 20
        out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
    return out


def bench_training(backend, epochs):
    kernels.set_backend(backend)
    corpus = overfit_corpus(seed=0)
    hp = Hypers(k_u=16, k_v=16, word_dim=16, d=32, rating_layers=4, batch_size=10)
    model = init_params(hp, corpus.n_users, corpus.n_items, len(corpus.vocab), seed=0)
    start = timeit.default_timer()
    fit(model, corpus.train, [], hp.batch_size, 0, max_epochs=epochs)
    return timeit.default_timer() - start


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--epochs", type=int, default=3)
    args = p.parse_args(argv)
    backends = kernels.available_backends()
    results = {b: bench_kernels(b, args.repeat) for b in backends}
    print(f"{'kernel':<22}" + "".join(f"{b + ' (us)':>16}" for b in backends) + f"{'speedup':>10}")
    for name in results["python"]:
        row = [results[b][name] * 1e6 for b in backends]
        speedup = f"{row[0] / row[-1]:.2f}x" if len(row) > 1 else "-"
        print(f"{name:<22}" + "".join(f"{v:>16.1f}" for v in row) + f"{speedup:>10}")
    train = {b: bench_training(b, args.epochs) for b in backends}
    print(f"\ntraining, {args.epochs} epochs on the overfit corpus:")
    for b in backends:
        print(f"  {b:<8} {train[b]:.2f}s")
    kernels.set_backend(backends[-1])


if __name__ == "__main__":
    main()
