"""Desk-scale rating comparison: NRT vs. the global mean vs. biased MF.

Usage::

    python3 -m nrt.desk --input reviews.json --schema amazon [--size 50000] [--config small.cfg]

Records are reduced to a k-core (every user and item has at least ``k``
interactions), subsampled to ``size`` interactions, split 80/10/10 and
scored on validation RMSE.
"""
import argparse
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from nrt import corpus as corpus_mod
from nrt.baseline import mf_train
from nrt.config import RunConfig, load_config
from nrt.evalmetrics import rating_metrics
from nrt.train import train

log = logging.getLogger(__name__)

DESK_DEFAULTS = {"k_u": 32, "k_v": 32, "word_dim": 32, "d": 64, "batch_size": 200,
                 "max_epochs": 20, "patience": 3, "min_tf": 20, "mf_k": 10}


@dataclass
class DeskResult:
    global_mean_rmse: float
    mf_rmse: float
    nrt_rmse: float
    n_train: int
    n_valid: int
    vocab: int
    seconds: float

    @property
    def nrt_beats_both(self):
        return self.nrt_rmse < self.global_mean_rmse and self.nrt_rmse < self.mf_rmse


def k_core(records, k):
    """Iteratively drop records whose user or item has fewer than ``k`` interactions."""
    records = list(records)
    while True:
        users = Counter(r.user for r in records)
        items = Counter(r.item for r in records)
        kept = [r for r in records if users[r.user] >= k and items[r.item] >= k]
        if len(kept) == len(records):
            return kept
        records = kept


def subsample(records, size, seed):
    if len(records) <= size:
        return list(records)
    idx = np.sort(np.random.default_rng(seed).choice(len(records), size=size, replace=False))
    return [records[i] for i in idx]


def desk_config(path=None):
    cfg = RunConfig()
    for key, value in DESK_DEFAULTS.items():
        cfg.set(key, value)
    return load_config(path, cfg) if path else cfg.validate()


def _rmse(pairs):
    return rating_metrics(pairs).rmse


def compare(records, cfg, size=50000, core=5):
    start = time.perf_counter()
    records = subsample(k_core(records, core), size, cfg.seed)
    split = corpus_mod.prepare(records, cfg.min_tf, cfg.seed)
    if not split.valid:
        raise corpus_mod.CorpusError("subsample left no warm-start validation interactions")
    truth = [x.rating for x in split.valid]
    users = np.array([x.user_id for x in split.valid])
    items = np.array([x.item_id for x in split.valid])
    mean = float(np.mean([x.rating for x in split.train]))
    log.info("train=%d valid=%d vocab=%d", len(split.train), len(split.valid), len(split.vocab))
    hp = cfg.hypers
    mf, _ = mf_train(split, cfg.mf_k, cfg.mf_lambda, cfg.seed, cfg.max_epochs, hp.batch_size,
                     cfg.patience, hp.rho, hp.eps, hp.init_range)
    nrt, _ = train(split, hp, cfg.seed, cfg.max_epochs, cfg.patience)
    return DeskResult(
        global_mean_rmse=_rmse([(r, mean) for r in truth]),
        mf_rmse=_rmse(list(zip(truth, mf.predict_ratings(users, items)))),
        nrt_rmse=_rmse(list(zip(truth, nrt.predict_ratings(users, items)))),
        n_train=len(split.train), n_valid=len(split.valid), vocab=len(split.vocab),
        seconds=time.perf_counter() - start,
    )


def main(argv=None):
    p = argparse.ArgumentParser(prog="python3 -m nrt.desk", description=__doc__.splitlines()[0])
    p.add_argument("--input", required=True)
    p.add_argument("--schema", choices=sorted(corpus_mod.SCHEMAS), default="amazon")
    p.add_argument("--size", type=int, default=50000)
    p.add_argument("--core", type=int, default=5)
    p.add_argument("--config")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    records = corpus_mod.parse_records(args.input, args.schema).records
    result = compare(records, desk_config(args.config), args.size, args.core)
    print(json.dumps({**vars(result), "nrt_beats_both": result.nrt_beats_both}, indent=2))
    return 0 if result.nrt_beats_both else 1


if __name__ == "__main__":
    sys.exit(main())
