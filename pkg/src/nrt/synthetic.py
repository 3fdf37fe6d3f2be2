"""Seeded synthetic review corpora for smoke tests, overfitting and benchmarks.

Ratings come from a planted additive user/item model; each tips text is
``<sentiment word for the rating> <user word> <item noun>``, so tips are a
deterministic function of (user, item).
"""
import json

import numpy as np

from nrt.corpus import RawRecord, SplitCorpus, build_vocab, encode_record

SENTIMENT = ("awful", "poor", "okay", "good", "great", "superb")
FILLER = ("the", "was", "and", "very", "really", "quite", "this", "it")


def synthetic_records(n_users=20, n_items=15, n_interactions=200, seed=0, filler=FILLER):
    """Distinct (user, item) pairs with integer ratings in [1, 5] and templated text.

    Each record's text is a function of its (user, item) pair, so every term
    of the joint loss can be driven toward its minimum.
    """
    rng = np.random.default_rng(seed)
    if n_interactions > n_users * n_items:
        raise ValueError("more interactions than distinct (user, item) pairs")
    taste = rng.normal(0.0, 1.0, n_users)
    quality = rng.normal(0.0, 1.0, n_items)
    pairs = rng.choice(n_users * n_items, size=n_interactions, replace=False)
    records = []
    for p in pairs:
        u, i = divmod(int(p), n_items)
        rating = int(np.clip(np.rint(3.0 + taste[u] + quality[i]), 1, 5))
        tips = f"{SENTIMENT[rating]} u{u}word i{i}noun"
        # review text depends only on (seed, user, item)
        pair_rng = np.random.default_rng([seed, u, i])
        body = " ".join([str(pair_rng.choice(filler))] * int(pair_rng.integers(2, 6)))
        review = f"{tips} {body}. {SENTIMENT[rating]} i{i}noun!"
        records.append(RawRecord(f"user{u}", f"item{i}", float(rating), review, tips))
    return records


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({"user": r.user, "item": r.item, "rating": r.rating,
                                 "review": r.review, "tips": r.tips}) + "\n")


def training_only_corpus(records, min_tf=1):
    """Encode every record as training data (no held-out parts)."""
    vocab = build_vocab(records, min_tf)
    users, items = {}, {}
    train = []
    for r in records:
        uid = users.setdefault(r.user, len(users))
        iid = items.setdefault(r.item, len(items))
        train.append(encode_record(r, vocab, uid, iid))
    return SplitCorpus(train, [], [], vocab, list(users), list(items), {"records": len(records)})


def overfit_corpus(seed=0):
    """20 users, 15 items, 200 interactions, |V| = 50 (with EOS and UNK)."""
    records = synthetic_records(20, 15, 200, seed)
    corpus = training_only_corpus(records)
    if len(corpus.vocab) != 50:
        raise AssertionError(f"synthetic vocabulary has {len(corpus.vocab)} entries, expected 50")
    return corpus

