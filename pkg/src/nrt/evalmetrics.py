"""Rating (MAE, RMSE) and tips (ROUGE-1/2/L/SU4) metrics."""
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from nrt import kernels

SKIP_DISTANCE = 4


@dataclass(frozen=True)
class RatingEval:
    mae: float
    rmse: float
    count: int


def rating_metrics(pairs):
    """MAE and RMSE over (true, predicted) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("rating_metrics needs at least one (rating, prediction) pair")
    r, p = np.asarray(pairs, dtype=np.float64).T
    err = r - p
    return RatingEval(float(np.mean(np.abs(err))), float(math.sqrt(np.mean(err * err))), len(pairs))


@dataclass(frozen=True)
class PRF:
    recall: float
    precision: float
    f1: float

    @classmethod
    def from_counts(cls, overlap, ref_total, cand_total):
        r = overlap / ref_total if ref_total else 0.0
        p = overlap / cand_total if cand_total else 0.0
        return cls(r, p, f_measure(p, r))


def f_measure(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped(cand, ref):
    return sum(min(c, ref[g]) for g, c in cand.items() if g in ref)


def rouge_n(candidate, reference, n):
    if n < 1:
        raise ValueError("n must be >= 1")
    c, r = ngrams(list(candidate), n), ngrams(list(reference), n)
    return PRF.from_counts(_clipped(c, r), sum(r.values()), sum(c.values()))


def rouge_l(candidate, reference):
    candidate, reference = list(candidate), list(reference)
    ids = {}
    a = np.array([ids.setdefault(t, len(ids)) for t in candidate], dtype=np.int64)
    b = np.array([ids.setdefault(t, len(ids)) for t in reference], dtype=np.int64)
    lcs = kernels.lcs_length(a, b)
    return PRF.from_counts(lcs, len(reference), len(candidate))


def skip_units(tokens, max_skip=SKIP_DISTANCE):
    """Unigrams plus ordered pairs with at most ``max_skip`` tokens between them."""
    tokens = list(tokens)
    units = Counter((t,) for t in tokens)
    for i in range(len(tokens)):
        for j in range(i + 1, min(len(tokens), i + max_skip + 2)):
            units[(tokens[i], tokens[j])] += 1
    return units


def rouge_su4(candidate, reference):
    c, r = skip_units(candidate), skip_units(reference)
    return PRF.from_counts(_clipped(c, r), sum(r.values()), sum(c.values()))


METRICS = {
    "rouge1": lambda c, r: rouge_n(c, r, 1),
    "rouge2": lambda c, r: rouge_n(c, r, 2),
    "rougeL": rouge_l,
    "rougeSU4": rouge_su4,
}


@dataclass
class RougeScores:
    scores: dict  # metric -> PRF (macro average)
    per_pair: list = field(default_factory=list)  # list of {metric: PRF}

    def __getitem__(self, metric):
        return self.scores[metric]


def _stemmer():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # optional extra
        raise ImportError("stemming needs nltk: pip install 'nrt[stem]'") from exc
    return PorterStemmer().stem


def corpus_rouge(pairs, stem=False):
    """Macro-averaged ROUGE over aligned (candidate tokens, reference tokens) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("corpus_rouge needs at least one pair")
    for pair in pairs:
        if len(pair) != 2:
            raise ValueError("corpus_rouge expects (candidate, reference) pairs")
    if stem:
        st = _stemmer()
        pairs = [([st(t) for t in c], [st(t) for t in r]) for c, r in pairs]
    per_pair = [{name: fn(c, r) for name, fn in METRICS.items()} for c, r in pairs]
    scores = {}
    for name in METRICS:
        scores[name] = PRF(*(float(np.mean([getattr(p[name], k) for p in per_pair]))
                             for k in ("recall", "precision", "f1")))
    return RougeScores(scores, per_pair)


def format_report(rating_eval=None, rouge=None):
    """Human-readable table followed by a ``metric=value`` block."""
    kv = []
    if rating_eval is not None:
        kv += [("count", str(rating_eval.count)), ("mae", f"{rating_eval.mae:.6f}"),
               ("rmse", f"{rating_eval.rmse:.6f}")]
    if rouge is not None:
        for name, prf in rouge.scores.items():
            for k, short in (("recall", "r"), ("precision", "p"), ("f1", "f1")):
                kv.append((f"{name}_{short}", f"{getattr(prf, k):.6f}"))
    lines = []
    if rating_eval is not None:
        lines += [f"{'N':<10}{rating_eval.count:>10d}",
                  f"{'MAE':<10}{rating_eval.mae:>10.4f}",
                  f"{'RMSE':<10}{rating_eval.rmse:>10.4f}", ""]
    if rouge is not None:
        lines.append(f"{'metric':<10}{'recall':>10}{'precision':>10}{'F1':>10}")
        for name, prf in rouge.scores.items():
            lines.append(f"{name:<10}{prf.recall:>10.4f}{prf.precision:>10.4f}{prf.f1:>10.4f}")
        lines.append("")
    lines += [f"{k}={v}" for k, v in kv]
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Extract the ``metric=value`` block of a report as floats."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = float(v)
    return out
