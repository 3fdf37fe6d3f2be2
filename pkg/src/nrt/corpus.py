"""Review corpus ingestion: parsing, tips extraction, vocabulary, splits, batches."""
import hashlib
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

EOS = "<eos>"
UNK = "<unk>"
EOS_ID = 0
UNK_ID = 1
PAD_ID = -1

MALFORMED_LIMIT = 0.10

SCHEMAS = {
    # schema: (user, item, rating, review, tips)
    "amazon": ("reviewerID", "asin", "overall", "reviewText", "summary"),
    "yelp": ("user_id", "business_id", "stars", "text", "tips"),
    "generic": ("user", "item", "rating", "review", "tips"),
}


class CorpusError(RuntimeError):
    pass


@dataclass(frozen=True)
class RawRecord:
    user: str
    item: str
    rating: float
    review: str
    tips: str | None = None


@dataclass
class ParseResult:
    records: list
    lines: int = 0
    malformed: int = 0
    dropped_empty: int = 0


def _parse_line(line, fields):
    user_f, item_f, rating_f, review_f, tips_f = fields
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    user, item, rating = obj[user_f], obj[item_f], obj[rating_f]
    if isinstance(rating, bool):
        raise ValueError("boolean rating")
    rating = float(rating)
    if not 0.0 <= rating <= 5.0:
        raise ValueError(f"rating {rating} outside [0, 5]")
    review = obj.get(review_f) or ""
    tips = obj.get(tips_f)
    if not isinstance(review, str) or (tips is not None and not isinstance(tips, str)):
        raise ValueError("text fields must be strings")
    return RawRecord(str(user), str(item), rating, review, tips)


def parse_records(path, schema="generic"):
    """Read a JSON-lines review file.

    Malformed lines (bad JSON, missing fields, ratings outside [0, 5]) are
    skipped and counted; more than 10% malformed raises CorpusError. Records
    whose tips cannot be recovered are dropped (see :func:`extract_tips`).
    """
    if schema not in SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    fields = SCHEMAS[schema]
    result = ParseResult(records=[])
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            result.lines += 1
            try:
                rec = _parse_line(line, fields)
            except (ValueError, KeyError, TypeError):
                result.malformed += 1
                continue
            tips = extract_tips(rec)
            if tips is None:
                result.dropped_empty += 1
                continue
            result.records.append(RawRecord(rec.user, rec.item, rec.rating, rec.review, tips))
    if result.lines and result.malformed / result.lines > MALFORMED_LIMIT:
        raise CorpusError(
            f"{path}: {result.malformed} of {result.lines} lines malformed for schema {schema!r}"
        )
    if result.malformed:
        logger.warning("%s: skipped %d malformed lines", path, result.malformed)
    return result


_SENTENCE = re.compile(r"^(.*?[.!?])(?=\s|$)", re.S)


def first_sentence(text):
    text = text.strip()
    m = _SENTENCE.match(text)
    return m.group(1).strip() if m else text


def extract_tips(record):
    """Tips text of a record: its own tips field, else the review's first sentence.

    Returns None when neither is available.
    """
    if record.tips and record.tips.strip():
        return record.tips.strip()
    if record.review and record.review.strip():
        return first_sentence(record.review)
    return None


_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "`": "'"})
_WORD = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


def tokenize(text):
    """Lowercased word tokens; punctuation removed, intra-word apostrophes kept."""
    return _WORD.findall(text.lower().translate(_APOSTROPHES))


class Vocabulary:
    """Token <-> id map. Ids 0 and 1 are reserved for EOS and UNK."""

    def __init__(self, tokens, min_tf=1):
        self.itos = [EOS, UNK] + [t for t in tokens if t not in (EOS, UNK)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise CorpusError("duplicate tokens in vocabulary")
        self.min_tf = min_tf

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, tokens):
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids, strip_eos=True):
        out = []
        for i in ids:
            if strip_eos and i == EOS_ID:
                break
            out.append(self.itos[i])
        return out

    @property
    def hash(self):
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __repr__(self):
        return f"Vocabulary(size={len(self)}, min_tf={self.min_tf})"


def build_vocab(records, min_tf=5):
    """Vocabulary over review and tips tokens with term frequency >= ``min_tf``.

    Ids are assigned by descending frequency, ties broken alphabetically.
    """
    if min_tf < 1:
        raise ValueError("min_tf must be >= 1")
    records = list(records)
    if not records:
        raise CorpusError("cannot build a vocabulary from an empty training set")
    tf = Counter()
    for rec in records:
        tf.update(tokenize(rec.review))
        tf.update(tokenize(rec.tips))
    kept = sorted((t for t, c in tf.items() if c >= min_tf), key=lambda t: (-tf[t], t))
    return Vocabulary(kept, min_tf)


@dataclass(frozen=True)
class Interaction:
    user_id: int
    item_id: int
    rating: float
    review_tokens: tuple
    tips_tokens: tuple  # ends with EOS_ID
    tips_words: tuple = ()  # raw tokens of the tips, used as the ROUGE reference

    @property
    def review_bow(self):
        return dict(Counter(self.review_tokens))


def encode_record(rec, vocab, user_id, item_id):
    tips_words = tuple(tokenize(rec.tips))
    return Interaction(
        user_id=user_id,
        item_id=item_id,
        rating=float(rec.rating),
        review_tokens=tuple(vocab.encode(tokenize(rec.review))),
        tips_tokens=tuple(vocab.encode(tips_words)) + (EOS_ID,),
        tips_words=tips_words,
    )


@dataclass
class SplitCorpus:
    train: list
    valid: list
    test: list
    vocab: Vocabulary
    users: list  # dense id -> raw user string
    items: list
    stats: dict = field(default_factory=dict)

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)

    def part(self, name):
        if name not in ("train", "valid", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def split_indices(n, seed, ratios=(0.8, 0.1, 0.1)):
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_valid = int(round(ratios[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_valid], perm[n_train + n_valid:]


def assemble(records, vocab, split_seed):
    """Split records 80/10/10, assign dense ids from training, encode everything.

    Valid/test records whose user or item never occurs in training are
    dropped and counted in ``stats``.
    """
    records = list(records)
    tr, va, te = split_indices(len(records), split_seed)
    users, items = {}, {}
    for i in tr:
        users.setdefault(records[i].user, len(users))
        items.setdefault(records[i].item, len(items))
    train = [encode_record(records[i], vocab, users[records[i].user], items[records[i].item])
             for i in tr]
    stats = {"records": len(records)}
    parts = {}
    for name, idx in (("valid", va), ("test", te)):
        kept, dropped = [], 0
        for i in idx:
            rec = records[i]
            if rec.user not in users or rec.item not in items:
                dropped += 1
                continue
            kept.append(encode_record(rec, vocab, users[rec.user], items[rec.item]))
        parts[name] = kept
        stats[f"{name}_cold_dropped"] = dropped
    return SplitCorpus(train, parts["valid"], parts["test"], vocab,
                       list(users), list(items), stats)


def prepare(records, min_tf=5, seed=0):
    """Split, build the vocabulary from the training part only, and assemble."""
    records = list(records)
    tr, _, _ = split_indices(len(records), seed)
    vocab = build_vocab([records[i] for i in tr], min_tf)
    return assemble(records, vocab, seed)


@dataclass
class Batch:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    reviews: list  # per sample: (token ids, counts)
    tips: np.ndarray  # (B, T) int64, right-padded with PAD_ID

    def __len__(self):
        return len(self.users)

    @property
    def mask(self):
        return self.tips != PAD_ID

    def review_counts(self, vocab_size):
        """Dense (|V|, B) term-frequency matrix."""
        C = np.zeros((vocab_size, len(self)))
        for j, (ids, counts) in enumerate(self.reviews):
            C[ids, j] = counts
        return C


def make_batch(interactions):
    T = max(len(x.tips_tokens) for x in interactions)
    tips = np.full((len(interactions), T), PAD_ID, dtype=np.int64)
    reviews = []
    for j, x in enumerate(interactions):
        tips[j, :len(x.tips_tokens)] = x.tips_tokens
        ids, counts = np.unique(np.asarray(x.review_tokens, dtype=np.int64), return_counts=True)
        reviews.append((ids, counts.astype(np.float64)))
    return Batch(
        users=np.array([x.user_id for x in interactions], dtype=np.int64),
        items=np.array([x.item_id for x in interactions], dtype=np.int64),
        ratings=np.array([x.rating for x in interactions], dtype=np.float64),
        reviews=reviews,
        tips=tips,
    )


def batches(part, batch_size, seed=None):
    """Yield Batch objects; shuffled with ``seed`` (any SeedSequence entropy) unless None."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(part))
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(part))
    for start in range(0, len(part), batch_size):
        yield make_batch([part[i] for i in order[start:start + batch_size]])


# -- prepared-corpus archive ----------------------------------------------

def _flatten(seqs):
    offsets = np.zeros(len(seqs) + 1)
    offsets[1:] = np.cumsum([len(s) for s in seqs])
    flat = np.fromiter((t for s in seqs for t in s), dtype=np.float64, count=int(offsets[-1]))
    return offsets, flat


def _unflatten(offsets, flat):
    offsets = offsets.astype(np.int64)
    flat = flat.astype(np.int64)
    return [tuple(int(t) for t in flat[offsets[i]:offsets[i + 1]]) for i in range(len(offsets) - 1)]


def save_corpus(corpus, path, extra_meta=None):
    from nrt.container import write_container

    arrays, references = {}, {}
    for name in ("train", "valid", "test"):
        part = corpus.part(name)
        arrays[f"{name}.users"] = np.array([x.user_id for x in part], dtype=np.float64)
        arrays[f"{name}.items"] = np.array([x.item_id for x in part], dtype=np.float64)
        arrays[f"{name}.ratings"] = np.array([x.rating for x in part], dtype=np.float64)
        for field_name in ("review_tokens", "tips_tokens"):
            off, flat = _flatten([getattr(x, field_name) for x in part])
            arrays[f"{name}.{field_name}.offsets"] = off
            arrays[f"{name}.{field_name}.flat"] = flat
        references[name] = [" ".join(x.tips_words) for x in part]
    meta = {
        "vocab": corpus.vocab.itos,
        "min_tf": corpus.vocab.min_tf,
        "vocab_hash": corpus.vocab.hash,
        "users": corpus.users,
        "items": corpus.items,
        "stats": corpus.stats,
        "tips_words": references,
    }
    meta.update(extra_meta or {})
    write_container(path, "corpus", arrays, meta)


def load_corpus(path):
    from nrt.container import read_container

    meta, arrays = read_container(path, kind="corpus")
    vocab = Vocabulary(meta["vocab"][2:], meta["min_tf"])
    if vocab.hash != meta["vocab_hash"]:
        raise CorpusError(f"{path}: vocabulary hash mismatch")
    parts = {}
    for name in ("train", "valid", "test"):
        reviews = _unflatten(arrays[f"{name}.review_tokens.offsets"], arrays[f"{name}.review_tokens.flat"])
        tips = _unflatten(arrays[f"{name}.tips_tokens.offsets"], arrays[f"{name}.tips_tokens.flat"])
        refs = meta["tips_words"][name]
        parts[name] = [
            Interaction(int(u), int(i), float(r), rv, tp, tuple(ref.split()))
            for u, i, r, rv, tp, ref in zip(arrays[f"{name}.users"], arrays[f"{name}.items"],
                                            arrays[f"{name}.ratings"], reviews, tips, refs)
        ]
    corpus = SplitCorpus(parts["train"], parts["valid"], parts["test"], vocab,
                         list(meta["users"]), list(meta["items"]), dict(meta["stats"]))
    return corpus, meta
