"""Tips generation: greedy decoding, beam search and length-normalized reranking.

Decoding runs one hypothesis (one column) at a time through the model's
``gru_step`` / ``word_log_probs`` so that a hypothesis's score does not depend
on which other hypotheses share its beam.
"""
from dataclasses import dataclass

import numpy as np

from nrt.corpus import EOS_ID


@dataclass
class BeamHypothesis:
    tokens: tuple
    log_likelihood: float
    state: np.ndarray = None
    finished: bool = False
    score: float = None  # length-normalized score, set by length_normalize

    def __len__(self):
        return len(self.tokens)


def _rank_key(h):
    # higher score first, then lower token ids, then shorter sequences
    return (-h.log_likelihood, h.tokens)


def greedy_decode(model, u_idx, i_idx, max_len):
    """Emit argmax tokens until EOS or ``max_len`` tokens; ties go to the lower id."""
    h = model.decoder_state([u_idx], [i_idx])[:, 0]
    tokens, ll = [], 0.0
    for t in range(max_len):
        logp = model.word_log_probs(h)
        w = int(np.argmax(logp))
        tokens.append(w)
        ll += float(logp[w])
        if w == EOS_ID:
            return BeamHypothesis(tuple(tokens), ll, h, True)
        if t + 1 < max_len:
            h = model.gru_step(h, w)
    return BeamHypothesis(tuple(tokens), ll, h, False)


def beam_search(model, u_idx, i_idx, beam, max_len):
    """Beam search over at most ``max_len`` decoding steps.

    Each live hypothesis is extended by its ``beam`` most likely tokens and the
    global top ``beam`` candidates by accumulated log-likelihood survive.
    Hypotheses that emit EOS stop expanding but stay in the beam and keep
    competing. Returns up to ``beam`` hypotheses, best first.
    """
    if beam < 1 or max_len < 1:
        raise ValueError("beam and max_len must be >= 1")
    h0 = model.decoder_state([u_idx], [i_idx])[:, 0]
    hyps = [BeamHypothesis((), 0.0, h0)]
    for t in range(max_len):
        live = [h for h in hyps if not h.finished]
        if not live:
            break
        candidates = [h for h in hyps if h.finished]
        for hyp in live:
            logp = model.word_log_probs(hyp.state)
            top = np.argsort(-logp, kind="stable")[:beam]
            for w in top:
                w = int(w)
                candidates.append(BeamHypothesis(hyp.tokens + (w,), hyp.log_likelihood + float(logp[w]),
                                                 hyp.state, w == EOS_ID))
        candidates.sort(key=_rank_key)
        hyps = candidates[:beam]
        if t + 1 < max_len:
            for hyp in hyps:
                if not hyp.finished and len(hyp.tokens) == t + 1:
                    hyp.state = model.gru_step(hyp.state, hyp.tokens[-1])
    return hyps


def length_penalty(length, n=2.0, alpha=0.6):
    """(n + |s|)^alpha / (n + 1)^alpha."""
    return ((n + length) / (n + 1.0)) ** alpha


def length_normalize(hypotheses, n=2.0, alpha=0.6):
    """Rerank by log_likelihood / length_penalty; the raw log-likelihood is kept."""
    for h in hypotheses:
        h.score = h.log_likelihood / length_penalty(len(h.tokens), n, alpha)
    return sorted(hypotheses, key=lambda h: (-h.score, h.tokens))


def sequence_log_likelihood(model, u_idx, i_idx, tokens):
    """Score a token sequence by teacher forcing (the same arithmetic as decoding)."""
    h = model.decoder_state([u_idx], [i_idx])[:, 0]
    ll = 0.0
    for t, w in enumerate(tokens):
        ll += float(model.word_log_probs(h)[w])
        if t + 1 < len(tokens):
            h = model.gru_step(h, w)
    return ll


def generate(model, u_idx, i_idx, beam=4, max_len=20, normalize=True, n=2.0, alpha=0.6):
    """Best hypothesis for (user, item); greedy when ``beam == 1``."""
    if beam == 1:
        hyps = [greedy_decode(model, u_idx, i_idx, max_len)]
    else:
        hyps = beam_search(model, u_idx, i_idx, beam, max_len)
    if normalize:
        hyps = length_normalize(hyps, n, alpha)
    else:
        for h in hyps:
            h.score = h.log_likelihood
    return hyps[0]
