"""Automatic metrics: per-word perplexity and corpus BLEU-4."""

from __future__ import annotations

import math
from collections import Counter

from .train import teacher_forced_stats


def perplexity(model, examples) -> float:
    """exp(total gold-token NLL / token count), teacher forced.

    EOS is counted; there are no padded positions in per-example scoring.
    """
    if not examples:
        raise ValueError("perplexity requires a non-empty dataset")
    return teacher_forced_stats(model, examples)["ppl"]


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses, references) -> float:
    """Corpus-level BLEU-4 in [0, 100]: geometric mean of modified n-gram
    precisions times the brevity penalty, unsmoothed (any zero precision
    gives 0), case-sensitive over whitespace tokens."""
    if len(hypotheses) != len(references):
        raise ValueError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    overlap = [0] * 4
    total = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            h_counts = _ngrams(hyp, n)
            r_counts = _ngrams(ref, n)
            overlap[n - 1] += sum(min(c, r_counts[g]) for g, c in h_counts.items())
            total[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(4):
        if total[n] == 0 or overlap[n] == 0:
            return 0.0
        log_sum += math.log(overlap[n] / total[n])
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / 4.0)
