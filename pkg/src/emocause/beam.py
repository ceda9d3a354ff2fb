"""Length-normalized beam search over step log-probabilities."""

from __future__ import annotations

import numpy as np

from .data import EOS_ID, SOS_ID


def _normalized(logp: float, length: int) -> float:
    return logp / max(length, 1)


def _greedy(step_fn, max_len: int):
    prefix = [SOS_ID]
    score = 0.0
    for _ in range(max_len):
        logp = step_fn(tuple(prefix))
        tok = int(np.argmax(logp))
        score += float(logp[tok])
        prefix.append(tok)
        if tok == EOS_ID:
            break
    return prefix, score


def beam_search(step_fn, beam: int, max_len: int) -> list[int]:
    """Best token sequence under mean log-probability.

    ``step_fn(prefix_ids)`` returns next-token log-probabilities; EOS ends
    a hypothesis and score ties break toward the smaller token index.  The
    greedy rollout is always scored as a candidate, so widening the beam
    never returns a sequence below greedy's normalized score.  Returns the
    generated ids without SOS and without the trailing EOS.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    live: list[tuple[list[int], float]] = [([SOS_ID], 0.0)]
    finished: list[tuple[list[int], float]] = []
    for _ in range(max_len):
        candidates: list[tuple[float, int, int, list[int]]] = []
        for h, (ids, score) in enumerate(live):
            logp = step_fn(tuple(ids))
            top = np.lexsort((np.arange(len(logp)), -logp))[:beam]
            for tok in top:
                if not np.isfinite(logp[tok]):  # impossible continuation
                    continue
                candidates.append(
                    (score + float(logp[tok]), int(tok), h, ids + [int(tok)])
                )
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        live = []
        for score, _tok, _h, ids in candidates[:beam]:
            if ids[-1] == EOS_ID:
                finished.append((ids, score))
            else:
                live.append((ids, score))
        if not live:
            break
    finished.extend(live)
    if beam > 1:
        finished.append(_greedy(step_fn, max_len))

    def key(entry):
        ids, score = entry
        return (-_normalized(score, len(ids) - 1), ids)

    best_ids, _ = min(finished, key=key)
    out = best_ids[1:]
    if out and out[-1] == EOS_ID:
        out = out[:-1]
    return out
