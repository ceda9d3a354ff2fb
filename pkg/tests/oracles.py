"""Independent naive reference implementations used only as test oracles.

These deliberately avoid the library's data structures: plain dicts,
python-float arithmetic, and literal replays of the documented procedures.
"""

import math
from collections import Counter


def naive_cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


def naive_graph_build(triples, vectors, v_cas, v_emo, K, H):
    """Literal hop-synchronized replay of the expansion procedure.

    triples: iterable of (head, relation, tail); vectors: token -> list of
    floats.  Returns (node dict token -> (role, depth), edge multiset of
    (src, relation, dst, hop)).
    """
    adjacency = {}
    seen = set()
    for head, rel, tail in triples:
        if (head, rel, tail) in seen:
            continue
        seen.add((head, rel, tail))
        adjacency.setdefault(head, []).append((rel, tail))
        adjacency.setdefault(tail, []).append((rel, head))

    v_cas = sorted({c for c in v_cas if c in vectors})
    v_emo = {c for c in v_emo if c in vectors}
    if not v_cas:
        return {}, Counter()

    nodes = {c: ("cause", 0) for c in v_cas}
    edges = Counter()
    visited = set(v_cas)
    frontier = set(v_cas) - v_emo
    for hop in range(1, H + 1):
        candidates = []  # (src, rel, tail)
        for concept in sorted(frontier):
            for rel, neighbor in adjacency.get(concept, []):
                if neighbor in visited:
                    continue
                candidates.append((concept, rel, neighbor))
        if not candidates:
            break
        tails = sorted({c[2] for c in candidates})

        def sim(tail):
            if not v_emo:
                return 0.0
            # identical tokens score exactly 1.0, per the cosine contract
            return max(
                1.0 if tail == e else naive_cosine(vectors[tail], vectors[e])
                for e in v_emo
            )

        ranked = sorted(tails, key=lambda t: (-sim(t), t))[:K]
        chosen = set(ranked)
        for tail in ranked:
            role = "emotion" if tail in v_emo else "intermediate"
            nodes[tail] = (role, hop)
        for src, rel, tail in candidates:
            if tail in chosen:
                edges[(src, rel, tail, hop)] += 1
        visited |= chosen
        frontier = chosen - v_emo
    return nodes, edges


def naive_bleu(hypotheses, references):
    """Reference corpus BLEU-4 arithmetic: clipped n-gram counts, geometric
    mean, brevity penalty, no smoothing, scores in [0, 100]."""
    import collections

    def grams(seq, n):
        d = collections.defaultdict(int)
        for i in range(len(seq) - n + 1):
            d[tuple(seq[i:i + n])] += 1
        return d

    match = {n: 0 for n in range(1, 5)}
    possible = {n: 0 for n in range(1, 5)}
    hyp_total = 0
    ref_total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_total += len(hyp)
        ref_total += len(ref)
        for n in range(1, 5):
            hg = grams(hyp, n)
            rg = grams(ref, n)
            for g, c in hg.items():
                match[n] += min(c, rg.get(g, 0))
                possible[n] += c
    if hyp_total == 0:
        return 0.0
    logs = 0.0
    for n in range(1, 5):
        if possible[n] == 0 or match[n] == 0:
            return 0.0
        logs += math.log(match[n] / possible[n]) / 4.0
    if hyp_total < ref_total:
        bp = math.exp(1.0 - ref_total / hyp_total)
    else:
        bp = 1.0
    return 100.0 * bp * math.exp(logs)


def naive_repeated_layernorm(x, times, eps=1e-5):
    """Apply plain layer norm (gain 1, bias 0) ``times`` times."""
    import numpy as np

    y = np.asarray(x, dtype=np.float64)
    for _ in range(times):
        mu = y.mean(axis=-1, keepdims=True)
        var = ((y - mu) ** 2).mean(axis=-1, keepdims=True)
        y = (y - mu) / np.sqrt(var + eps)
    return y
