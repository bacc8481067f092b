"""Brute-force reference implementations used to cross-check the package.

Nothing here imports package metric code; counting is done with plain
nested loops so a shared bug cannot hide on both sides.
"""

from __future__ import annotations

import math

EPS = 1e-9


def grams(tokens, n):
    out = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            out.append(tuple(tokens[i:i + n]))
    return out


def count_of(item, items):
    c = 0
    for x in items:
        if x == item:
            c += 1
    return c


def distinct(corpus, n):
    pooled = []
    for seq in corpus:
        pooled.extend(grams(seq, n))
    uniq = []
    for g in pooled:
        if g not in uniq:
            uniq.append(g)
    return len(uniq) / len(pooled), len(uniq), len(pooled)


def bleu(candidate, references, max_n=4):
    logs = []
    for n in range(1, max_n + 1):
        cand = grams(candidate, n)
        if not cand:
            continue
        seen = []
        matched = 0
        for g in cand:
            if g in seen:
                continue
            seen.append(g)
            best_ref = 0
            for ref in references:
                best_ref = max(best_ref, count_of(g, grams(ref, n)))
            matched += min(count_of(g, cand), best_ref)
        if n == 1 and matched == 0:
            return 0.0
        logs.append(math.log((matched if matched else EPS) / len(cand)))
    c = len(candidate)
    best = None
    for ref in references:
        r = len(ref)
        if best is None or abs(r - c) < abs(best - c) or (abs(r - c) == abs(best - c) and r < best):
            best = r
    bp = 1.0 if c > best else math.exp(1 - best / c)
    return bp * math.exp(sum(logs) / len(logs))


def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def f1(overlap, clen, rlen):
    if overlap == 0:
        return 0.0
    p, r = overlap / clen, overlap / rlen
    return 2 * p * r / (p + r)


def rouge(candidate, reference):
    used = [False] * len(reference)
    overlap = 0
    for tok in candidate:
        for j, ref_tok in enumerate(reference):
            if not used[j] and ref_tok == tok:
                used[j] = True
                overlap += 1
                break
    return f1(overlap, len(candidate), len(reference)), f1(lcs(candidate, reference), len(candidate), len(reference))


def recall_mrr(rows, n):
    """rows: list of (gold, ranked candidate ids)."""
    hit = 0
    rr = 0.0
    for gold, ranked in rows:
        dedup = []
        for c in ranked:
            if c not in dedup:
                dedup.append(c)
        for pos, c in enumerate(dedup[:n]):
            if c == gold:
                hit += 1
                rr += 1.0 / (pos + 1)
                break
    return hit / len(rows), rr / len(rows)


def cosine_topk(ids, vectors, query, k):
    """Exhaustive scan: score every vector, order by (-score, id)."""
    qn = math.sqrt(sum(x * x for x in query))
    scored = []
    for pid, vec in zip(ids, vectors):
        vn = math.sqrt(sum(x * x for x in vec))
        dot = 0.0
        for a, b in zip(vec, query):
            dot += a * b
        scored.append((-(dot / (vn * qn)), pid))
    scored.sort()
    return [pid for _, pid in scored[:k]]


def max_pairwise_bleu(token_lists, max_n=4):
    worst = 0.0
    for i in range(len(token_lists)):
        for j in range(len(token_lists)):
            if i != j:
                worst = max(worst, bleu(token_lists[i], [token_lists[j]], max_n))
    return worst
