#!/usr/bin/env python3
"""Independent BLEU implementation for the frozen fixture cross-check.

Implements the documented rules: clipped n-gram precision, add-one
smoothing on numerator and denominator for n >= 2, corpus-level brevity
penalty exp(1 - r/c) when c < r.

Run: python3 tests/oracles/bleu_oracle.py
"""
import math
from collections import Counter


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(cands, refs, max_n=4):
    matches = [0] * max_n
    totals = [0] * max_n
    c_len = sum(len(c) for c in cands)
    r_len = sum(len(r) for r in refs)
    for cand, ref in zip(cands, refs):
        for n in range(1, max_n + 1):
            cc = ngrams(cand, n)
            rc = ngrams(ref, n)
            matches[n - 1] += sum(min(v, rc.get(g, 0)) for g, v in cc.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    bp = 0.0 if c_len == 0 else (math.exp(1 - r_len / c_len) if c_len < r_len else 1.0)

    def precision(n):
        m, t = matches[n - 1], totals[n - 1]
        if n == 1:
            return m / t if t else 0.0
        return (m + 1) / (t + 1)

    out = []
    for order in range(1, max_n + 1):
        ps = [precision(n) for n in range(1, order + 1)]
        if any(p == 0.0 for p in ps):
            out.append(0.0)
            continue
        out.append(bp * math.exp(sum(math.log(p) for p in ps) / order))
    return out


def main():
    cands = [
        "the woman is sewing a black bag".split(),
        "yes i see one".split(),
    ]
    refs = [
        "the woman is sewing a bag and the bag is black".split(),
        "yes i see one".split(),
    ]
    print([repr(x) for x in corpus_bleu(cands, refs)])


if __name__ == "__main__":
    main()
