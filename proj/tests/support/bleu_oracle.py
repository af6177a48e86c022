"""Reference corpus BLEU used to freeze the C++ fixture values.

Single reference, unsmoothed, whitespace tokens.
"""
import math
import sys
from collections import Counter


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyps, refs, max_n=4):
    matches = [0] * max_n
    totals = [0] * max_n
    c = r = 0
    for h, ref in zip(hyps, refs):
        h, ref = h.split(), ref.split()
        c += len(h)
        r += len(ref)
        for n in range(1, max_n + 1):
            hc, rc = ngrams(h, n), ngrams(ref, n)
            totals[n - 1] += sum(hc.values())
            matches[n - 1] += sum(min(k, rc[g]) for g, k in hc.items())
    if min(matches) == 0:
        return 0.0, matches, totals, c, r
    bp = 1.0 if c > r else math.exp(1 - r / c)
    logp = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    return 100 * bp * math.exp(logp), matches, totals, c, r


if __name__ == "__main__":
    hyps = open(sys.argv[1]).read().splitlines()
    refs = open(sys.argv[2]).read().splitlines()
    score, m, t, c, r = corpus_bleu(hyps, refs)
    print(f"{score:.10f}", m, t, c, r)
