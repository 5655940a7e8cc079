"""Independent reference implementations used by the unit and acceptance tests.

These are written for clarity rather than speed (plain loops, math.fsum,
dictionaries) and share no code with the package.
"""

import math
from collections import Counter


def fscore_bruteforce(values, labels):
    """Between-class scatter of class means over summed unbiased class variances."""
    n = len(values)
    L = len(values[0])
    classes = sorted(set(labels))
    out = []
    for j in range(L):
        col = [float(values[i][j]) for i in range(n)]
        overall = math.fsum(col) / n
        num, den = [], []
        for c in classes:
            members = [col[i] for i in range(n) if labels[i] == c]
            m = math.fsum(members) / len(members)
            num.append((m - overall) ** 2)
            den.append(math.fsum((v - m) ** 2 for v in members) / (len(members) - 1))
        out.append(math.fsum(num) / math.fsum(den))
    return out


def pearson_covariance(x, y):
    """cov(x, y) / (sigma_x sigma_y) with population moments."""
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y)) / n
    sx = math.sqrt(math.fsum((a - mx) ** 2 for a in x) / n)
    sy = math.sqrt(math.fsum((b - my) ** 2 for b in y) / n)
    return cov / (sx * sy)


def pearson_moment_form(x, y):
    """(mean(xy) - mean(x) mean(y)) / ((1/n) sqrt(SSx SSy)), the raw-moment form."""
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    mxy = math.fsum(a * b for a, b in zip(x, y)) / n
    ssx = math.fsum((a - mx) ** 2 for a in x)
    ssy = math.fsum((b - my) ** 2 for b in y)
    return (mxy - mx * my) / (math.sqrt(ssx * ssy) / n)


def equal_frequency_bins(x, bins):
    """Bin index = number of distinct cut points strictly below the value.

    Cut point q/bins is the smallest sorted value whose empirical CDF
    reaches q/bins.
    """
    s = sorted(x)
    n = len(s)
    cuts = set()
    for q in range(1, bins):
        rank = math.ceil(q * n / bins)  # 1-based
        cuts.add(s[max(rank, 1) - 1])
    cuts = sorted(cuts)
    return [sum(1 for c in cuts if c < v) for v in x]


def mutual_info_counts(a, b):
    n = len(a)
    joint = Counter(zip(a, b))
    ca, cb = Counter(a), Counter(b)
    return math.fsum(k / n * math.log(k * n / (ca[u] * cb[v])) for (u, v), k in joint.items())


def mrmr_greedy(values, labels, bins=10, tol=1e-12):
    """Difference-form mRMR; near-ties (within ``tol``) go to the lowest index."""
    n = len(values)
    L = len(values[0])
    codes = [equal_frequency_bins([values[i][j] for i in range(n)], bins) for j in range(L)]
    rel = [mutual_info_counts(c, list(labels)) for c in codes]
    chosen = []
    pair = {}
    while len(chosen) < L:
        best, best_val = None, -math.inf
        for j in range(L):
            if j in chosen:
                continue
            if chosen:
                red = math.fsum(pair.setdefault((j, s), mutual_info_counts(codes[j], codes[s])) for s in chosen)
                val = rel[j] - red / len(chosen)
            else:
                val = rel[j]
            if val > best_val + tol:
                best, best_val = j, val
        chosen.append(best)
    return chosen


def auc_pairs(labels, scores):
    """P(score_pos > score_neg) + 0.5 P(tie) by counting every pair."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def knn_bruteforce(train_x, train_y, query, k):
    """Majority vote of the k nearest z-scored neighbours; vote ties by mean distance."""
    n, L = len(train_x), len(train_x[0])
    mean = [math.fsum(r[j] for r in train_x) / n for j in range(L)]
    std = []
    for j in range(L):
        s = math.sqrt(math.fsum((r[j] - mean[j]) ** 2 for r in train_x) / n)
        std.append(s if s > 0 else 1.0)

    def z(r):
        return [(r[j] - mean[j]) / std[j] for j in range(L)]

    zt = [z(r) for r in train_x]
    out = []
    for q in query:
        zq = z(q)
        d = [math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(zq, t))) for t in zt]
        idx = sorted(range(n), key=lambda i: (d[i], i))[:k]
        votes = Counter(train_y[i] for i in idx)
        top = max(votes.values())
        tied = [c for c in votes if votes[c] == top]
        mean_d = {c: math.fsum(d[i] for i in idx if train_y[i] == c) / votes[c] for c in tied}
        out.append(min(tied, key=lambda c: (mean_d[c], c)))
    return out
