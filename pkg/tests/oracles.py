"""
Brute-force reference implementations, written independently of the package
code paths they check (plain Python loops, no shared helpers).
"""

import math


def detrend(xs):
    n = len(xs)
    sx = sum(range(n))
    sy = sum(xs)
    sxx = sum(i * i for i in range(n))
    sxy = sum(i * x for i, x in enumerate(xs))
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    icpt = (sy - slope * sx) / n
    return [x - (icpt + slope * i) for i, x in enumerate(xs)]


def normalize(xs):
    n = len(xs)
    m = sum(xs) / n
    sd = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))
    if sd == 0:
        return [0.0] * n
    return [(x - m) / sd for x in xs]


def stats(xs):
    n = len(xs)
    s = sorted(xs)
    m = sum(xs) / n
    m2 = sum((x - m) ** 2 for x in xs) / n
    m3 = sum((x - m) ** 3 for x in xs) / n
    m4 = sum((x - m) ** 4 for x in xs) / n
    median = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    std = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))
    kurt = m4 / m2**2 if m2 > 0 else 0.0
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    return [s[0], s[-1], median, std, m, kurt, skew, s[-2]]


def features(xs):
    xs = [float(x) for x in xs]
    return stats(detrend(xs)) + stats(normalize(xs)) + stats([abs(x) for x in xs])


def _sse(ys):
    if not ys:
        return 0.0
    m = sum(ys) / len(ys)
    return sum((y - m) ** 2 for y in ys)


def best_split(X, y, min_leaf, rtol=1e-9):
    """
    Exhaustive split search: every feature, every midpoint between distinct
    sorted values. Returns (feature, threshold) or None, breaking near-ties
    by lowest feature then lowest threshold.
    """
    n = len(y)
    node = _sse(y)
    cands = []
    for f in range(len(X[0])):
        vals = sorted(set(row[f] for row in X))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            if not a <= thr < b:
                thr = a
            left = [y[i] for i in range(n) if X[i][f] <= thr]
            right = [y[i] for i in range(n) if X[i][f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            cands.append((_sse(left) + _sse(right), f, thr))
    if not cands:
        return None
    best = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] <= best + rtol * node + 1e-300]
    _, f, thr = min(tied, key=lambda c: (c[1], c[2]))
    return f, thr


def grow_tree(X, y, min_leaf):
    """Nested-tuple tree: ('leaf', value) or ('split', f, thr, left, right)."""
    mean = math.fsum(y) / len(y)
    if max(y) == min(y):
        return ("leaf", mean)
    split = best_split(X, y, min_leaf) if len(y) >= 2 * min_leaf else None
    if split is None:
        return ("leaf", mean)
    f, thr = split
    li = [i for i in range(len(y)) if X[i][f] <= thr]
    ri = [i for i in range(len(y)) if X[i][f] > thr]
    return ("split", f, thr,
            grow_tree([X[i] for i in li], [y[i] for i in li], min_leaf),
            grow_tree([X[i] for i in ri], [y[i] for i in ri], min_leaf))


def flatten(tree):
    """Preorder list of node tuples for comparison with the flat array layout."""
    out = []

    def walk(t):
        if t[0] == "leaf":
            out.append((-1, None, t[1]))
        else:
            out.append((t[1], t[2], None))
            walk(t[3])
            walk(t[4])

    walk(tree)
    return out

