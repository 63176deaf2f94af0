"""Brute-force references that share no code with the package under test."""

import itertools
import math
from collections import Counter
from fractions import Fraction


def combos(vectors, p, n):
    """Every linear combination of ``vectors`` (tuples of length n) over GF(p)."""
    out = set()
    for coeffs in itertools.product(range(p), repeat=len(vectors)):
        v = [0] * n
        for c, vec in zip(coeffs, vectors):
            if c:
                for i in range(n):
                    v[i] = (v[i] + c * vec[i]) % p
        out.add(tuple(v))
    return out


def independent(vectors, p):
    """No nontrivial combination vanishes (exhaustive)."""
    if not vectors:
        return True
    n = len(vectors[0])
    for coeffs in itertools.product(range(p), repeat=len(vectors)):
        if not any(coeffs):
            continue
        if all(sum(c * v[i] for c, v in zip(coeffs, vectors)) % p == 0 for i in range(n)):
            return False
    return True


def brute_rank(rows, p):
    """Size of the largest independent subset of ``rows``."""
    rows = [tuple(r) for r in rows]
    for k in range(len(rows), 0, -1):
        for sub in itertools.combinations(rows, k):
            if independent(list(sub), p):
                return k
    return 0


def columns(mat_rows):
    if not mat_rows:
        return []
    return [tuple(r[j] for r in mat_rows) for j in range(len(mat_rows[0]))]


def enumerate_source(p, m, mats):
    """Exact joint pmf of (x M_1, ..., x M_k) for uniform x in GF(p)^m."""
    counts = Counter()
    for x in itertools.product(range(p), repeat=m):
        atom = []
        for rows in mats:
            ncols = len(rows[0]) if rows else 0
            atom.append(tuple(sum(x[i] * rows[i][j] for i in range(m)) % p
                              for j in range(ncols)))
        counts[tuple(atom)] += 1
    return {a: Fraction(c, p ** m) for a, c in counts.items()}


def plugin_entropy(pmf, idx):
    marg = Counter()
    for atom, pr in pmf.items():
        marg[tuple(atom[k] for k in idx)] += pr
    return -sum(float(q) * math.log2(q) for q in marg.values())
