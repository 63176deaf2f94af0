"""Seeded random linear sources for cross-checks and property tests.

Run ``python -m gkcap.corpus OUTDIR`` to regenerate the shipped fixture corpus.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .gf_linalg import FieldMatrix, FieldSpec
from .linear_source import LinearSourceSpec, dump_spec


def random_matrix(rng: np.random.Generator, p: int, rows: int, cols: int) -> FieldMatrix:
    return FieldMatrix(p, rng.integers(0, p, size=(rows, cols)), rows=rows, cols=cols)


def random_spec(rng: np.random.Generator, *, primes=(2, 3), max_dim: int = 4,
                min_users: int = 2, max_users: int = 4, nusers: int | None = None,
                nactive: int | None = None, allow_untrusted: bool = True) -> LinearSourceSpec:
    """Random source whose users often share a planted common block.

    Each user sees ``X [C R_i] T_i``: a shared block C, a private block R_i
    and a random mixing T_i, so intersections are neither always full nor
    always trivial.
    """
    p = int(rng.choice(primes))
    m = int(rng.integers(1, max_dim + 1))
    k = int(rng.integers(0, m + 1))
    common = rng.integers(0, p, size=(m, k))
    nu = nusers if nusers is not None else int(rng.integers(min_users, max_users + 1))
    users = tuple(str(i + 1) for i in range(nu))
    mats = {}
    for u in users:
        extra = int(rng.integers(0, m + 1))
        base = np.concatenate([common, rng.integers(0, p, size=(m, extra))], axis=1)
        width = int(rng.integers(0, m + 2))
        mix = rng.integers(0, p, size=(base.shape[1], width))
        mats[u] = FieldMatrix(p, (base @ mix) % p if base.shape[1] else
                              np.zeros((m, width), dtype=np.int64), rows=m, cols=width)
    na = nactive if nactive is not None else int(rng.integers(2, nu + 1))
    order = [users[i] for i in rng.permutation(nu)]
    active = frozenset(order[:na])
    rest = order[na:]
    untrusted = frozenset(u for u in rest if allow_untrusted and rng.random() < 0.6)
    silent = frozenset(u for u in users if rng.random() < 0.3)
    return LinearSourceSpec(FieldSpec(p), m, users, mats, active, untrusted, silent)


def make_corpus(seed: int = 2024, count: int = 100, **kw) -> list[LinearSourceSpec]:
    rng = np.random.default_rng(seed)
    return [random_spec(rng, **kw) for _ in range(count)]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m gkcap.corpus OUTDIR", file=sys.stderr)
        return 2
    out = Path(argv[0])
    out.mkdir(parents=True, exist_ok=True)
    for k, spec in enumerate(make_corpus(count=20)):
        dump_spec(spec, out / f"spec_{k:03d}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
