"""No-discussion key agreement on finite linear sources.

Every active user maps its observation to the common function ``G = X M``
through its recovery map ``W_i`` and then applies a linear extractor ``E``
whose output ``X M E`` has a column space meeting span(M_D) trivially.  The
key is therefore exactly uniform and exactly independent of the untrusted
helpers' observations at every blocklength, and its rate equals
``(rank[M M_D] - rank M_D) log2 p``.

A second mode hashes ``G^n`` into ``p^(r n)`` bins with a seeded keyed hash,
mimicking a random-binning argument; its secrecy deficiency is reported.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .gf_linalg import FieldMatrix, column_space, hstack, join, meet, rank, solve_factor
from .linear_source import CapacityReport, LinearSourceSpec, capacity, mcf

RNG_ALGORITHM = "numpy.PCG64/SeedSequence.spawn"
MI_CELL_LIMIT = 2**16


@dataclass(frozen=True)
class ExtractorPlan:
    source: LinearSourceSpec
    g_matrix: FieldMatrix
    extractor: FieldMatrix
    recovery_maps: Mapping[str, FieldMatrix]
    md_basis: FieldMatrix
    key_rank: int
    leak_meet_dim: int
    capacity: CapacityReport

    @property
    def key_matrix(self) -> FieldMatrix:
        """``M E``: the key symbols are ``X M E``."""
        return self.g_matrix @ self.extractor

    @property
    def exact_independence(self) -> bool:
        return self.leak_meet_dim == 0 and rank(self.key_matrix) == self.key_rank

    @property
    def key_rate_bits(self) -> float:
        return self.key_rank * math.log2(self.source.p)


@dataclass(frozen=True)
class SimReport:
    n: int
    trials: int
    mode: str
    agreement_rate: float
    key_rate_bits_per_sample: float
    capacity_bits: float
    exact_independence: bool
    empirical_mi_bits: float | None
    secrecy_deficiency_bits: float | None
    rng_seed: int
    rng_algorithm: str

    def to_dict(self) -> dict:
        return asdict(self)


def build_extractor(spec: LinearSourceSpec) -> ExtractorPlan:
    """Choose E so that span(M E) complements span(M) ∩ span(M_D) inside span(M)."""
    res = mcf(spec)
    cap = capacity(spec, res)
    g = res.g_matrix
    span_d = column_space(spec.stack(spec.untrusted))
    leaked = meet(column_space(g), span_d)
    acc = leaked
    chosen = []
    for j in range(g.cols):
        col = FieldMatrix(spec.field, g.to_array()[:, [j]], rows=g.rows, cols=1)
        grown = join(acc, column_space(col))
        if grown.dim > acc.dim:
            chosen.append(col)
            acc = grown
    complement = hstack(chosen, field=spec.field, rows=spec.ambient_dim)
    e = solve_factor(g, complement)
    key_matrix = g @ e
    leak_meet = meet(column_space(key_matrix), span_d).dim
    return ExtractorPlan(spec, g, e, res.recovery_maps, span_d.basis, e.cols, leak_meet, cap)


def _trial_generators(seed: int, trials: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(trials)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _bin_index(g_block: np.ndarray, seed: int, nbins: int) -> int:
    h = hashlib.blake2b(g_block.astype("<i8").tobytes(), digest_size=16,
                        key=seed.to_bytes(16, "little", signed=False))
    return int.from_bytes(h.digest(), "little") % nbins


def _plugin_mi(pairs: list[tuple]) -> float:
    n = len(pairs)
    joint = Counter(pairs)
    ka = Counter(a for a, _ in pairs)
    kb = Counter(b for _, b in pairs)
    total = 0.0
    for (a, b) in sorted(joint):
        c = joint[a, b]
        total += c / n * math.log2(c * n / (ka[a] * kb[b]))
    return total


def _binning_deficiency(plan: ExtractorPlan, n: int, seed: int, nbins: int) -> float | None:
    # exact log|K| - H(K | S^n) with S = X B_D, by enumerating per-sample (G, S)
    # pairs; the per-sample pair is uniform on the image of X -> X [M | B_D]
    spec = plan.source
    p = spec.p
    joint = hstack([plan.g_matrix, plan.md_basis])
    rk = rank(joint)
    if p ** (rk * n) > MI_CELL_LIMIT:
        return None
    basis = column_space(joint).basis  # m x rk; X -> X basis is onto GF(p)^rk
    coords = solve_factor(basis, joint)  # rk x (k + d)
    k = plan.g_matrix.cols
    pts = np.array(list(itertools.product(range(p), repeat=rk)), dtype=np.int64).reshape(-1, rk)
    imgs = (pts @ coords.to_array()) % p
    per_sample = [(imgs[t, :k], tuple(int(v) for v in imgs[t, k:])) for t in range(len(pts))]
    weight = 1.0 / len(per_sample) ** n
    cond: dict[tuple, Counter] = defaultdict(Counter)
    for combo in itertools.product(range(len(per_sample)), repeat=n):
        gs = np.concatenate([per_sample[c][0] for c in combo]) if k else np.zeros(0, np.int64)
        s = tuple(per_sample[c][1] for c in combo)
        cond[s][_bin_index(gs, seed, nbins)] += 1
    h = 0.0
    for s in sorted(cond):
        tot = sum(cond[s].values())
        ps = tot * weight
        h += ps * sum(c / tot * math.log2(tot / c) for c in cond[s].values())
    return math.log2(nbins) - h


def simulate(plan: ExtractorPlan, n: int, trials: int, seed: int = 0, *,
             binning: bool = False) -> SimReport:
    """Run ``trials`` independent blocks of ``n`` samples and audit the keys."""
    if n < 1 or trials < 1:
        raise ValueError(f"n and trials must be positive, got n={n}, trials={trials}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    spec = plan.source
    p, m = spec.p, spec.ambient_dim
    active = spec.ordered(spec.active)
    mats = {u: spec.matrices[u].to_array() for u in active}
    maps = {u: plan.recovery_maps[u].to_array() for u in active}
    e = plan.extractor.to_array()
    bd = plan.md_basis.to_array()
    r = plan.key_rank
    nbins = p ** (r * n)
    mi_ok = p ** (r * n) * p ** (bd.shape[1] * n) <= MI_CELL_LIMIT

    agree = 0
    pairs = []
    for gen in _trial_generators(seed, trials):
        x = gen.integers(0, p, size=(n, m), dtype=np.int64)
        keys = []
        for u in active:
            z = (x @ mats[u]) % p
            g = (z @ maps[u]) % p
            if binning:
                keys.append((_bin_index(g.ravel(), seed, nbins),))
            else:
                keys.append(tuple(int(v) for v in ((g @ e) % p).ravel()))
        if all(k == keys[0] for k in keys[1:]):
            agree += 1
        if mi_ok:
            pairs.append((keys[0], tuple(int(v) for v in ((x @ bd) % p).ravel())))

    deficiency = None
    if binning:
        deficiency = _binning_deficiency(plan, n, seed, nbins)
    elif plan.exact_independence:
        deficiency = 0.0
    return SimReport(
        n=n, trials=trials, mode="binning" if binning else "linear",
        agreement_rate=agree / trials,
        key_rate_bits_per_sample=r * math.log2(p),
        capacity_bits=plan.capacity.capacity_bits,
        exact_independence=plan.exact_independence and not binning,
        empirical_mi_bits=_plugin_mi(pairs) if mi_ok else None,
        secrecy_deficiency_bits=deficiency,
        rng_seed=seed, rng_algorithm=RNG_ALGORITHM)
