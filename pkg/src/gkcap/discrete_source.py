"""Exact computations on explicit finite joint distributions.

This is the brute-force side of the toolkit: Shannon quantities from an
exact rational pmf, the maximal common function by ergodic decomposition
(connected components of the co-occurrence graph), the partition-based
multivariate mutual information, and a checker for the double Markov
property.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

Symbol = Hashable
Atom = tuple


def _sorted(items: Iterable):
    items = list(items)
    try:
        return sorted(items)
    except TypeError:
        return sorted(items, key=repr)


@dataclass(frozen=True)
class DiscreteSource:
    """Joint pmf of ``(Z_i : i in users)`` with exact rational probabilities.

    ``pmf`` maps joint tuples (one symbol per user, in ``users`` order) to
    positive :class:`~fractions.Fraction` values summing to exactly one.
    """

    users: tuple[str, ...]
    pmf: Mapping[Atom, Fraction]
    alphabets: tuple[frozenset, ...] = ()

    def __post_init__(self):
        users = tuple(str(u) for u in self.users)
        if len(set(users)) != len(users):
            raise ValueError(f"duplicate user ids: {users}")
        pmf: dict[Atom, Fraction] = {}
        for atom, pr in self.pmf.items():
            atom = tuple(atom)
            if len(atom) != len(users):
                raise ValueError(f"atom {atom!r} has arity {len(atom)}, expected {len(users)}")
            pr = Fraction(pr)
            if pr < 0:
                raise ValueError(f"negative probability {pr} at {atom!r}")
            if pr == 0:
                continue
            pmf[atom] = pmf.get(atom, Fraction(0)) + pr
        total = sum(pmf.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        support = _sorted(pmf)
        pmf = {a: pmf[a] for a in support}
        observed = [frozenset(a[k] for a in support) for k in range(len(users))]
        if self.alphabets:
            if len(self.alphabets) != len(users):
                raise ValueError("one alphabet per user is required")
            alph = tuple(frozenset(a) for a in self.alphabets)
            for k, (a, o) in enumerate(zip(alph, observed)):
                if not o <= a:
                    raise ValueError(f"user {users[k]} has support symbols outside its alphabet")
        else:
            alph = tuple(observed)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "alphabets", alph)

    @property
    def support(self) -> list[Atom]:
        return list(self.pmf)

    def index(self, users: Iterable[str]) -> tuple[int, ...]:
        pos = {u: k for k, u in enumerate(self.users)}
        out = []
        for u in users:
            u = str(u)
            if u not in pos:
                raise KeyError(f"unknown user {u!r}")
            out.append(pos[u])
        return tuple(out)

    def ordered(self, users: Iterable[str]) -> tuple[str, ...]:
        """``users`` deduplicated and sorted into source order."""
        idx = sorted(set(self.index(users)))
        return tuple(self.users[k] for k in idx)

    def marginal(self, users: Iterable[str]) -> "DiscreteSource":
        names = self.ordered(users)
        idx = self.index(names)
        acc: dict[Atom, Fraction] = defaultdict(Fraction)
        for atom, pr in self.pmf.items():
            acc[tuple(atom[k] for k in idx)] += pr
        return DiscreteSource(names, dict(acc), tuple(self.alphabets[k] for k in idx))

    def relabel(self, user: str, mapping: Mapping) -> "DiscreteSource":
        """Apply a bijection to one user's symbols."""
        k = self.index([user])[0]
        if len(set(mapping.values())) != len(mapping):
            raise ValueError("relabeling map is not injective")
        pmf = {a[:k] + (mapping[a[k]],) + a[k + 1:]: pr for a, pr in self.pmf.items()}
        alph = list(self.alphabets)
        alph[k] = frozenset(mapping[s] for s in alph[k])
        return DiscreteSource(self.users, pmf, tuple(alph))

    def with_user(self, name: str, fn: Callable[[Atom], Symbol]) -> "DiscreteSource":
        """Append a derived coordinate ``fn(atom)``."""
        pmf = {a + (fn(a),): pr for a, pr in self.pmf.items()}
        return DiscreteSource(self.users + (str(name),), pmf)


# -- Shannon quantities -----------------------------------------------------

def _projector(src: DiscreteSource, users: Iterable[str] | None) -> Callable[[Atom], tuple]:
    if users is None:
        return lambda a: ()
    idx = src.index(src.ordered(users))
    return lambda a: tuple(a[k] for k in idx)


def _push(src: DiscreteSource, key: Callable[[Atom], Hashable]) -> dict[Hashable, Fraction]:
    acc: dict[Hashable, Fraction] = defaultdict(Fraction)
    for atom, pr in src.pmf.items():
        acc[key(atom)] += pr
    return acc


def _entropy_of(src: DiscreteSource, key: Callable[[Atom], Hashable]) -> float:
    dist = _push(src, key)
    return sum(float(pr) * math.log2(1 / pr) for pr in (dist[k] for k in _sorted(dist)))


def entropy(src: DiscreteSource, users: Iterable[str]) -> float:
    """H(Z_B) in bits; zero for the empty set."""
    return _entropy_of(src, _projector(src, list(users)))


def _cond_mi(src: DiscreteSource, kb, kc, kg) -> float:
    # sum over the support of p(b,c,g) log [p(b,c,g) p(g) / (p(b,g) p(c,g))],
    # with the ratio formed exactly so independent parts contribute exactly 0
    pbcg = _push(src, lambda a: (kb(a), kc(a), kg(a)))
    pbg = _push(src, lambda a: (kb(a), kg(a)))
    pcg = _push(src, lambda a: (kc(a), kg(a)))
    pg = _push(src, kg)
    total = 0.0
    for key in _sorted(pbcg):
        b, c, g = key
        pr = pbcg[key]
        ratio = pr * pg[g] / (pbg[b, g] * pcg[c, g])
        if ratio != 1:
            total += float(pr) * math.log2(ratio)
    return total


def conditional_entropy(src: DiscreteSource, users: Iterable[str], given: Iterable[str]) -> float:
    """H(Z_B | Z_C) in bits."""
    kb, kc = _projector(src, list(users)), _projector(src, list(given))
    joint = _push(src, lambda a: (kb(a), kc(a)))
    marg = _push(src, kc)
    return sum(float(pr) * math.log2(marg[k[1]] / pr) for k, pr in
               ((k, joint[k]) for k in _sorted(joint)))


def _given_key(src: DiscreteSource, given) -> Callable[[Atom], Hashable]:
    if given is None:
        return lambda a: ()
    if isinstance(given, McfLabeling):
        return lambda a: given.labels[a]
    return _projector(src, list(given))


def mutual_information(src: DiscreteSource, b: Iterable[str], c: Iterable[str],
                       given=None) -> float:
    """I(Z_B ^ Z_C | given) in bits.

    ``given`` is a user set, an :class:`McfLabeling` computed on ``src``, or None.
    """
    return _cond_mi(src, _projector(src, list(b)), _projector(src, list(c)),
                    _given_key(src, given))


def conditionally_independent(src: DiscreteSource, b: Iterable[str], c: Iterable[str],
                              given=None) -> bool:
    """Exact test of p(b,c,g) p(g) == p(b,g) p(c,g) over all (b, c, g)."""
    kb, kc = _projector(src, list(b)), _projector(src, list(c))
    kg = _given_key(src, given)
    pbcg = _push(src, lambda a: (kb(a), kc(a), kg(a)))
    pbg = _push(src, lambda a: (kb(a), kg(a)))
    pcg = _push(src, lambda a: (kc(a), kg(a)))
    pg = _push(src, kg)
    by_g_b: dict = defaultdict(list)
    by_g_c: dict = defaultdict(list)
    for (bb, g) in pbg:
        by_g_b[g].append(bb)
    for (cc, g) in pcg:
        by_g_c[g].append(cc)
    for g, pgv in pg.items():
        for bb in by_g_b[g]:
            for cc in by_g_c[g]:
                if pbcg.get((bb, cc, g), Fraction(0)) * pgv != pbg[bb, g] * pcg[cc, g]:
                    return False
    return True


# -- maximal common function ------------------------------------------------

class UnionFind:
    """Disjoint sets over ``0..n-1``; the root of a set is its smallest element."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if rx < ry:
            self.parent[ry] = rx
        else:
            self.parent[rx] = ry


@dataclass(frozen=True)
class McfLabeling:
    """Component labels of the maximal common function.

    ``labels`` maps every joint support tuple of the source to a component id;
    ``per_user_tables[i]`` maps a symbol of user ``i`` to the same id.  Ids are
    numbered in order of the smallest support tuple (of the A-marginal) they
    contain.
    """

    active: tuple[str, ...]
    labels: Mapping[Atom, int]
    per_user_tables: Mapping[str, Mapping[Symbol, int]]
    jgk_bits: float
    num_components: int

    def blocks(self) -> list[frozenset]:
        """Partition of the joint support induced by the labels."""
        acc: dict[int, set] = defaultdict(set)
        for atom, lab in self.labels.items():
            acc[lab].add(atom)
        return [frozenset(acc[k]) for k in sorted(acc)]


def _check_active(src: DiscreteSource, active: Iterable[str]) -> tuple[str, ...]:
    act = src.ordered(active)
    if len(act) < 2:
        raise ValueError(f"need at least two active users, got {act}")
    return act


def _labeling_from_union(src: DiscreteSource, act: tuple[str, ...], keys: list[tuple],
                         uf: UnionFind) -> McfLabeling:
    idx = src.index(act)
    root_to_id: dict[int, int] = {}
    for pos in range(len(keys)):
        root = uf.find(pos)
        if root not in root_to_id:
            root_to_id[root] = len(root_to_id)
    key_label = {k: root_to_id[uf.find(pos)] for pos, k in enumerate(keys)}
    labels = {a: key_label[tuple(a[k] for k in idx)] for a in src.pmf}
    tables: dict[str, dict] = {}
    for j, u in enumerate(act):
        tab: dict = {}
        for k, lab in key_label.items():
            tab[k[j]] = lab
        tables[u] = tab
    h = _entropy_of(src, lambda a: labels[a])
    return McfLabeling(act, labels, tables, h, len(root_to_id))


def ergodic_decomposition(src: DiscreteSource, active: Iterable[str]) -> McfLabeling:
    """Maximal common function of ``Z_i, i in active``.

    Support points of the active marginal are joined whenever they agree in
    some active coordinate; the connected components are the labels.
    """
    act = _check_active(src, active)
    idx = src.index(act)
    keys = _sorted({tuple(a[k] for k in idx) for a in src.pmf})
    uf = UnionFind(len(keys))
    for j in range(len(act)):
        first: dict = {}
        for pos, key in enumerate(keys):
            sym = key[j]
            if sym in first:
                uf.union(first[sym], pos)
            else:
                first[sym] = pos
    return _labeling_from_union(src, act, keys, uf)


def pairwise_ergodic_decomposition(src: DiscreteSource, active: Iterable[str]) -> McfLabeling:
    """Same labeling built by folding the two-variable m.c.f. one user at a time.

    The running m.c.f. ``G`` of the users seen so far is paired with the next
    user ``Z_j`` and the bipartite (G, Z_j) support graph is decomposed.
    """
    act = _check_active(src, active)
    idx = src.index(act)
    keys = _sorted({tuple(a[k] for k in idx) for a in src.pmf})
    current = [(key[0],) for key in keys]
    for j in range(1, len(act)):
        uf = UnionFind(len(keys))
        for coord in (lambda pos: ("g", current[pos]), lambda pos: ("z", keys[pos][j])):
            first: dict = {}
            for pos in range(len(keys)):
                s = coord(pos)
                if s in first:
                    uf.union(first[s], pos)
                else:
                    first[s] = pos
        current = [(uf.find(pos),) for pos in range(len(keys))]
    uf = UnionFind(len(keys))
    first: dict = {}
    for pos in range(len(keys)):
        if current[pos] in first:
            uf.union(first[current[pos]], pos)
        else:
            first[current[pos]] = pos
    return _labeling_from_union(src, act, keys, uf)


def same_partition(a: McfLabeling, b: McfLabeling) -> bool:
    return set(a.blocks()) == set(b.blocks())


def capacity_oracle(src: DiscreteSource, active: Iterable[str],
                    untrusted: Iterable[str] = ()) -> float:
    """H(G | Z_D) in bits, with G from :func:`ergodic_decomposition`."""
    act = set(src.ordered(active))
    dset = set(src.ordered(untrusted))
    if act & dset:
        raise ValueError(f"active and untrusted sets overlap: {sorted(act & dset)}")
    lab = ergodic_decomposition(src, act)
    kd = _projector(src, dset)
    joint = _push(src, lambda a: (lab.labels[a], kd(a)))
    marg = _push(src, kd)
    return sum(float(pr) * math.log2(marg[k[1]] / pr) for k, pr in
               ((k, joint[k]) for k in _sorted(joint)))


# -- multivariate mutual information ----------------------------------------

@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(b) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = [u for b in blocks for u in b]
        if len(flat) != len(set(flat)):
            raise ValueError("partition blocks must be disjoint")
        object.__setattr__(self, "blocks", blocks)

    @property
    def ground(self) -> frozenset:
        return frozenset(u for b in self.blocks for u in b)

    def __len__(self) -> int:
        return len(self.blocks)


def restricted_growth_strings(n: int) -> Iterator[list[int]]:
    """All set partitions of ``range(n)`` as restricted growth strings, in lexicographic order."""
    if n == 0:
        yield []
        return
    a = [0] * n
    b = [1] * n  # b[i] = 1 + max(a[:i])
    while True:
        yield list(a)
        i = n - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = max(b[j - 1], a[j - 1] + 1)


def set_partitions(items: Sequence) -> Iterator[tuple[tuple, ...]]:
    for rgs in restricted_growth_strings(len(items)):
        nblocks = max(rgs) + 1 if rgs else 0
        blocks: list[list] = [[] for _ in range(nblocks)]
        for item, k in zip(items, rgs):
            blocks[k].append(item)
        yield tuple(tuple(b) for b in blocks)


MMI_MAX_USERS = 12
_TIE_TOL = 1e-12


def multivariate_mi(src: DiscreteSource, users: Iterable[str] | None = None
                    ) -> tuple[float, Partition]:
    """Partition-based multivariate mutual information I(Z_V').

    Minimizes ``(sum_C H(Z_C) - H(Z_V')) / (|P| - 1)`` over partitions with at
    least two blocks.  Ties (within 1e-12) go to the lexicographically
    smallest block encoding, blocks given as sorted user tuples.
    """
    names = src.ordered(src.users if users is None else users)
    if len(names) < 2:
        raise ValueError("multivariate mutual information needs at least two users")
    if len(names) > MMI_MAX_USERS:
        raise ValueError(f"{len(names)} users exceeds the brute-force limit of {MMI_MAX_USERS}")
    cache: dict[tuple, float] = {}

    def h(block: tuple) -> float:
        if block not in cache:
            cache[block] = entropy(src, block)
        return cache[block]

    h_all = h(names)
    best: tuple[float, tuple] | None = None
    for blocks in set_partitions(names):
        if len(blocks) < 2:
            continue
        val = (sum(h(b) for b in blocks) - h_all) / (len(blocks) - 1)
        enc = tuple(sorted(blocks))
        if best is None or val < best[0] - _TIE_TOL or (abs(val - best[0]) <= _TIE_TOL
                                                        and enc < best[1]):
            best = (val, enc)
    return best[0], Partition(best[1])


# -- double Markov check ----------------------------------------------------

@dataclass(frozen=True)
class DoubleMarkovReport:
    antecedent_mis: dict[str, float]
    consequent_mi: float
    antecedents_exact_zero: dict[str, bool]
    consequent_exact_zero: bool

    @property
    def hypothesis_holds(self) -> bool:
        return all(self.antecedents_exact_zero.values())

    @property
    def conclusion_holds(self) -> bool:
        return self.consequent_exact_zero


def verify_double_markov(joint: DiscreteSource, q: str, active: Iterable[str],
                         b: Iterable[str] | None = None) -> DoubleMarkovReport:
    """Evaluate I(Q ^ Z_B | Z_i) for i in A and I(Q ^ Z_B | G).

    ``G`` is the m.c.f. of the active users.  ``b`` defaults to every user
    other than ``q``.  The report only records values; whether every
    per-user independence holds is read off ``hypothesis_holds``.
    """
    q = str(q)
    bset = [u for u in joint.users if u != q] if b is None else list(joint.ordered(b))
    act = joint.ordered(active)
    if q in bset or q in act:
        raise ValueError("the designated variable Q must not be in B or A")
    if not set(act) <= set(bset):
        raise ValueError(f"active users {act} are not a subset of B {bset}")
    ante = {i: mutual_information(joint, [q], bset, given=[i]) for i in act}
    ante_exact = {i: conditionally_independent(joint, [q], bset, given=[i]) for i in act}
    g = ergodic_decomposition(joint, act)
    cons = mutual_information(joint, [q], bset, given=g)
    cons_exact = conditionally_independent(joint, [q], bset, given=g)
    return DoubleMarkovReport(ante, cons, ante_exact, cons_exact)


# -- JSON -------------------------------------------------------------------

def _decode_symbol(s):
    return tuple(_decode_symbol(x) for x in s) if isinstance(s, list) else s


def _encode_symbol(s):
    return [_encode_symbol(x) for x in s] if isinstance(s, tuple) else s


def source_from_dict(doc: Mapping) -> DiscreteSource:
    users = [str(u) for u in doc["users"]]
    pmf: dict[Atom, Fraction] = {}
    for k, at in enumerate(doc["atoms"]):
        try:
            tup = tuple(_decode_symbol(s) for s in at["tuple"])
            pr = Fraction(int(at["num"]), int(at["den"]))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"atoms[{k}]: {exc}") from exc
        pmf[tup] = pmf.get(tup, Fraction(0)) + pr
    alph = doc.get("alphabets")
    alphabets = tuple(frozenset(_decode_symbol(s) for s in a) for a in alph) if alph else ()
    return DiscreteSource(tuple(users), pmf, alphabets)


def source_to_dict(src: DiscreteSource) -> dict:
    return {
        "users": list(src.users),
        "alphabets": [[_encode_symbol(s) for s in _sorted(a)] for a in src.alphabets],
        "atoms": [{"tuple": [_encode_symbol(s) for s in atom],
                   "num": pr.numerator, "den": pr.denominator}
                  for atom, pr in src.pmf.items()],
    }


def load_source(path: str | Path) -> DiscreteSource:
    with open(path) as fh:
        return source_from_dict(json.load(fh))


def dump_source(src: DiscreteSource, path: str | Path) -> None:
    doc = source_to_dict(src)
    # one atom per line keeps large supports diffable
    body = ",\n".join("  " + json.dumps(a, separators=(", ", ": ")) for a in doc["atoms"])
    with open(path, "w") as fh:
        fh.write(f'{{\n "users": {json.dumps(doc["users"])},\n'
                 f' "alphabets": {json.dumps(doc["alphabets"])},\n'
                 f' "atoms": [\n{body}\n ]\n}}\n')
