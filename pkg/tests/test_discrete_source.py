import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from gkcap import discrete_source as ds
from gkcap.corpus import random_spec
from gkcap.linear_source import export_discrete

F = Fraction


def random_source(rng, nusers=3, max_alpha=3, max_support=8):
    alph = [list(range(int(rng.integers(1, max_alpha + 1)))) for _ in range(nusers)]
    cells = list(itertools.product(*alph))
    k = int(rng.integers(1, min(max_support, len(cells)) + 1))
    chosen = [cells[i] for i in rng.choice(len(cells), size=k, replace=False)]
    weights = [int(w) for w in rng.integers(1, 6, size=k)]
    tot = sum(weights)
    return ds.DiscreteSource(tuple(str(i + 1) for i in range(nusers)),
                             {c: F(w, tot) for c, w in zip(chosen, weights)})


def test_source_validation():
    with pytest.raises(ValueError):
        ds.DiscreteSource(("a", "b"), {(0, 0): F(1, 2)})
    with pytest.raises(ValueError):
        ds.DiscreteSource(("a", "b"), {(0,): F(1)})
    with pytest.raises(ValueError):
        ds.DiscreteSource(("a", "b"), {(0, 0): F(3, 2), (1, 1): F(-1, 2)})
    src = ds.DiscreteSource(("a", "b"), {(0, 0): F(1, 2), (1, 1): F(1, 2), (1, 0): 0})
    assert src.support == [(0, 0), (1, 1)]


def test_independent_bits():
    src = ds.DiscreteSource(("a", "b"), {(x, y): F(1, 4) for x in (0, 1) for y in (0, 1)})
    assert ds.entropy(src, ["a", "b"]) == 2.0
    assert ds.mutual_information(src, ["a"], ["b"]) == 0.0
    assert ds.entropy(src, []) == 0.0


def test_example1_shannon_quantities(ex1):
    src = export_discrete(ex1)
    assert ds.entropy(src, ["1"]) == pytest.approx(2.0, abs=1e-12)
    assert ds.entropy(src, ["2"]) == pytest.approx(2.0, abs=1e-12)
    assert ds.mutual_information(src, ["1"], ["2"]) == pytest.approx(1.0, abs=1e-12)


def test_chain_rule_random():
    rng = np.random.default_rng(1)
    for _ in range(50):
        src = random_source(rng)
        for b, c in [(["1"], ["2"]), (["1", "3"], ["2"]), (["2"], [])]:
            lhs = ds.conditional_entropy(src, b, c)
            rhs = ds.entropy(src, b + c) - ds.entropy(src, c)
            assert lhs == pytest.approx(rhs, abs=1e-12)
        i = ds.mutual_information(src, ["1"], ["2"], given=["3"])
        alt = (ds.entropy(src, ["1", "3"]) + ds.entropy(src, ["2", "3"])
               - ds.entropy(src, ["1", "2", "3"]) - ds.entropy(src, ["3"]))
        assert i == pytest.approx(alt, abs=1e-12)


def test_union_find_smallest_root():
    uf = ds.UnionFind(6)
    uf.union(4, 5)
    uf.union(5, 2)
    uf.union(1, 3)
    assert [uf.find(i) for i in range(6)] == [0, 1, 2, 1, 2, 2]


def test_ergodic_example1_is_xa_plus_xb(ex1):
    src = export_discrete(ex1)
    lab = ds.ergodic_decomposition(src, ["1", "2"])
    assert lab.jgk_bits == 1.0
    assert lab.num_components == 2
    # Z_1 = (x_a, x_b, x_a+x_b): the label must be a function of x_a + x_b
    parity = {}
    for atom, k in lab.labels.items():
        z1 = atom[0]
        parity.setdefault(k, set()).add((z1[0] + z1[1]) % 2)
    assert sorted(map(sorted, parity.values())) == [[0], [1]]


def test_ergodic_identical_sources():
    for k in (1, 2, 3, 5):
        src = ds.DiscreteSource(("a", "b"), {(s, s): F(1, k) for s in range(k)})
        lab = ds.ergodic_decomposition(src, ["a", "b"])
        assert lab.num_components == k
        assert lab.jgk_bits == pytest.approx(math.log2(k), abs=1e-12)


def test_ergodic_needs_two_users():
    src = ds.DiscreteSource(("a", "b"), {(0, 0): F(1)})
    with pytest.raises(ValueError):
        ds.ergodic_decomposition(src, ["a"])


def test_labels_commonness_and_order():
    rng = np.random.default_rng(2)
    for _ in range(100):
        src = random_source(rng, nusers=3)
        lab = ds.ergodic_decomposition(src, ["1", "2", "3"])
        for atom, k in lab.labels.items():
            for j, u in enumerate(src.users):
                assert lab.per_user_tables[u][atom[j]] == k
        # ids follow the smallest support tuple
        first = {}
        for atom in src.support:
            first.setdefault(lab.labels[atom], atom)
        assert list(first) == sorted(first)


def test_maximality_against_all_common_functions():
    """Every common function is constant on components.

    Functions on the support are enumerated up to relabeling of their
    values, i.e. as set partitions of the support.
    """
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 40:
        src = random_source(rng, nusers=2 + checked % 2, max_alpha=3, max_support=8)
        support = src.support
        lab = ds.ergodic_decomposition(src, src.users)
        ncommon = 0
        for rgs in ds.restricted_growth_strings(len(support)):
            f = dict(zip(support, rgs))
            common = all(
                len({f[a] for a in support if a[j] == sym}) == 1
                for j in range(len(src.users)) for sym in {a[j] for a in support})
            if not common:
                continue
            ncommon += 1
            for atom in support:
                for other in support:
                    if lab.labels[atom] == lab.labels[other]:
                        assert f[atom] == f[other]
        # the labeling is itself common, and so is everything coarser than it
        assert ncommon == [1, 1, 2, 5, 15, 52, 203, 877, 4140][lab.num_components]
        checked += 1


def test_bivariate_reduction_to_bipartite_components():
    rng = np.random.default_rng(4)
    for _ in range(50):
        src = random_source(rng, nusers=2)
        lab = ds.ergodic_decomposition(src, ["1", "2"])
        # bipartite graph: left = z_1 symbols, right = z_2 symbols
        adj = {}
        for a, b in src.support:
            adj.setdefault(("L", a), set()).add(("R", b))
            adj.setdefault(("R", b), set()).add(("L", a))
        comp, nxt = {}, 0
        for v in sorted(adj):
            if v in comp:
                continue
            stack = [v]
            while stack:
                x = stack.pop()
                if x in comp:
                    continue
                comp[x] = nxt
                stack.extend(adj[x])
            nxt += 1
        blocks = {}
        for a, b in src.support:
            blocks.setdefault(comp["L", a], set()).add((a, b))
        assert set(map(frozenset, blocks.values())) == set(lab.blocks())


def test_pairwise_fold_agrees():
    rng = np.random.default_rng(5)
    for _ in range(100):
        src = random_source(rng, nusers=3, max_alpha=3, max_support=10)
        a = ds.ergodic_decomposition(src, ["1", "2", "3"])
        b = ds.pairwise_ergodic_decomposition(src, ["1", "2", "3"])
        assert ds.same_partition(a, b)
        assert a.labels == b.labels


def test_bijection_invariance():
    rng = np.random.default_rng(6)
    for _ in range(40):
        src = random_source(rng, nusers=3)
        lab = ds.ergodic_decomposition(src, ["1", "2"])
        cap = ds.capacity_oracle(src, ["1", "2"], ["3"])
        perm = {s: -10 * s - 1 for s in src.alphabets[0]}
        other = src.relabel("1", perm)
        assert ds.ergodic_decomposition(other, ["1", "2"]).jgk_bits == pytest.approx(lab.jgk_bits)
        assert ds.capacity_oracle(other, ["1", "2"], ["3"]) == pytest.approx(cap)


def test_capacity_oracle_basic(ex1):
    src = export_discrete(ex1)
    assert ds.capacity_oracle(src, ["1", "2"]) == ds.ergodic_decomposition(src, ["1", "2"]).jgk_bits
    leaky = src.with_user("3", lambda a: (a[0][0] + a[0][1]) % 2)
    assert ds.capacity_oracle(leaky, ["1", "2"], ["3"]) == 0.0
    with pytest.raises(ValueError):
        ds.capacity_oracle(leaky, ["1", "2"], ["2"])


def test_restricted_growth_strings_bell_numbers():
    bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140]
    for n, b in enumerate(bell):
        rgs = list(ds.restricted_growth_strings(n))
        assert len(rgs) == b
        assert len(set(map(tuple, rgs))) == b
        assert rgs == sorted(rgs)
    blocks = list(ds.set_partitions(["a", "b", "c"]))
    assert blocks[0] == (("a", "b", "c"),)
    assert (("a",), ("b",), ("c",)) in blocks


def test_mmi_two_users_is_mutual_information():
    rng = np.random.default_rng(7)
    for _ in range(50):
        src = random_source(rng, nusers=2)
        val, part = ds.multivariate_mi(src)
        assert val == pytest.approx(ds.mutual_information(src, ["1"], ["2"]), abs=1e-12)
        assert part.blocks == (("1",), ("2",))


def test_mmi_example1(ex1):
    val, _ = ds.multivariate_mi(export_discrete(ex1))
    assert val == pytest.approx(1.0, abs=1e-12)


def test_mmi_brute_formula_and_tie_break():
    # three copies of one bit: every partition scores 1 bit
    src = ds.DiscreteSource(("a", "b", "c"), {(0, 0, 0): F(1, 2), (1, 1, 1): F(1, 2)})
    val, part = ds.multivariate_mi(src)
    assert val == pytest.approx(1.0)
    encs = sorted(tuple(sorted(p)) for p in ds.set_partitions(["a", "b", "c"]) if len(p) > 1)
    assert part.blocks == encs[0]


def test_mmi_ge_gk_on_linear_sources():
    rng = np.random.default_rng(8)
    for _ in range(100):
        spec = random_spec(rng, nusers=3, nactive=3, max_dim=3)
        src = export_discrete(spec)
        val, _ = ds.multivariate_mi(src)
        assert val >= ds.ergodic_decomposition(src, src.users).jgk_bits - 1e-9


def test_mmi_size_limit():
    src = ds.DiscreteSource(tuple(str(i) for i in range(13)), {tuple([0] * 13): F(1)})
    with pytest.raises(ValueError):
        ds.multivariate_mi(src)
    with pytest.raises(ValueError):
        ds.multivariate_mi(src, ["0"])


def test_partition_validation():
    with pytest.raises(ValueError):
        ds.Partition((("a",), ()))
    with pytest.raises(ValueError):
        ds.Partition((("a", "b"), ("b",)))
    assert len(ds.Partition((("a",), ("b", "c")))) == 2


def _kernel_through_labels(rng, src, lab, nq=3):
    kern = {}
    for k in range(lab.num_components):
        w = [int(x) for x in rng.integers(1, 5, size=nq)]
        kern[k] = [F(x, sum(w)) for x in w]
    pmf = {}
    for atom, pr in src.pmf.items():
        for q, pq in enumerate(kern[lab.labels[atom]]):
            pmf[(q,) + atom] = pr * pq
    return ds.DiscreteSource(("Q",) + src.users, pmf)


def test_double_markov_chain_through_g(ex1):
    src = export_discrete(ex1)
    lab = ds.ergodic_decomposition(src, ["1", "2"])
    joint = _kernel_through_labels(np.random.default_rng(0), src, lab)
    rep = ds.verify_double_markov(joint, "Q", ["1", "2"])
    assert all(v == 0.0 for v in rep.antecedent_mis.values())
    assert rep.consequent_mi == 0.0
    assert rep.hypothesis_holds and rep.conclusion_holds


def test_double_markov_non_applicable(ex1):
    src = export_discrete(ex1)
    joint = src.with_user("Q", lambda a: a)
    joint = ds.DiscreteSource(("Q",) + src.users, {(a[-1],) + a[:-1]: p for a, p in joint.pmf.items()})
    rep = ds.verify_double_markov(joint, "Q", ["1", "2"])
    assert max(rep.antecedent_mis.values()) > 0
    assert not rep.hypothesis_holds


def test_double_markov_validation(ex1):
    src = export_discrete(ex1).with_user("Q", lambda a: 0)
    with pytest.raises(ValueError):
        ds.verify_double_markov(src, "Q", ["1", "2"], b=["1"])
    with pytest.raises(ValueError):
        ds.verify_double_markov(src, "1", ["1", "2"])


def test_exact_conditional_independence():
    src = ds.DiscreteSource(("a", "b", "c"),
                            {(x, y, (x + y) % 2): F(1, 4) for x in (0, 1) for y in (0, 1)})
    assert ds.conditionally_independent(src, ["a"], ["b"])
    assert not ds.conditionally_independent(src, ["a"], ["b"], given=["c"])
    assert ds.mutual_information(src, ["a"], ["b"], given=["c"]) == pytest.approx(1.0)


def test_json_roundtrip(tmp_path):
    src = ds.DiscreteSource(("a", "b"), {((0, 1), "x"): F(1, 3), ((1, 1), "y"): F(2, 3)})
    path = tmp_path / "src.json"
    ds.dump_source(src, path)
    back = ds.load_source(path)
    assert back.pmf == src.pmf and back.users == src.users
    with pytest.raises(ValueError):
        ds.source_from_dict({"users": ["a"], "atoms": [{"tuple": [0], "num": 1, "den": 2}]})
