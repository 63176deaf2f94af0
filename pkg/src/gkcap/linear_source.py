"""Finite linear sources ``Z_i = X M_i`` with X uniform over GF(p)^m.

The maximal common function of the active users is ``G = X M`` where the
column space of M is the intersection of the users' column spaces, so all
quantities here reduce to ranks.  :func:`export_discrete` enumerates the
source for the brute-force oracle in :mod:`gkcap.discrete_source`.
"""

from __future__ import annotations

import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import discrete_source as ds
from .gf_linalg import (FieldMatrix, FieldSpec, Subspace, column_space, hstack, meet,
                        rank, solve_factor)

DEFAULT_EXHAUSTION_CAP = 2**20
CAP_ENV_VAR = "GKCAP_EXHAUSTION_CAP"


class SpecError(ValueError):
    """Invalid source specification; ``location`` names the offending field."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ExhaustionCapExceeded(ValueError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"enumeration needs {required} atoms but the exhaustion cap is {cap}; "
                         f"raise it to at least {required} (env {CAP_ENV_VAR})")
        self.required = required
        self.cap = cap


def exhaustion_cap() -> int:
    raw = os.environ.get(CAP_ENV_VAR)
    if not raw:
        return DEFAULT_EXHAUSTION_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise SpecError(f"not an integer: {raw!r}", CAP_ENV_VAR) from None
    if cap < 1:
        raise SpecError(f"must be positive, got {cap}", CAP_ENV_VAR)
    return cap


@dataclass(frozen=True)
class LinearSourceSpec:
    """Users observe ``Z_i = X M_i``; roles are active (A), untrusted (D), silent (S).

    Users in neither A nor D are trusted helpers.  Silent flags are carried
    for completeness and never affect any computed quantity.
    """

    field: FieldSpec
    ambient_dim: int
    users: tuple[str, ...]
    matrices: Mapping[str, FieldMatrix]
    active: frozenset[str]
    untrusted: frozenset[str] = frozenset()
    silent: frozenset[str] = frozenset()

    def __post_init__(self):
        fld = self.field if isinstance(self.field, FieldSpec) else FieldSpec(self.field)
        users = tuple(str(u) for u in self.users)
        if len(set(users)) != len(users):
            raise SpecError(f"duplicate user ids {users}", "users")
        mats = {str(k): v for k, v in self.matrices.items()}
        if set(mats) != set(users):
            raise SpecError(f"matrix keys {sorted(mats)} do not match users {list(users)}",
                            "matrices")
        if self.ambient_dim < 0:
            raise SpecError("must be non-negative", "ambient_dim")
        for u in users:
            m = mats[u]
            if m.field != fld:
                raise SpecError(f"matrix over GF({m.p}), source over GF({fld.p})",
                                f"users[{u}].matrix")
            if m.rows != self.ambient_dim:
                raise SpecError(f"matrix has {m.rows} rows, expected {self.ambient_dim}",
                                f"users[{u}].matrix")
        active = frozenset(str(u) for u in self.active)
        untrusted = frozenset(str(u) for u in self.untrusted)
        silent = frozenset(str(u) for u in self.silent)
        for name, s in (("active", active), ("untrusted", untrusted), ("silent", silent)):
            if not s <= set(users):
                raise SpecError(f"unknown users {sorted(s - set(users))}", name)
        if len(active) < 2:
            raise SpecError(f"need at least two active users, got {sorted(active)}", "active")
        if active & untrusted:
            raise SpecError(f"users {sorted(active & untrusted)} are both active and untrusted",
                            "untrusted")
        object.__setattr__(self, "field", fld)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "matrices", {u: mats[u] for u in users})
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "untrusted", untrusted)
        object.__setattr__(self, "silent", silent)

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def trusted_helpers(self) -> tuple[str, ...]:
        return tuple(u for u in self.users if u not in self.active and u not in self.untrusted)

    def ordered(self, subset: Iterable[str]) -> tuple[str, ...]:
        s = {str(u) for u in subset}
        unknown = s - set(self.users)
        if unknown:
            raise SpecError(f"unknown users {sorted(unknown)}", "set")
        return tuple(u for u in self.users if u in s)

    def stack(self, subset: Iterable[str]) -> FieldMatrix:
        """``[M_i : i in subset]`` side by side, in user order."""
        return hstack([self.matrices[u] for u in self.ordered(subset)],
                      field=self.field, rows=self.ambient_dim)

    def with_user(self, uid: str, matrix: FieldMatrix, *, active: bool = False,
                  untrusted: bool = False, silent: bool = False) -> "LinearSourceSpec":
        uid = str(uid)
        if uid in self.users:
            raise SpecError(f"user {uid!r} already exists", "users")
        return LinearSourceSpec(
            self.field, self.ambient_dim, self.users + (uid,),
            {**self.matrices, uid: matrix},
            self.active | ({uid} if active else set()),
            self.untrusted | ({uid} if untrusted else set()),
            self.silent | ({uid} if silent else set()))

    def without_users(self, drop: Iterable[str]) -> "LinearSourceSpec":
        drop = set(self.ordered(drop))
        keep = tuple(u for u in self.users if u not in drop)
        return LinearSourceSpec(self.field, self.ambient_dim, keep,
                                {u: self.matrices[u] for u in keep},
                                self.active - drop, self.untrusted - drop, self.silent - drop)

    def with_roles(self, *, active=None, untrusted=None, silent=None) -> "LinearSourceSpec":
        return replace(self,
                       active=self.active if active is None else frozenset(active),
                       untrusted=self.untrusted if untrusted is None else frozenset(untrusted),
                       silent=self.silent if silent is None else frozenset(silent))


@dataclass(frozen=True)
class McfResult:
    g_matrix: FieldMatrix
    recovery_maps: Mapping[str, FieldMatrix]
    jgk_bits: float

    @property
    def rank(self) -> int:
        return self.g_matrix.cols


@dataclass(frozen=True)
class CapacityReport:
    rank_m: int
    rank_md: int
    rank_joint: int
    capacity_bits: float
    jgk_bits: float


@dataclass(frozen=True)
class BivariateIdentities:
    jgk_bits: float
    mi_bits: float
    wyner_bits: float
    cond_mi_bits: float
    certified: bool
    witness: McfResult


def _bits(k: int, p: int) -> float:
    return k * math.log2(p)


def common_subspace(spec: LinearSourceSpec, active: Iterable[str] | None = None) -> Subspace:
    """Intersection of the active users' column spaces, folded pairwise in user order."""
    act = spec.ordered(spec.active if active is None else active)
    acc = column_space(spec.matrices[act[0]])
    for u in act[1:]:
        acc = meet(acc, column_space(spec.matrices[u]))
    return acc


def mcf(spec: LinearSourceSpec) -> McfResult:
    """Maximal common function ``G = X M`` of the active users."""
    g = common_subspace(spec).basis
    maps = {u: solve_factor(spec.matrices[u], g) for u in spec.ordered(spec.active)}
    return McfResult(g, maps, _bits(g.cols, spec.p))


def capacity(spec: LinearSourceSpec, result: McfResult | None = None) -> CapacityReport:
    """Zero-discussion secrecy capacity H(G | Z_D) = (rank[M M_D] - rank M_D) log2 p."""
    res = mcf(spec) if result is None else result
    md = spec.stack(spec.untrusted)
    rank_md = rank(md)
    rank_joint = rank(hstack([res.g_matrix, md]))
    return CapacityReport(res.rank, rank_md, rank_joint,
                          _bits(rank_joint - rank_md, spec.p), res.jgk_bits)


def subset_entropy(spec: LinearSourceSpec, users: Iterable[str]) -> float:
    """H(Z_B) = rank([M_i : i in B]) log2 p."""
    return _bits(rank(spec.stack(users)), spec.p)


def bivariate_identities(spec: LinearSourceSpec, *, certify: bool = True) -> BivariateIdentities:
    """GK common information, mutual information and Wyner common information of two users.

    The Wyner value is certified by checking I(Z_1 ^ Z_2 | X M) = 0 on the
    enumerated source; ``certify=False`` skips enumeration (``certified`` is
    then False and ``cond_mi_bits`` NaN).
    """
    act = spec.ordered(spec.active)
    if len(act) != 2:
        raise SpecError(f"exactly two active users required, got {len(act)}", "active")
    u1, u2 = act
    res = mcf(spec)
    m1, m2 = spec.matrices[u1], spec.matrices[u2]
    mi_bits = _bits(rank(m1) + rank(m2) - rank(hstack([m1, m2])), spec.p)
    if certify:
        src = export_discrete(spec, extra={"__G__": res.g_matrix}, users=act)
        cond_mi = ds.mutual_information(src, [u1], [u2], given=["__G__"])
        certified = ds.conditionally_independent(src, [u1], [u2], given=["__G__"])
    else:
        cond_mi, certified = float("nan"), False
    return BivariateIdentities(res.jgk_bits, mi_bits, res.jgk_bits, cond_mi, certified, res)


def _enumerate(field: FieldSpec, m: int) -> np.ndarray:
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((field.p,) * m).reshape(m, -1).T
    return grids.astype(np.int64)


def export_discrete(spec: LinearSourceSpec, *, extra: Mapping[str, FieldMatrix] | None = None,
                    users: Sequence[str] | None = None, cap: int | None = None
                    ) -> ds.DiscreteSource:
    """Enumerate X over GF(p)^m and aggregate the exact joint pmf of the Z_i.

    Each user's symbol is the tuple ``x M_i``.  ``extra`` appends derived
    coordinates ``x E`` (e.g. the m.c.f.) after the chosen users.
    """
    cap = exhaustion_cap() if cap is None else cap
    required = spec.p ** spec.ambient_dim
    if required > cap:
        raise ExhaustionCapExceeded(required, cap)
    names = list(spec.users if users is None else spec.ordered(users))
    mats = [spec.matrices[u] for u in names]
    extra = dict(extra or {})
    names += list(extra)
    mats += list(extra.values())
    xs = _enumerate(spec.field, spec.ambient_dim)
    images = [(xs @ m.to_array()) % spec.p if m.cols else np.zeros((len(xs), 0), np.int64)
              for m in mats]
    counts = Counter(
        tuple(tuple(int(v) for v in img[t]) for img in images) for t in range(len(xs)))
    pmf = {atom: Fraction(c, required) for atom, c in counts.items()}
    return ds.DiscreteSource(tuple(names), pmf)


def hypergraphical(field: FieldSpec | int, edges: Sequence[tuple], users: Sequence[str], *,
                   active: Iterable[str] | None = None, untrusted: Iterable[str] = (),
                   silent: Iterable[str] = ()) -> LinearSourceSpec:
    """Hypergraphical source: edge ``e`` carries ``weight`` uniform symbols seen by its users.

    ``edges`` holds ``(edge_id, incident_users, weight)``.  ``active``
    defaults to every user.
    """
    fld = field if isinstance(field, FieldSpec) else FieldSpec(field)
    users = tuple(str(u) for u in users)
    offsets = []
    total = 0
    for eid, inc, w in edges:
        if int(w) < 1:
            raise SpecError(f"edge {eid!r} has weight {w} < 1", "edges")
        missing = {str(u) for u in inc} - set(users)
        if missing:
            raise SpecError(f"edge {eid!r} references unknown users {sorted(missing)}", "edges")
        offsets.append((total, int(w), {str(u) for u in inc}))
        total += int(w)
    mats = {}
    for u in users:
        cols = []
        for start, w, inc in offsets:
            if u in inc:
                for k in range(w):
                    col = np.zeros(total, dtype=np.int64)
                    col[start + k] = 1
                    cols.append(col)
        arr = np.array(cols, dtype=np.int64).T if cols else np.zeros((total, 0), np.int64)
        mats[u] = FieldMatrix(fld, arr, rows=total, cols=len(cols))
    return LinearSourceSpec(fld, total, users, mats,
                            frozenset(users if active is None else active),
                            frozenset(untrusted), frozenset(silent))


# -- JSON -------------------------------------------------------------------

_SPEC_KEYS = frozenset({"field_p", "ambient_dim", "users"})
_USER_KEYS = frozenset({"id", "matrix", "roles", "cols"})
_ROLE_KEYS = frozenset({"active", "untrusted", "silent"})


def _reject_unknown(obj: Mapping, allowed: frozenset, loc: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SpecError(f"unknown key(s) {', '.join(map(repr, extra))}", loc)


def spec_from_dict(doc: Mapping) -> LinearSourceSpec:
    try:
        p = doc["field_p"]
        m = doc["ambient_dim"]
        entries = doc["users"]
    except KeyError as exc:
        raise SpecError(f"missing required key {exc.args[0]!r}", "$") from None
    _reject_unknown(doc, _SPEC_KEYS, "$")
    try:
        fld = FieldSpec(p)
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc), "field_p") from None
    if not isinstance(m, int) or m < 0:
        raise SpecError(f"must be a non-negative integer, got {m!r}", "ambient_dim")
    if not isinstance(entries, list):
        raise SpecError("must be an array", "users")
    users, mats = [], {}
    active, untrusted, silent = set(), set(), set()
    for k, ent in enumerate(entries):
        loc = f"users[{k}]"
        if not isinstance(ent, Mapping) or "id" not in ent or "matrix" not in ent:
            raise SpecError("each user needs 'id' and 'matrix'", loc)
        _reject_unknown(ent, _USER_KEYS, loc)
        uid = str(ent["id"])
        rows = ent["matrix"]
        if not isinstance(rows, list) or len(rows) != m:
            raise SpecError(f"matrix must have {m} rows", f"{loc}.matrix")
        widths = {len(r) if isinstance(r, list) else -1 for r in rows}
        if len(widths) > 1 or -1 in widths:
            raise SpecError("matrix rows must be arrays of equal length", f"{loc}.matrix")
        ncols = widths.pop() if widths else int(ent.get("cols", 0))
        try:
            arr = np.array(rows, dtype=np.int64).reshape(m, ncols)
        except (TypeError, ValueError, OverflowError) as exc:
            raise SpecError(f"bad entries: {exc}", f"{loc}.matrix") from None
        users.append(uid)
        mats[uid] = FieldMatrix(fld, arr, rows=m, cols=ncols)
        roles = ent.get("roles", {})
        if not isinstance(roles, Mapping):
            raise SpecError("must be an object", f"{loc}.roles")
        _reject_unknown(roles, _ROLE_KEYS, f"{loc}.roles")
        for key, flag in roles.items():
            if not isinstance(flag, bool):
                raise SpecError(f"must be true or false, got {flag!r}", f"{loc}.roles.{key}")
        if roles.get("active"):
            active.add(uid)
        if roles.get("untrusted"):
            untrusted.add(uid)
        if roles.get("silent"):
            silent.add(uid)
    return LinearSourceSpec(fld, m, tuple(users), mats, frozenset(active),
                            frozenset(untrusted), frozenset(silent))


def spec_to_dict(spec: LinearSourceSpec) -> dict:
    out = []
    for u in spec.users:
        mat = spec.matrices[u]
        ent = {"id": u, "matrix": mat.tolist(),
               "roles": {"active": u in spec.active, "untrusted": u in spec.untrusted,
                         "silent": u in spec.silent}}
        if spec.ambient_dim == 0:
            ent["cols"] = mat.cols
        out.append(ent)
    return {"field_p": spec.p, "ambient_dim": spec.ambient_dim, "users": out}


def load_spec(path: str | Path) -> LinearSourceSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}", str(path)) from None
    return spec_from_dict(doc)


def dumps_spec(spec: LinearSourceSpec) -> str:
    text = json.dumps(spec_to_dict(spec), indent=2)
    # one matrix row per line
    return re.sub(r"\[[\s\d,-]*\]",
                  lambda mt: "[" + ", ".join(re.findall(r"-?\d+", mt.group(0))) + "]", text)


def dump_spec(spec: LinearSourceSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_spec(spec) + "\n")


def example1() -> LinearSourceSpec:
    """Two users over GF(2): Z_1 = (x_a, x_b, x_a+x_b), Z_2 = (x_c, x_a+x_b+x_c)."""
    m1 = FieldMatrix(2, [[1, 0, 1], [0, 1, 1], [0, 0, 0]])
    m2 = FieldMatrix(2, [[0, 1], [0, 1], [1, 1]])
    return LinearSourceSpec(FieldSpec(2), 3, ("1", "2"), {"1": m1, "2": m2},
                            frozenset({"1", "2"}))
