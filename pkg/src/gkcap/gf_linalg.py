"""Exact linear algebra over prime fields GF(p).

Matrices are small dense numpy int64 arrays holding residues in ``[0, p)``.
Column spaces are kept in reduced column-echelon form so that subspace
equality is plain entry comparison.  For ``p == 2`` row reduction runs on
int bitsets; it returns exactly what the dense path returns.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

# keeps a*b + c inside int64 for every residue pair
MAX_PRIME = 2**31 - 1


class Infeasible(ValueError):
    """Raised by :func:`solve_factor` when some column of ``b`` is outside span(a)."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or isinstance(self.p, bool):
            raise TypeError(f"field modulus must be an integer, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        if not _is_prime(self.p):
            raise ValueError(f"field modulus {self.p} is not prime")
        if self.p > MAX_PRIME:
            raise ValueError(f"field modulus {self.p} exceeds {MAX_PRIME}")

    def inv(self, a: int) -> int:
        return pow(int(a) % self.p, -1, self.p)


def _as_field(field: FieldSpec | int) -> FieldSpec:
    return field if isinstance(field, FieldSpec) else FieldSpec(field)


class FieldMatrix:
    """Immutable matrix over GF(p).

    ``data`` may be any nested sequence or 2-D array of integers; entries are
    reduced mod p.  Use ``rows``/``cols`` to build matrices with a zero
    dimension (e.g. ``FieldMatrix.zeros(2, 3, 0)``).
    """

    __slots__ = ("field", "_a")

    def __init__(self, field: FieldSpec | int, data, rows: int | None = None,
                 cols: int | None = None):
        field = _as_field(field)
        a = np.array(data, dtype=np.int64)
        if a.size == 0:
            r = rows if rows is not None else (a.shape[0] if a.ndim >= 1 else 0)
            c = cols if cols is not None else (a.shape[1] if a.ndim == 2 else 0)
            a = np.zeros((r, c), dtype=np.int64)
        if a.ndim != 2:
            raise ValueError(f"matrix data must be 2-D, got shape {a.shape}")
        if rows is not None and a.shape[0] != rows or cols is not None and a.shape[1] != cols:
            raise ValueError(f"matrix shape {a.shape} does not match rows={rows} cols={cols}")
        a = np.mod(a, field.p)
        a.setflags(write=False)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "_a", a)

    def __setattr__(self, name, value):
        raise AttributeError("FieldMatrix is immutable")

    @classmethod
    def zeros(cls, field: FieldSpec | int, rows: int, cols: int) -> "FieldMatrix":
        return cls(field, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, field: FieldSpec | int, n: int) -> "FieldMatrix":
        return cls(field, np.eye(n, dtype=np.int64))

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def entries(self) -> tuple[int, ...]:
        """Row-major residues."""
        return tuple(int(x) for x in self._a.ravel())

    def to_array(self) -> np.ndarray:
        return self._a.copy()

    def tolist(self) -> list[list[int]]:
        return self._a.tolist()

    @property
    def T(self) -> "FieldMatrix":
        return FieldMatrix(self.field, self._a.T)

    def column(self, j: int) -> np.ndarray:
        return self._a[:, j].copy()

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        _check_field(self, other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        return FieldMatrix(self.field, _mulmod(self._a, other._a, self.p),
                           rows=self.rows, cols=other.cols)

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        _check_field(self, other)
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return FieldMatrix(self.field, self._a + other._a, rows=self.rows, cols=self.cols)

    def __neg__(self) -> "FieldMatrix":
        return FieldMatrix(self.field, -self._a, rows=self.rows, cols=self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return (self.p == other.p and self.shape == other.shape
                and bool(np.array_equal(self._a, other._a)))

    def __hash__(self) -> int:
        return hash((self.p, self.shape, self._a.tobytes()))

    def __repr__(self) -> str:
        return f"FieldMatrix(p={self.p}, {self.tolist()!r}, rows={self.rows}, cols={self.cols})"

    def to_literal(self) -> str:
        return format_matrix(self)


def _check_field(a: FieldMatrix, b: FieldMatrix) -> None:
    if a.p != b.p:
        raise ValueError(f"field mismatch: GF({a.p}) vs GF({b.p})")


def _mulmod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    if p < 2**26 and a.shape[1] < 2**10:
        return np.mod(a @ b, p)
    # reduce after every rank-one update to stay inside int64
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(a.shape[1]):
        out = np.mod(out + np.outer(a[:, k], b[k, :]) % p, p)
    return out


def hstack(mats: Sequence[FieldMatrix], field: FieldSpec | int | None = None,
           rows: int | None = None) -> FieldMatrix:
    """Concatenate side by side; ``field``/``rows`` give the shape of an empty stack."""
    if not mats:
        if field is None or rows is None:
            raise ValueError("empty hstack needs field and rows")
        return FieldMatrix.zeros(field, rows, 0)
    for m in mats[1:]:
        _check_field(mats[0], m)
        if m.rows != mats[0].rows:
            raise ValueError(f"row mismatch in hstack: {m.rows} vs {mats[0].rows}")
    arr = np.concatenate([m._a for m in mats], axis=1)
    return FieldMatrix(mats[0].field, arr, rows=mats[0].rows, cols=arr.shape[1])


# -- row reduction ----------------------------------------------------------

def _rref_dense(a: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    m = np.array(a, dtype=np.int64, copy=True)
    nrows, ncols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        inv = pow(int(m[r, c]), -1, p)
        m[r] = (m[r] * inv) % p
        factors = m[:, c].copy()
        factors[r] = 0
        rows_to_fix = np.nonzero(factors)[0]
        if rows_to_fix.size:
            m[rows_to_fix] = (m[rows_to_fix] - np.outer(factors[rows_to_fix], m[r]) % p) % p
        pivots.append(c)
        r += 1
    return m, pivots


def _pack_rows(a: np.ndarray) -> list[int]:
    # bit j of the int is column j
    weights = [1 << j for j in range(a.shape[1])]
    return [sum(w for w, x in zip(weights, row) if x) for row in a.tolist()]


def _unpack_rows(rows: list[int], ncols: int) -> np.ndarray:
    out = np.zeros((len(rows), ncols), dtype=np.int64)
    for i, v in enumerate(rows):
        j = 0
        while v:
            if v & 1:
                out[i, j] = 1
            v >>= 1
            j += 1
    return out


def _rref_gf2(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    nrows, ncols = a.shape
    work = _pack_rows(a)
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        bit = 1 << c
        piv = next((i for i in range(r, nrows) if work[i] & bit), None)
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        for i in range(nrows):
            if i != r and work[i] & bit:
                work[i] ^= work[r]
        pivots.append(c)
        r += 1
    return _unpack_rows(work, ncols), pivots


def rref(m: FieldMatrix, *, dense: bool = False) -> tuple[FieldMatrix, int, list[int]]:
    """Reduced row-echelon form of ``m``.

    Returns ``(R, rank, pivot_cols)``.  Pivots are chosen in the leftmost
    column at the smallest available row index.  ``dense=True`` forces the
    generic path even when p == 2.
    """
    if m.p == 2 and not dense:
        r, piv = _rref_gf2(m._a)
    else:
        r, piv = _rref_dense(m._a, m.p)
    return FieldMatrix(m.field, r, rows=m.rows, cols=m.cols), len(piv), piv


def rank(m: FieldMatrix) -> int:
    return rref(m)[1]


# -- subspaces --------------------------------------------------------------

class Subspace:
    """Column space in GF(p)^n with a canonical basis.

    The basis is in reduced column-echelon form: pivot rows ascending, pivot
    entries 1, zeros elsewhere in pivot rows.  Equality compares bases.
    """

    __slots__ = ("basis",)

    def __init__(self, basis: FieldMatrix, *, _canonical: bool = False):
        if not _canonical:
            basis = _canonical_basis(basis)
        object.__setattr__(self, "basis", basis)

    def __setattr__(self, name, value):
        raise AttributeError("Subspace is immutable")

    @classmethod
    def zero(cls, field: FieldSpec | int, ambient_dim: int) -> "Subspace":
        return cls(FieldMatrix.zeros(field, ambient_dim, 0), _canonical=True)

    @classmethod
    def full(cls, field: FieldSpec | int, ambient_dim: int) -> "Subspace":
        return cls(FieldMatrix.identity(field, ambient_dim), _canonical=True)

    @property
    def field(self) -> FieldSpec:
        return self.basis.field

    @property
    def ambient_dim(self) -> int:
        return self.basis.rows

    @property
    def dim(self) -> int:
        return self.basis.cols

    def contains(self, other: "Subspace") -> bool:
        _check_conforming(self, other)
        return join(self, other).dim == self.dim

    def contains_vector(self, v: Iterable[int]) -> bool:
        col = FieldMatrix(self.field, np.array(list(v), dtype=np.int64).reshape(-1, 1),
                          rows=self.ambient_dim, cols=1)
        return self.contains(column_space(col))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.basis == other.basis

    def __hash__(self) -> int:
        return hash(self.basis)

    def __le__(self, other: "Subspace") -> bool:
        return other.contains(self)

    def __repr__(self) -> str:
        return (f"Subspace(p={self.field.p}, ambient_dim={self.ambient_dim}, "
                f"basis_cols={self.basis.T.tolist()!r})")


def _canonical_basis(m: FieldMatrix) -> FieldMatrix:
    r, rk, _ = rref(m.T)
    rows = r._a[:rk]
    return FieldMatrix(m.field, rows.T, rows=m.rows, cols=rk)


def canonicalize(m: FieldMatrix) -> FieldMatrix:
    """Canonical basis (reduced column-echelon form) of span(m)."""
    return _canonical_basis(m)


def _check_conforming(u: Subspace, w: Subspace) -> None:
    if u.field != w.field:
        raise ValueError(f"field mismatch: GF({u.field.p}) vs GF({w.field.p})")
    if u.ambient_dim != w.ambient_dim:
        raise ValueError(f"ambient dimension mismatch: {u.ambient_dim} vs {w.ambient_dim}")


def column_space(m: FieldMatrix) -> Subspace:
    return Subspace(m)


def null_space(m: FieldMatrix) -> Subspace:
    """Kernel {v : m v = 0} as a canonical subspace of GF(p)^cols."""
    r, rk, piv = rref(m)
    p = m.p
    free = [c for c in range(m.cols) if c not in set(piv)]
    vecs = np.zeros((m.cols, len(free)), dtype=np.int64)
    ra = r._a
    for k, f in enumerate(free):
        vecs[f, k] = 1
        for i, pc in enumerate(piv):
            vecs[pc, k] = (-ra[i, f]) % p
    return Subspace(FieldMatrix(m.field, vecs, rows=m.cols, cols=len(free)))


def join(u: Subspace, w: Subspace) -> Subspace:
    _check_conforming(u, w)
    return Subspace(hstack([u.basis, w.basis]))


def meet(u: Subspace, w: Subspace) -> Subspace:
    """Intersection via the kernel of [B_u | B_w]: each kernel vector (a; b) gives B_u a."""
    _check_conforming(u, w)
    if u.dim == 0 or w.dim == 0:
        return Subspace.zero(u.field, u.ambient_dim)
    ker = null_space(hstack([u.basis, w.basis]))
    a_part = FieldMatrix(u.field, ker.basis._a[:u.dim], rows=u.dim, cols=ker.dim)
    return Subspace(u.basis @ a_part)


def meet_all(spaces: Sequence[Subspace]) -> Subspace:
    if not spaces:
        raise ValueError("meet of an empty family is undefined")
    return reduce(meet, spaces)


def solve_factor(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    """Return W with ``a @ W == b``; free variables are set to zero.

    Raises :class:`Infeasible` if some column of ``b`` lies outside span(a).
    """
    _check_field(a, b)
    if a.rows != b.rows:
        raise ValueError(f"row mismatch: a has {a.rows} rows, b has {b.rows}")
    aug = hstack([a, b])
    r, _, piv = rref(aug)
    if any(c >= a.cols for c in piv):
        raise Infeasible("right-hand side is not in the column space of a")
    w = np.zeros((a.cols, b.cols), dtype=np.int64)
    for i, c in enumerate(piv):
        w[c] = r._a[i, a.cols:]
    return FieldMatrix(a.field, w, rows=a.cols, cols=b.cols)


def is_factorable(a: FieldMatrix, b: FieldMatrix) -> bool:
    try:
        solve_factor(a, b)
    except Infeasible:
        return False
    return True


# -- text literal -----------------------------------------------------------

_LITERAL_RE = re.compile(
    r"^p=(?P<p>\d+)rows=(?P<rows>\d+)cols=(?P<cols>\d+)data=(?P<data>[-0-9,;]*)$")


def parse_matrix(text: str) -> FieldMatrix:
    """Parse ``p=2 rows=3 cols=2 data=1,0;0,1;0,0``.

    Whitespace is ignored.  Out-of-range entries are reduced mod p with a
    logged warning.
    """
    compact = re.sub(r"\s+", "", text)
    mt = _LITERAL_RE.match(compact)
    if mt is None:
        raise ValueError(f"malformed matrix literal: {text!r}")
    field = FieldSpec(int(mt["p"]))
    nrows, ncols = int(mt["rows"]), int(mt["cols"])
    data = mt["data"]
    row_txt = data.split(";") if data else []
    if nrows * ncols == 0:
        if any(row_txt):
            raise ValueError(f"matrix literal with a zero dimension must have empty data: {text!r}")
        return FieldMatrix.zeros(field, nrows, ncols)
    if len(row_txt) != nrows:
        raise ValueError(f"expected {nrows} rows, found {len(row_txt)}")
    raw = []
    for i, rt in enumerate(row_txt):
        vals = [int(x) for x in rt.split(",")] if rt else []
        if len(vals) != ncols:
            raise ValueError(f"row {i}: expected {ncols} entries, found {len(vals)}")
        raw.append(vals)
    if any(not 0 <= v < field.p for row in raw for v in row):
        log.warning("matrix literal has entries outside [0, %d); reducing mod %d", field.p, field.p)
    return FieldMatrix(field, raw, rows=nrows, cols=ncols)


def format_matrix(m: FieldMatrix) -> str:
    data = ";".join(",".join(str(x) for x in row) for row in m.tolist()) if m.rows * m.cols else ""
    return f"p={m.p} rows={m.rows} cols={m.cols} data={data}"
