"""Truncated multi-index spaces, the weak-ascending/strict-descending
constraint sets, and sparse realizations of the level-k representations.

A multi-index m = (m_1, ..., m_n) is stored as a length-n tuple (or array
row); m_0 := 0 throughout.  The box truncation keeps every m_i <= cutoff and
compresses shifts that leave the box to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

import numpy as np
from scipy import sparse

from .algebra import NCElement, letter_index, letter_is_star


@dataclass(frozen=True)
class ConstraintSet:
    """Membership rule for the level subspaces: 'm' for the representation
    support (ascending up to m_k, strictly descending after), 'cap' for the
    overlap of consecutive levels (descent already strict from m_k)."""

    kind: str  # 'm' | 'cap'
    k: int

    def __post_init__(self):
        if self.kind not in ("m", "cap"):
            raise ValueError("constraint kind must be 'm' or 'cap'")
        if self.k < 0:
            raise ValueError("constraint level must be nonnegative")


def mconstr(k):
    return ConstraintSet("m", k)


def capconstr(k):
    return ConstraintSet("cap", k)


def in_constraint(m, c):
    """Exact membership of the multi-index tuple m in the constraint set."""
    m = tuple(m)
    k = c.k
    n = len(m)
    if k > n:
        raise ValueError(f"constraint level {k} exceeds index length {n}")
    ascending = all(m[t] <= m[t + 1] for t in range(k - 1))
    if not ascending:
        return False
    if c.kind == "m":
        tail = m[k:]
    else:
        tail = m[k - 1 :] if k >= 1 else m
    return all(tail[t] > tail[t + 1] for t in range(len(tail) - 1))


class TruncatedSpace:
    """All multi-indices with entries 0..cutoff, in lexicographic order."""

    def __init__(self, n, cutoff):
        if n < 0 or cutoff < 0:
            raise ValueError("need n >= 0 and cutoff >= 0")
        self.n = n
        self.cutoff = cutoff
        self.size = (cutoff + 1) ** n
        if n == 0:
            self.basis = np.zeros((1, 0), dtype=np.int32)
        else:
            grids = np.meshgrid(*([np.arange(cutoff + 1, dtype=np.int32)] * n), indexing="ij")
            self.basis = np.stack([g.reshape(-1) for g in grids], axis=1)
        self._powers = (cutoff + 1) ** np.arange(n - 1, -1, -1, dtype=np.int64)

    def index(self, m):
        """Position of the multi-index in the basis order."""
        m = np.asarray(m, dtype=np.int64)
        if m.ndim == 1:
            if len(m) != self.n:
                raise ValueError("multi-index length mismatch")
            if self.n == 0:
                return 0
            return int(m @ self._powers)
        return m @ self._powers

    def multi_index(self, idx):
        return tuple(int(v) for v in self.basis[idx])

    def constraint_mask(self, c):
        """Boolean mask over the basis for membership in the constraint set."""
        if c.k > self.n:
            raise ValueError(f"constraint level {c.k} exceeds ambient n={self.n}")
        b = self.basis
        mask = np.ones(self.size, dtype=bool)
        k = c.k
        for t in range(k - 1):
            mask &= b[:, t] <= b[:, t + 1]
        start = k if c.kind == "m" else max(k - 1, 0)
        for t in range(start, self.n - 1):
            mask &= b[:, t] > b[:, t + 1]
        return mask

    def interior_mask(self):
        """Indices whose entries all stay strictly below the cutoff."""
        if self.n == 0:
            return np.ones(1, dtype=bool)
        return (self.basis <= self.cutoff - 1).all(axis=1)

    def __repr__(self):
        return f"TruncatedSpace(n={self.n}, cutoff={self.cutoff}, size={self.size})"


# ---------------------------------------------------------------------------
# Exact scalars: rational combinations of square roots prod(1 - q^{2d}).
# ---------------------------------------------------------------------------


class ExactScalar:
    """Sum of terms c * sqrt(prod_{d in atoms} (1 - q^{2d})) at rational q.

    Stored as {sorted atom tuple: Fraction}; multiplication cancels paired
    atoms exactly, so represented-relation residuals can be checked with zero
    tolerance.
    """

    __slots__ = ("q0", "terms")

    def __init__(self, q0, terms=None):
        self.q0 = q0
        self.terms = {}
        if terms:
            for atoms, c in terms.items():
                if c != 0 and 0 not in atoms:
                    self.terms[atoms] = self.terms.get(atoms, Fraction(0)) + c
            self.terms = {a: c for a, c in self.terms.items() if c != 0}

    @classmethod
    def rational(cls, q0, c):
        return cls(q0, {(): Fraction(c)})

    @classmethod
    def root(cls, q0, c, atoms):
        """c * sqrt(prod_d (1 - q^{2d})); a zero radicand kills the term."""
        atoms = tuple(sorted(atoms))
        if 0 in atoms:
            return cls(q0)
        return cls(q0, {atoms: Fraction(c)})

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            s = out.get(a, Fraction(0)) + c
            if s == 0:
                out.pop(a, None)
            else:
                out[a] = s
        return ExactScalar._raw(self.q0, out)

    def __neg__(self):
        return ExactScalar._raw(self.q0, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return ExactScalar(self.q0)
            return ExactScalar._raw(self.q0, {a: c * other for a, c in self.terms.items()})
        self._check(other)
        out = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                atoms, extra = _merge_atoms(a1, a2, self.q0)
                c = c1 * c2 * extra
                s = out.get(atoms, Fraction(0)) + c
                if s == 0:
                    out.pop(atoms, None)
                else:
                    out[atoms] = s
        return ExactScalar._raw(self.q0, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ExactScalar.rational(self.q0, other)
        if not isinstance(other, ExactScalar):
            return NotImplemented
        return self.q0 == other.q0 and self.terms == other.terms

    def __float__(self):
        q = float(self.q0)
        total = 0.0
        for atoms, c in self.terms.items():
            rad = 1.0
            for d in atoms:
                rad *= 1.0 - q ** (2 * d)
            total += float(c) * sqrt(rad)
        return total

    def _check(self, other):
        if not isinstance(other, ExactScalar) or other.q0 != self.q0:
            raise ValueError("mixed exact scalars at different q")

    @staticmethod
    def _raw(q0, terms):
        s = ExactScalar.__new__(ExactScalar)
        s.q0 = q0
        s.terms = terms
        return s

    def __repr__(self):
        return f"ExactScalar({dict(self.terms)})"


def _merge_atoms(a1, a2, q0):
    """Merge two atom multisets, cancelling pairs into an exact rational."""
    merged = sorted(a1 + a2)
    kept = []
    extra = Fraction(1)
    i = 0
    while i < len(merged):
        if i + 1 < len(merged) and merged[i] == merged[i + 1]:
            extra *= 1 - Fraction(q0) ** (2 * merged[i])
            i += 2
        else:
            kept.append(merged[i])
            i += 1
    return tuple(kept), extra


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


class SparseOperator:
    """Float operator on a TruncatedSpace, backed by scipy CSR."""

    def __init__(self, space, mat):
        self.space = space
        self.mat = sparse.csr_matrix(mat)

    @classmethod
    def from_triples(cls, space, rows, cols, vals):
        mat = sparse.coo_matrix((vals, (rows, cols)), shape=(space.size, space.size))
        return cls(space, mat.tocsr())

    @classmethod
    def zero(cls, space):
        return cls(space, sparse.csr_matrix((space.size, space.size)))

    @classmethod
    def identity(cls, space):
        return cls(space, sparse.identity(space.size, format="csr"))

    @classmethod
    def diagonal(cls, space, diag):
        return cls(space, sparse.diags(np.asarray(diag, dtype=float), format="csr"))

    def adjoint(self):
        return SparseOperator(self.space, self.mat.T.conjugate().tocsr())

    def __add__(self, other):
        return SparseOperator(self.space, self.mat + other.mat)

    def __sub__(self, other):
        return SparseOperator(self.space, self.mat - other.mat)

    def __neg__(self):
        return SparseOperator(self.space, -self.mat)

    def scale(self, c):
        return SparseOperator(self.space, self.mat * float(c))

    def __matmul__(self, other):
        return SparseOperator(self.space, (self.mat @ other.mat).tocsr())

    def trace(self):
        return float(self.mat.diagonal().sum())

    def max_abs(self):
        return 0.0 if self.mat.nnz == 0 else float(abs(self.mat).max())

    def column_max_abs(self, column_mask):
        """Largest entry magnitude among the selected columns."""
        sub = self.mat.tocsc()[:, np.flatnonzero(column_mask)]
        return 0.0 if sub.nnz == 0 else float(abs(sub).max())

    def to_coo(self):
        coo = self.mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            (int(coo.row[t]), int(coo.col[t]), float(coo.data[t]))
            for t in order
            if coo.data[t] != 0.0
        ]

    def export(self):
        """Coordinate-list export with the basis header."""
        return {
            "n": self.space.n,
            "cutoff": self.space.cutoff,
            "basis": [list(map(int, row)) for row in self.space.basis],
            "entries": [[r, c, v] for r, c, v in self.to_coo()],
        }


class ExactOperator:
    """Operator with ExactScalar entries, for zero-tolerance residual checks."""

    def __init__(self, space, q0, entries=None):
        self.space = space
        self.q0 = q0
        self.entries = {}
        if entries:
            for rc, v in entries.items():
                if not v.is_zero():
                    self.entries[rc] = v

    @classmethod
    def zero(cls, space, q0):
        return cls(space, q0)

    @classmethod
    def identity(cls, space, q0):
        one = ExactScalar.rational(q0, 1)
        return cls(space, q0, {(t, t): one for t in range(space.size)})

    @classmethod
    def diagonal_mask(cls, space, q0, mask):
        one = ExactScalar.rational(q0, 1)
        return cls(space, q0, {(t, t): one for t in np.flatnonzero(mask)})

    def adjoint(self):
        return ExactOperator(self.space, self.q0, {(c, r): v for (r, c), v in self.entries.items()})

    def __add__(self, other):
        out = dict(self.entries)
        for rc, v in other.entries.items():
            s = out.get(rc)
            s = v if s is None else s + v
            if s.is_zero():
                out.pop(rc, None)
            else:
                out[rc] = s
        return ExactOperator(self.space, self.q0, out)

    def __neg__(self):
        return ExactOperator(self.space, self.q0, {rc: -v for rc, v in self.entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if isinstance(c, ExactScalar):
            return ExactOperator(self.space, self.q0, {rc: v * c for rc, v in self.entries.items()})
        return ExactOperator(self.space, self.q0, {rc: v * Fraction(c) for rc, v in self.entries.items()})

    def __matmul__(self, other):
        by_row = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        out = {}
        for (r, mid), v1 in self.entries.items():
            for c, v2 in by_row.get(mid, ()):
                prod = v1 * v2
                if prod.is_zero():
                    continue
                s = out.get((r, c))
                s = prod if s is None else s + prod
                if s.is_zero():
                    out.pop((r, c), None)
                else:
                    out[(r, c)] = s
        return ExactOperator(self.space, self.q0, out)

    def is_zero(self):
        return not self.entries

    def is_zero_on_columns(self, column_mask):
        cols = set(np.flatnonzero(column_mask))
        return all(c not in cols for (_, c) in self.entries)

    def trace(self):
        total = ExactScalar(self.q0)
        for (r, c), v in self.entries.items():
            if r == c:
                total = total + v
        return total


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------


def _m_entry(m, i):
    """m_i with the m_0 := 0 convention (m is the stored tuple m_1..m_n)."""
    return 0 if i == 0 else m[i - 1]


def rep_z(n, k, i, space, q0, exact=False):
    """The level-k action of z_i on the truncated space."""
    if space.n != n:
        raise ValueError("space ambient differs from requested n")
    if not 0 <= k <= n or not 0 <= i <= n:
        raise IndexError("need 0 <= k, i <= n")
    make = _ExactBuilder(space, q0) if exact else _FloatBuilder(space, q0)
    if (k >= 1 and i > k) or (k == 0 and i > 0):
        return make.build()
    mask = space.constraint_mask(mconstr(k))
    basis = space.basis
    for col in np.flatnonzero(mask):
        m = basis[col]
        if i == k:
            # diagonal piece; q^{m_k}, and plain membership indicator at k=0
            make.add(col, col, power=_m_entry(m, k), atoms=())
            continue
        d = int(m[i] - _m_entry(m, i) + 1)
        target = m.copy()
        target[i:k] += 1
        if target.max() > space.cutoff:
            continue  # compression: shift leaves the box
        make.add(space.index(target), col, power=_m_entry(m, i), atoms=(d,))
    return make.build()


def rep_letter(n, k, letter, space, q0, exact=False):
    op = rep_z(n, k, letter_index(letter), space, q0, exact=exact)
    return op.adjoint() if letter_is_star(letter) else op


def rep_word(word, n, k, space, q0, exact=False):
    """Composite action of a word, rightmost letter acting first.

    The empty word gives the identity on the whole truncated space.
    """
    if exact:
        acc = ExactOperator.identity(space, q0)
    else:
        acc = SparseOperator.identity(space)
    for letter in word:
        acc = acc @ rep_letter(n, k, letter, space, q0, exact=exact)
    return acc


def rep_element(x, n, k, space, q0, exact=False):
    """Level-k action of an NCElement; the unit acts as the projection onto
    the level-k constraint subspace (the representation is zero outside it)."""
    if not isinstance(x, NCElement):
        raise TypeError("expected an NCElement")
    if x.n != n:
        raise ValueError("element ambient differs from requested n")
    if exact:
        acc = ExactOperator.zero(space, q0)
    else:
        acc = SparseOperator.zero(space)
    unit_proj = None
    for w, c in sorted(x.terms.items()):
        if w == ():
            if unit_proj is None:
                mask = space.constraint_mask(mconstr(k))
                if exact:
                    unit_proj = ExactOperator.diagonal_mask(space, q0, mask)
                else:
                    unit_proj = SparseOperator.diagonal(space, mask.astype(float))
            op = unit_proj
        else:
            op = rep_word(w, n, k, space, q0, exact=exact)
        if exact:
            acc = acc + op.scale(ExactScalar.rational(q0, c(Fraction(q0))))
        else:
            acc = acc + op.scale(c(q0))
    return acc


def rep_p(n, k, i, j, space, q0, exact=False):
    """Direct implementation of the displayed level-k action of p_ij."""
    if not 0 <= i <= j <= n:
        raise IndexError("need 0 <= i <= j <= n (use the adjoint for i > j)")
    if space.n != n:
        raise ValueError("space ambient differs from requested n")
    make = _ExactBuilder(space, q0) if exact else _FloatBuilder(space, q0)
    if j > k:
        return make.build()
    mask = space.constraint_mask(mconstr(k))
    basis = space.basis
    for col in np.flatnonzero(mask):
        m = basis[col]
        if i == j == k:
            make.add(col, col, power=2 * _m_entry(m, k), atoms=())
            continue
        mi, mj = _m_entry(m, i), _m_entry(m, j)
        if j == k:
            atoms = (int(m[i] - mi),)
        else:
            atoms = (int(m[i] - mi + (1 if i == j else 0)), int(m[j] - mj + 1))
        target = m.copy()
        target[i:j] -= 1
        if i < j and target[i:j].min() < 0:
            continue
        make.add(space.index(target), col, power=mi + mj, atoms=atoms)
    return make.build()


class ParityRepresentation:
    """Sum of the level-k representations of one parity (the even sum and the
    odd sum assemble the two halves of the Fredholm modules)."""

    def __init__(self, n, parity, space, q0, exact=False):
        if parity not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")
        self.n = n
        self.parity = parity
        self.space = space
        self.q0 = q0
        self.exact = exact
        self.levels = [k for k in range(n + 1) if (k % 2 == 0) == (parity == "even")]

    def of(self, x):
        if self.exact:
            acc = ExactOperator.zero(self.space, self.q0)
        else:
            acc = SparseOperator.zero(self.space)
        for k in self.levels:
            acc = acc + rep_element(x, self.n, k, self.space, self.q0, exact=self.exact)
        return acc

    def of_word(self, word):
        if self.exact:
            acc = ExactOperator.zero(self.space, self.q0)
        else:
            acc = SparseOperator.zero(self.space)
        for k in self.levels:
            acc = acc + rep_word(word, self.n, k, self.space, self.q0, exact=self.exact)
        return acc


def rep_pm(n, parity, space, q0, exact=False):
    return ParityRepresentation(n, parity, space, q0, exact=exact)


# -- entry builders ----------------------------------------------------------


class _FloatBuilder:
    def __init__(self, space, q0):
        self.space = space
        self.q0 = float(q0)
        self.rows, self.cols, self.vals = [], [], []

    def add(self, row, col, power, atoms):
        v = self.q0**power
        for d in atoms:
            v *= sqrt(1.0 - self.q0 ** (2 * d))
        if v != 0.0:
            self.rows.append(row)
            self.cols.append(col)
            self.vals.append(v)

    def build(self):
        return SparseOperator.from_triples(self.space, self.rows, self.cols, self.vals)


class _ExactBuilder:
    def __init__(self, space, q0):
        self.space = space
        self.q0 = Fraction(q0)
        self.entries = {}

    def add(self, row, col, power, atoms):
        s = ExactScalar.root(self.q0, Fraction(self.q0) ** power, atoms)
        if not s.is_zero():
            self.entries[(row, col)] = s

    def build(self):
        return ExactOperator(self.space, self.q0, self.entries)
