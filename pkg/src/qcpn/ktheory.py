"""Isometry vectors of q-multinomial-weighted monomials, the projections they
generate, and zero-tolerance verification of the projector identities.

Coefficients of the components carry square roots of q-multinomials and
half-integer powers of q.  Those never materialize numerically: a scaled
element keeps (radical atoms, residual half power of q) beside a plain
NCElement, and products cancel paired atoms into exact Laurent factors.
"""

from __future__ import annotations

import json
from itertools import combinations
from math import comb, sqrt

from .algebra import algebra, gen, star_word
from .laurent import LaurentPoly, ONE, qmultinomial


class RootCombineError(ArithmeticError):
    """Two scaled elements with incompatible radical parts were added."""


def _atom_key(p):
    return tuple(sorted(p.coeffs.items()))


class ScaledElement:
    """pref * element, with pref = q^(half/2) * sqrt(prod atoms).

    Canonical form: `half` is 0 or 1 (whole powers of q are folded into the
    element), unit atoms are dropped, and paired atoms are multiplied out.
    """

    __slots__ = ("atoms", "half", "elem")

    def __init__(self, atoms, half, elem, extra=None):
        merged = sorted((a for a in atoms if not a.is_one()), key=_atom_key)
        kept = []
        folded = ONE if extra is None else extra
        i = 0
        while i < len(merged):
            if i + 1 < len(merged) and merged[i] == merged[i + 1]:
                folded = folded * merged[i]
                i += 2
            else:
                kept.append(merged[i])
                i += 1
        whole, rem = divmod(half, 2)
        if whole:
            folded = folded * LaurentPoly.q_power(whole)
        if not folded.is_one():
            elem = elem.scale(folded)
        if elem.is_zero():
            kept, rem = [], 0
        self.atoms = tuple(kept)
        self.half = rem
        self.elem = elem

    @classmethod
    def wrap(cls, elem):
        return cls((), 0, elem)

    @classmethod
    def one(cls, n):
        return cls((), 0, algebra(n).one())

    def is_zero(self):
        return self.elem.is_zero()

    def __mul__(self, other):
        if not isinstance(other, ScaledElement):
            raise TypeError("expected a ScaledElement")
        return ScaledElement(
            self.atoms + other.atoms, self.half + other.half, self.elem * other.elem
        )

    def __add__(self, other):
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.atoms != other.atoms or self.half != other.half:
            raise RootCombineError("cannot add scaled elements with different radical parts")
        return ScaledElement(self.atoms, self.half, self.elem + other.elem)

    def __sub__(self, other):
        return self + other.scale(-ONE)

    def scale(self, coeff):
        return ScaledElement(self.atoms, self.half, self.elem.scale(coeff))

    def star(self):
        return ScaledElement(self.atoms, self.half, self.elem.star())

    def __eq__(self, other):
        if not isinstance(other, ScaledElement):
            return NotImplemented
        return self.atoms == other.atoms and self.half == other.half and self.elem == other.elem

    def __hash__(self):
        return hash((self.atoms, self.half, self.elem))

    def prefactor_float(self, q0):
        v = float(q0) ** (self.half / 2.0)
        for a in self.atoms:
            v *= sqrt(a(float(q0)))
        return v

    def word_count(self):
        return self.elem.word_count()

    def as_element(self):
        """The underlying NCElement when the radical part is trivial."""
        if self.atoms or self.half:
            raise RootCombineError("scaled element has a nontrivial radical part")
        return self.elem

    def __repr__(self):
        roots = " ".join(f"sqrt({a})" for a in self.atoms)
        head = f"q^{self.half}/2 " if self.half else ""
        return f"ScaledElement({head}{roots} * {self.elem})"


def _degrees(N, n):
    """Multi-degrees (j_0..j_n) with total N, descending lexicographic order,
    so the degree concentrated on z_0 comes first."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for j in range(remaining, -1, -1):
            rec(prefix + (j,), remaining - j, slots - 1)

    rec((), N, n + 1)
    return out


def _cross_sum(j):
    return sum(a * b for a, b in combinations(j, 2))


class IsometryVector:
    """Column vector of algebra elements with Psi^dag Psi = 1."""

    def __init__(self, N, n, components):
        self.N = N
        self.n = n
        self.components = components  # list of (degree tuple, ScaledElement)

    def __len__(self):
        return len(self.components)

    def isometry_sum(self):
        """Psi^dag Psi as a ScaledElement (should be the unit)."""
        acc = None
        for _, c in self.components:
            term = c.star() * c
            acc = term if acc is None else acc + term
        return acc

    def check_isometry(self):
        return self.isometry_sum() == ScaledElement.one(self.n)


def psi(N, n):
    """Isometry vector of degree N >= 1 (components are starred monomials)."""
    if N < 1:
        raise ValueError("psi needs N >= 1 (use psi_neg or degree 0)")
    alg = algebra(n)
    comps = []
    for j in _degrees(N, n):
        word = tuple(gen(r, True) for r in range(n + 1) for _ in range(j[r]))
        elem = alg.from_word(word)
        comps.append((j, ScaledElement((qmultinomial(j),), -_cross_sum(j), elem)))
    return IsometryVector(N, n, comps)


def psi_neg(N, n):
    """Isometry vector of degree -N (plain monomials with shifted q-weights)."""
    if N < 1:
        raise ValueError("psi_neg needs N >= 1")
    alg = algebra(n)
    comps = []
    for j in _degrees(N, n):
        word = tuple(gen(r) for r in range(n + 1) for _ in range(j[r]))
        elem = alg.from_word(word)
        half = _cross_sum(j) + 2 * sum(r * j[r] for r in range(n + 1))
        comps.append((j, ScaledElement((qmultinomial(j),), half, elem)))
    return IsometryVector(-N, n, comps)


def isometry_vector(N, n):
    """Degree-N isometry vector for any sign; degree 0 is the unit vector."""
    if N > 0:
        return psi(N, n)
    if N < 0:
        return psi_neg(-N, n)
    return IsometryVector(0, n, [((0,) * (n + 1), ScaledElement.one(n))])


class ProjectionMatrix:
    """Square matrix of scaled elements, P = Psi Psi^dag."""

    def __init__(self, vector):
        self.vector = vector
        self.N = vector.N
        self.n = vector.n
        comps = [c for _, c in vector.components]
        self.size = len(comps)
        self.entries = [[ca * cb.star() for cb in comps] for ca in comps]

    def entry(self, a, b):
        return self.entries[a][b]

    def to_json(self):
        payload = {
            "N": self.N,
            "n": self.n,
            "size": self.size,
            "entries": [
                [
                    {
                        "radical_atoms": [str(a) for a in e.atoms],
                        "half_power": e.half,
                        "element": str(e.elem),
                    }
                    for e in row
                ]
                for row in self.entries
            ],
        }
        return json.dumps(payload, sort_keys=True)


def projection(N, n):
    """The projection P_N (N may be negative; P_0 is the 1x1 unit)."""
    return ProjectionMatrix(isometry_vector(N, n))


class ProjectionReport:
    def __init__(self, N, n, size, isometry_ok, selfadjoint_residuals, idempotent_residuals,
                 residual_words, route):
        self.N = N
        self.n = n
        self.size = size
        self.isometry_ok = isometry_ok
        self.selfadjoint_residuals = selfadjoint_residuals
        self.idempotent_residuals = idempotent_residuals
        self.residual_words = residual_words
        self.route = route

    @property
    def ok(self):
        return self.isometry_ok and not self.selfadjoint_residuals and not self.idempotent_residuals

    def __repr__(self):
        return (
            f"ProjectionReport(N={self.N}, n={self.n}, size={self.size}, ok={self.ok}, "
            f"selfadjoint_residuals={self.selfadjoint_residuals}, "
            f"idempotent_residuals={self.idempotent_residuals}, route={self.route!r})"
        )


# Above this size the entrywise square is evaluated through the isometry sum
# (associativity regrouping); below it both routes run and must agree.
DIRECT_SQUARE_LIMIT = 6


def verify_projection(P, direct_limit=DIRECT_SQUARE_LIMIT):
    """Check P* = P and P^2 = P entrywise, plus the isometry identity."""
    size = P.size
    isometry_ok = P.vector.check_isometry()
    selfadjoint = 0
    residual_words = 0
    for a in range(size):
        for b in range(a, size):
            diff = P.entry(a, b).star() - P.entry(b, a)
            if not diff.is_zero():
                selfadjoint += 1
                residual_words += diff.word_count()

    comps = [c for _, c in P.vector.components]
    unit_gaps = P.vector.isometry_sum()
    idempotent = 0
    run_direct = size <= direct_limit
    route = "direct+grouped" if run_direct else "grouped"
    for a in range(size):
        left = [comps[a] * unit_gaps]  # psi_a * (Psi^dag Psi), summed once
        for c in range(size):
            grouped = left[0] * comps[c].star()
            diff = grouped - P.entry(a, c)
            bad = not diff.is_zero()
            if run_direct:
                acc = None
                for b in range(size):
                    term = P.entry(a, b) * P.entry(b, c)
                    acc = term if acc is None else acc + term
                direct_diff = acc - P.entry(a, c)
                bad = bad or not direct_diff.is_zero()
                if not direct_diff.is_zero():
                    residual_words += direct_diff.word_count()
            if bad:
                idempotent += 1
                residual_words += diff.word_count()
    return ProjectionReport(
        P.N, P.n, size, isometry_ok, selfadjoint, idempotent, residual_words, route
    )


def qtrace(P):
    """The weighted trace sum q^{2a} P_aa as a plain NCElement."""
    acc = None
    for a in range(P.size):
        term = P.entry(a, a).scale(LaurentPoly.q_power(2 * a))
        acc = term if acc is None else acc + term
    return acc.as_element()


def component_count(N, n):
    return comb(abs(N) + n, n)
