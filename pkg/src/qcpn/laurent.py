"""Exact Laurent polynomials in the deformation parameter q, over the rationals.

All symbolic identities in the package are verified over this ring with zero
tolerance, so coefficients are kept as exact integers/Fractions throughout.
"""

from __future__ import annotations

import re
from fractions import Fraction


class ExactDivisionError(ArithmeticError):
    """Raised when a division that must be exact leaves a remainder."""


def _as_rational(c):
    if isinstance(c, (int, Fraction)):
        return c
    raise TypeError(f"coefficient must be rational, got {type(c).__name__}")


class LaurentPoly:
    """A finitely supported map exponent -> rational coefficient.

    Instances are immutable; all operations return new objects.  Terms with
    zero coefficient are never stored.
    """

    __slots__ = ("_coeffs", "_hash")

    def __init__(self, coeffs=None):
        cleaned = {}
        if coeffs:
            for e, c in coeffs.items():
                c = _as_rational(c)
                if c != 0:
                    cleaned[int(e)] = c
        self._coeffs = cleaned
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def one(cls):
        return cls({0: 1})

    @classmethod
    def constant(cls, c):
        return cls({0: c})

    @classmethod
    def q_power(cls, e, c=1):
        """c * q^e as a LaurentPoly."""
        return cls({e: c})

    # -- basic queries -----------------------------------------------------

    @property
    def coeffs(self):
        return dict(self._coeffs)

    def is_zero(self):
        return not self._coeffs

    def is_one(self):
        return self._coeffs == {0: 1}

    def __bool__(self):
        return bool(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    def coeff(self, e):
        return self._coeffs.get(e, 0)

    def degree(self):
        if not self._coeffs:
            raise ValueError("zero polynomial has no degree")
        return max(self._coeffs)

    def valuation(self):
        if not self._coeffs:
            raise ValueError("zero polynomial has no valuation")
        return min(self._coeffs)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._coeffs)
        for e, c in other._coeffs.items():
            s = out.get(e, 0) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return LaurentPoly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly._raw({e: -c for e, c in self._coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = {}
        for e1, c1 in self._coeffs.items():
            for e2, c2 in other._coeffs.items():
                e = e1 + e2
                s = out.get(e, 0) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return LaurentPoly._raw(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        result = LaurentPoly.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def shift(self, e):
        """Multiply by q^e."""
        return LaurentPoly._raw({k + e: c for k, c in self._coeffs.items()})

    def substitute_q_inverse(self):
        """The image under q -> q^{-1} (negate every exponent)."""
        return LaurentPoly._raw({-e: c for e, c in self._coeffs.items()})

    def divexact(self, other):
        """Exact division; raises ExactDivisionError on a nonzero remainder."""
        other = self._coerce(other)
        if other is NotImplemented or other.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        if self.is_zero():
            return LaurentPoly.zero()
        # Shift both to ordinary polynomials and long-divide.
        sv, ov = self.valuation(), other.valuation()
        num = {e - sv: c for e, c in self._coeffs.items()}
        den = {e - ov: c for e, c in other._coeffs.items()}
        dd = max(den)
        lead = den[dd]
        quo = {}
        while num:
            nd = max(num)
            if nd < dd:
                raise ExactDivisionError(f"{self} is not divisible by {other}")
            qc = Fraction(num[nd], 1) / lead
            if qc.denominator == 1:
                qc = int(qc)
            quo[nd - dd] = qc
            for e, c in den.items():
                ne = nd - dd + e
                s = num.get(ne, 0) - qc * c
                if s == 0:
                    num.pop(ne, None)
                else:
                    num[ne] = s
        return LaurentPoly._raw({e + sv - ov: c for e, c in quo.items()})

    # -- evaluation --------------------------------------------------------

    def __call__(self, q0):
        """Evaluate at q = q0; exact for rational q0, float otherwise."""
        if q0 == 0:
            raise ZeroDivisionError("cannot evaluate at q = 0 (negative exponents)")
        if isinstance(q0, (int, Fraction)):
            q0 = Fraction(q0)
            total = Fraction(0)
            for e, c in self._coeffs.items():
                total += c * q0**e
            return total
        total = 0.0
        for e in sorted(self._coeffs):
            total += float(self._coeffs[e]) * float(q0) ** e
        return total

    # -- comparison / hashing ----------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.constant(other)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(sorted((e, Fraction(c)) for e, c in self._coeffs.items())))
        return self._hash

    # -- text form -----------------------------------------------------------

    def __str__(self):
        """Canonical rendering, terms by descending exponent: 'q^2 + 1 + q^-2'."""
        if not self._coeffs:
            return "0"
        parts = []
        for e in sorted(self._coeffs, reverse=True):
            c = self._coeffs[e]
            sign = "-" if c < 0 else "+"
            c = abs(c)
            if e == 0:
                body = str(c)
            else:
                var = "q" if e == 1 else f"q^{e}"
                body = var if c == 1 else f"{c} {var}"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"LaurentPoly({self})"

    _TERM_RE = re.compile(
        r"^\s*(?P<coeff>-?\d+(?:/\d+)?)?\s*\*?\s*(?P<q>q(?:\^(?P<exp>-?\d+))?)?\s*$"
    )

    @classmethod
    def parse(cls, text):
        """Parse the canonical rendering back into a LaurentPoly."""
        text = text.strip()
        if text in ("0", ""):
            return cls.zero()
        # Terms are separated by ' + ' / ' - '; a leading '-' negates the first.
        pieces = re.split(r"\s+([+-])\s+", text)
        signed = []
        sign = 1
        first = pieces[0]
        if first.startswith("-"):
            sign, first = -1, first[1:]
        signed.append((sign, first))
        for op, term in zip(pieces[1::2], pieces[2::2]):
            signed.append((1 if op == "+" else -1, term))
        out = cls.zero()
        for sign, term in signed:
            m = cls._TERM_RE.match(term)
            if not m or (m.group("coeff") is None and m.group("q") is None):
                raise ValueError(f"cannot parse Laurent term {term!r}")
            raw = m.group("coeff")
            if raw in (None, ""):
                c = 1
            else:
                c = Fraction(raw)
                if c.denominator == 1:
                    c = int(c)
            e = 0
            if m.group("q"):
                e = int(m.group("exp")) if m.group("exp") is not None else 1
            out = out + cls.q_power(e, sign * c)
        return out

    # -- internal ------------------------------------------------------------

    @staticmethod
    def _raw(coeffs):
        p = LaurentPoly.__new__(LaurentPoly)
        p._coeffs = coeffs
        p._hash = None
        return p

    @staticmethod
    def _coerce(other):
        if isinstance(other, LaurentPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return LaurentPoly.constant(other)
        return NotImplemented


ZERO = LaurentPoly.zero()
ONE = LaurentPoly.one()
Q = LaurentPoly.q_power(1)
QINV = LaurentPoly.q_power(-1)


def qint(n):
    """The symmetric q-integer (q^n - q^-n)/(q - q^-1); exact division."""
    if n < 0:
        raise ValueError("q-integers only defined here for n >= 0")
    if n == 0:
        return LaurentPoly.zero()
    num = LaurentPoly.q_power(n) - LaurentPoly.q_power(-n)
    return num.divexact(Q - QINV)


def qfact(n):
    """q-factorial [n][n-1]...[1], with the empty product equal to 1."""
    if n < 0:
        raise ValueError("q-factorial only defined for n >= 0")
    out = LaurentPoly.one()
    for k in range(1, n + 1):
        out = out * qint(k)
    return out


def qmultinomial(js):
    """q-multinomial [j_0+...+j_n]! / ([j_0]! ... [j_n]!), always exact."""
    js = list(js)
    if any(j < 0 for j in js):
        raise ValueError("q-multinomial arguments must be nonnegative")
    out = qfact(sum(js))
    for j in js:
        out = out.divexact(qfact(j))
    return out
