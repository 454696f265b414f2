"""Free *-algebra on z_0..z_n, z_0*..z_n* over LaurentPoly, normalized by the
quantum-sphere commutation relations, plus the projective-space generators
p_ij = z_i* z_j.

Normal-form orientation: unstarred letters before starred letters; unstarred
sorted by ascending index, starred by descending index; a same-index pair
z_i* z_i is reordered toward z_i z_i*, and z_n z_n* is eliminated through the
sphere identity sum(z_i z_i*) = 1.  Words are encoded as tuples of ints
(2*index, or 2*index+1 when starred).
"""

from __future__ import annotations

import re

from .laurent import LaurentPoly, ONE

Word = tuple


class NormalizationBudgetError(RuntimeError):
    """The rewrite cascade exceeded its step budget (orientation bug guard)."""


def gen(index, starred=False):
    """Encode a generator letter."""
    if index < 0:
        raise ValueError("generator index must be nonnegative")
    return 2 * index + (1 if starred else 0)


def letter_index(letter):
    return letter >> 1


def letter_is_star(letter):
    return bool(letter & 1)


def star_letter(letter):
    return letter ^ 1


def star_word(word):
    return tuple(star_letter(l) for l in reversed(word))


def word_str(word):
    if not word:
        return "1"
    return " ".join(f"z{letter_index(l)}{'*' if letter_is_star(l) else ''}" for l in word)


_ALGEBRAS = {}


def algebra(n):
    """The sphere algebra on generators z_0..z_n (cached per n)."""
    if n not in _ALGEBRAS:
        _ALGEBRAS[n] = SphereAlgebra(n)
    return _ALGEBRAS[n]


def clear_caches():
    _ALGEBRAS.clear()


class SphereAlgebra:
    """Rewriting engine and element factory for a fixed ambient n."""

    def __init__(self, n, budget_factor=500):
        if n < 0:
            raise ValueError("ambient n must be nonnegative")
        self.n = n
        self.budget_factor = budget_factor
        self._append_cache = {}
        self._nf_cache = {}
        self._q = LaurentPoly.q_power(1)
        self._one_minus_q2 = ONE - LaurentPoly.q_power(2)

    # -- rewrite system ------------------------------------------------------

    def pair_rewrite(self, l1, l2):
        """Rewrite for the adjacent pair (l1, l2); None if already normal.

        Returns a list of (replacement word, coefficient) whose weighted sum
        equals l1*l2 modulo the sphere relations.
        """
        i, si = letter_index(l1), letter_is_star(l1)
        j, sj = letter_index(l2), letter_is_star(l2)
        n = self.n
        if max(i, j) > n:
            raise ValueError(f"letter index exceeds ambient n={n}")
        if not si and not sj:
            if i > j:  # z_i z_j = q z_j z_i for i > j
                return [((l2, l1), self._q)]
            return None
        if si and sj:
            if i < j:  # starred mirror of the above
                return [((l2, l1), self._q)]
            return None
        if si and not sj:
            if i != j:  # z_i* z_j = q z_j z_i*
                return [((l2, gen(i, True)), self._q)]
            if i == n:  # z_n* z_n = z_n z_n*
                return [((gen(n), gen(n, True)), ONE)]
            # z_i* z_i = z_i z_i* + (1-q^2) sum_{m>i} z_m z_m*
            out = [((gen(i), gen(i, True)), ONE)]
            for m in range(i + 1, n + 1):
                out.append(((gen(m), gen(m, True)), self._one_minus_q2))
            return out
        # unstarred then starred: normal unless both are z_n
        if i == n and j == n:
            # z_n z_n* = 1 - sum_{m<n} z_m z_m*
            out = [((), ONE)]
            for m in range(n):
                out.append(((gen(m), gen(m, True)), -ONE))
            return out
        return None

    def is_normal_word(self, word):
        return all(self.pair_rewrite(a, b) is None for a, b in zip(word, word[1:]))

    def append_letter(self, word, letter):
        """Normal form of (normal word) * letter, as a dict word -> coeff."""
        key = (word, letter)
        cached = self._append_cache.get(key)
        if cached is not None:
            return cached
        out = {}
        budget = 10_000 + self.budget_factor * (len(word) + 2) ** 2 * (self.n + 1)
        steps = 0
        stack = [(word, (letter,), ONE)]
        while stack:
            w, tail, c = stack.pop()
            if not tail:
                prev = out.get(w)
                s = c if prev is None else prev + c
                if s.is_zero():
                    out.pop(w, None)
                else:
                    out[w] = s
                continue
            head, rest = tail[0], tail[1:]
            if not rest and (w, head) != key:
                hit = self._append_cache.get((w, head))
                if hit is not None:
                    for w2, c2 in hit.items():
                        prev = out.get(w2)
                        s = c2 * c if prev is None else prev + c2 * c
                        if s.is_zero():
                            out.pop(w2, None)
                        else:
                            out[w2] = s
                    continue
            if not w:
                stack.append(((head,), rest, c))
                continue
            rw = self.pair_rewrite(w[-1], head)
            if rw is None:
                stack.append((w + (head,), rest, c))
                continue
            steps += 1
            if steps > budget:
                raise NormalizationBudgetError(
                    f"rewrite budget exceeded appending {word_str((letter,))} "
                    f"to a word of length {len(word)} (n={self.n})"
                )
            for repl, rc in rw:
                stack.append((w[:-1], repl + rest, rc * c))
        self._append_cache[key] = out
        return out

    def _element_append(self, terms, letter):
        out = {}
        for w, c in terms.items():
            for w2, c2 in self.append_letter(w, letter).items():
                prev = out.get(w2)
                s = c2 * c if prev is None else prev + c2 * c
                if s.is_zero():
                    out.pop(w2, None)
                else:
                    out[w2] = s
        return out

    def word_normal_form(self, word):
        """Normal form of an arbitrary raw word, as a dict word -> coeff."""
        word = tuple(word)
        cached = self._nf_cache.get(word)
        if cached is not None:
            return cached
        terms = {(): ONE}
        for letter in word:
            terms = self._element_append(terms, letter)
        self._nf_cache[word] = terms
        return terms

    def normalize(self, raw_terms):
        """Normal form of a raw word sum {word: coeff} as an NCElement."""
        acc = {}
        for word, coeff in raw_terms.items():
            coeff = coeff if isinstance(coeff, LaurentPoly) else LaurentPoly.constant(coeff)
            if coeff.is_zero():
                continue
            for w, c in self.word_normal_form(word).items():
                prev = acc.get(w)
                s = c * coeff if prev is None else prev + c * coeff
                if s.is_zero():
                    acc.pop(w, None)
                else:
                    acc[w] = s
        return NCElement(self, acc)

    # -- element factories -----------------------------------------------------

    def zero(self):
        return NCElement(self, {})

    def one(self):
        return NCElement(self, {(): ONE})

    def scalar(self, coeff):
        coeff = coeff if isinstance(coeff, LaurentPoly) else LaurentPoly.constant(coeff)
        return NCElement(self, {} if coeff.is_zero() else {(): coeff})

    def z(self, i, starred=False):
        self._check_index(i)
        return NCElement(self, {(gen(i, starred),): ONE})

    def zstar(self, i):
        return self.z(i, starred=True)

    def from_word(self, word, coeff=ONE):
        return self.normalize({tuple(word): coeff})

    def p(self, i, j):
        """Projective-space generator p_ij = z_i* z_j, in normal form."""
        self._check_index(i)
        self._check_index(j)
        return self.from_word((gen(i, True), gen(j)))

    def _check_index(self, i):
        if not 0 <= i <= self.n:
            raise IndexError(f"generator index {i} outside 0..{self.n}")

    # -- morphism to the lower sphere ------------------------------------------

    def drop_top_generator(self, x):
        """The algebra morphism z_n -> 0 into the (n-1)-sphere algebra."""
        if self.n == 0:
            raise ValueError("no lower algebra below n=0")
        if x.algebra is not self:
            raise ValueError("element belongs to a different algebra")
        target = algebra(self.n - 1)
        top = {gen(self.n), gen(self.n, True)}
        kept = {w: c for w, c in x.terms.items() if not (set(w) & top)}
        return target.normalize(kept)

    # -- defining-relation verification ------------------------------------------

    def sphere_relation_residuals(self):
        """Raw LHS-RHS term dicts for the five sphere relation families.

        Keys are (family letter, indices); values normalize to zero iff the
        rewrite system respects the relations.
        """
        n = self.n
        out = {}
        for i in range(n + 1):
            for j in range(i + 1, n + 1):
                out[("a", (i, j))] = {
                    (gen(i), gen(j)): ONE,
                    (gen(j), gen(i)): -LaurentPoly.q_power(-1),
                }
        for i in range(n + 1):
            for j in range(n + 1):
                if i != j:
                    out[("b", (i, j))] = {
                        (gen(i, True), gen(j)): ONE,
                        (gen(j), gen(i, True)): -LaurentPoly.q_power(1),
                    }
        for i in range(n):
            terms = {
                (gen(i, True), gen(i)): ONE,
                (gen(i), gen(i, True)): -ONE,
            }
            for m in range(i + 1, n + 1):
                terms[(gen(m), gen(m, True))] = -(ONE - LaurentPoly.q_power(2))
            out[("c", (i,))] = terms
        out[("d", (n,))] = {
            (gen(n, True), gen(n)): ONE,
            (gen(n), gen(n, True)): -ONE,
        }
        relation_e = {(gen(i), gen(i, True)): ONE for i in range(n + 1)}
        relation_e[()] = -ONE
        out[("e", ())] = relation_e
        return out

    def cp_relation_residuals(self):
        """Residual elements for the three displayed p_ij relation families."""

        def sign(x):
            return (x > 0) - (x < 0)

        n = self.n
        p = {}
        for i in range(n + 1):
            for j in range(n + 1):
                p[i, j] = self.p(i, j) if i <= j else self.p(j, i).star()
        out = {}
        rng = range(n + 1)
        for i in rng:
            for j in rng:
                for k in rng:
                    for l in rng:
                        if i != l and j != k:
                            lhs = p[i, j] * p[k, l]
                            rhs = (p[k, l] * p[i, j]).scale(
                                LaurentPoly.q_power(sign(k - i) + sign(j - l))
                            )
                            out[(1, (i, j, k, l))] = lhs - rhs
        for i in rng:
            for j in rng:
                for k in rng:
                    if i != k:
                        lhs = p[i, j] * p[j, k]
                        rhs = (p[j, k] * p[i, j]).scale(
                            LaurentPoly.q_power(sign(j - i) + sign(j - k) + 1)
                        )
                        for l in range(j + 1, n + 1):
                            rhs = rhs - (p[i, l] * p[l, k]).scale(ONE - LaurentPoly.q_power(2))
                        out[(2, (i, j, k))] = lhs - rhs
        for i in rng:
            for j in rng:
                if i != j:
                    q2s = LaurentPoly.q_power(2 * sign(j - i))
                    lhs = p[i, j] * p[j, i]
                    rhs = (p[j, i] * p[i, j]).scale(q2s)
                    extra = self.zero()
                    for l in range(i + 1, n + 1):
                        extra = extra + (p[j, l] * p[l, j]).scale(q2s)
                    for l in range(j + 1, n + 1):
                        extra = extra - p[i, l] * p[l, i]
                    rhs = rhs + extra.scale(ONE - LaurentPoly.q_power(2))
                    out[(3, (i, j))] = lhs - rhs
        return out

    def verify_cp_relations(self, sample_budget=None):
        """Check all three p_ij relation families; returns a RelationReport."""
        residuals = self.cp_relation_residuals()
        keys = sorted(residuals)
        if sample_budget is not None and len(keys) > sample_budget:
            stride = len(keys) / sample_budget
            keys = [keys[int(t * stride)] for t in range(sample_budget)]
        violations = [k for k in keys if not residuals[k].is_zero()]
        return RelationReport(n=self.n, checked=len(keys), violations=violations)

    def verify_sphere_relations(self):
        residuals = self.sphere_relation_residuals()
        violations = [k for k in sorted(residuals) if not self.normalize(residuals[k]).is_zero()]
        return RelationReport(n=self.n, checked=len(residuals), violations=violations)


class RelationReport:
    def __init__(self, n, checked, violations):
        self.n = n
        self.checked = checked
        self.violations = violations

    @property
    def ok(self):
        return not self.violations

    def __repr__(self):
        return f"RelationReport(n={self.n}, checked={self.checked}, violations={len(self.violations)})"


class NCElement:
    """A finite sum of normal-form words with LaurentPoly coefficients."""

    __slots__ = ("algebra", "terms", "_hash")

    def __init__(self, alg, terms):
        self.algebra = alg
        self.terms = terms
        self._hash = None

    # -- queries ----------------------------------------------------------------

    @property
    def n(self):
        return self.algebra.n

    def is_zero(self):
        return not self.terms

    def is_one(self):
        return self.terms == {(): ONE} or (
            len(self.terms) == 1 and self.terms.get((), None) == ONE
        )

    def coeff(self, word):
        return self.terms.get(tuple(word), LaurentPoly.zero())

    def word_count(self):
        return len(self.terms)

    # -- arithmetic ----------------------------------------------------------------

    def _check_same(self, other):
        if not isinstance(other, NCElement):
            raise TypeError("expected an NCElement")
        if other.algebra is not self.algebra:
            raise ValueError("ambient n mismatch between elements")

    def __add__(self, other):
        self._check_same(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            prev = out.get(w)
            s = c if prev is None else prev + c
            if s.is_zero():
                out.pop(w, None)
            else:
                out[w] = s
        return NCElement(self.algebra, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return NCElement(self.algebra, {w: -c for w, c in self.terms.items()})

    def scale(self, coeff):
        coeff = coeff if isinstance(coeff, LaurentPoly) else LaurentPoly.constant(coeff)
        if coeff.is_zero():
            return self.algebra.zero()
        return NCElement(self.algebra, {w: c * coeff for w, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, LaurentPoly)):
            return self.scale(other)
        self._check_same(other)
        alg = self.algebra
        acc = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                c12 = c1 * c2
                terms = {w1: ONE}
                for letter in w2:
                    terms = alg._element_append(terms, letter)
                for w, c in terms.items():
                    prev = acc.get(w)
                    s = c * c12 if prev is None else prev + c * c12
                    if s.is_zero():
                        acc.pop(w, None)
                    else:
                        acc[w] = s
        return NCElement(alg, acc)

    def __rmul__(self, other):
        if isinstance(other, (int, LaurentPoly)):
            return self.scale(other)
        return NotImplemented

    def star(self):
        """The involution: reverses words and stars letters; coefficients are real."""
        return NCElement(self.algebra, {star_word(w): c for w, c in self.terms.items()})

    # -- comparison ----------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, int):
            return self.terms == ({} if other == 0 else {(): LaurentPoly.constant(other)})
        if not isinstance(other, NCElement):
            return NotImplemented
        return self.algebra is other.algebra and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.algebra.n, frozenset(self.terms.items())))
        return self._hash

    # -- text form ----------------------------------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            c = self.terms[w]
            sign, body = _term_text(c, w)
            parts.append((sign, body))
        text = ("- " if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"NCElement(n={self.n}, {self})"


def _term_text(coeff, word):
    """Render one term; returns (sign, body) with sign in '+'/'-'."""
    wtxt = word_str(word)
    if len(coeff) == 1:
        ((e, c),) = coeff.coeffs.items()
        sign = "-" if c < 0 else "+"
        mono = LaurentPoly.q_power(e, abs(c))
        if mono.is_one():
            return sign, wtxt
        if not word:
            return sign, str(mono)
        return sign, f"{mono} {wtxt}"
    if not word:
        return "+", f"({coeff})"
    return "+", f"({coeff}) {wtxt}"


_Z_RE = re.compile(r"^z(\d+)(\*)?$")


def parse_element(text, n):
    """Parse the element grammar, e.g. 'z0 z1* + (q^2 - 1) z2 z2*'."""
    alg = algebra(n)
    text = text.strip()
    if text in ("", "0"):
        return alg.zero()
    tokens = re.findall(r"\(|\)|[^\s()]+", text)
    raw = {}
    pos = 0
    sign = 1
    while pos < len(tokens):
        coeff = ONE
        # optional parenthesized or bare Laurent coefficient
        if tokens[pos] == "(":
            depth_end = tokens.index(")", pos)
            coeff = LaurentPoly.parse(" ".join(tokens[pos + 1 : depth_end]))
            pos = depth_end + 1
        else:
            bare = []
            while pos < len(tokens) and not _Z_RE.match(tokens[pos]) and tokens[pos] not in "+-()":
                bare.append(tokens[pos])
                pos += 1
            if bare:
                coeff = LaurentPoly.parse(" ".join(bare))
        word = []
        while pos < len(tokens):
            m = _Z_RE.match(tokens[pos])
            if not m:
                break
            word.append(gen(int(m.group(1)), m.group(2) == "*"))
            pos += 1
        w = tuple(word)
        c = coeff if sign > 0 else -coeff
        raw[w] = raw.get(w, LaurentPoly.zero()) + c
        if pos == len(tokens):
            break
        if tokens[pos] == "+":
            sign = 1
        elif tokens[pos] == "-":
            sign = -1
        else:
            raise ValueError(f"unexpected token {tokens[pos]!r} in element text")
        pos += 1
    return alg.normalize(raw)
