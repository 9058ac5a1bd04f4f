"""Exact multivariate integer polynomials for Diophantine decision problems.

Polynomials are held in a canonical merged form over an ordered tuple of
unknowns.  All coefficient arithmetic uses Python's arbitrary-precision
integers; nothing in this module ever touches floating point, so evaluating
a polynomial at a lattice point is exact no matter how large the values get.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "DiophantinePolynomial",
    "MultiIndex",
    "ParseError",
    "SearchResult",
    "brute_force_search",
    "evaluate",
    "parse",
]

# A lattice point (n_1, ..., n_K) of nonnegative occupation numbers.
MultiIndex = tuple[int, ...]

_Term = tuple[int, tuple[int, ...]]


class ParseError(ValueError):
    """Syntax or validity error in a polynomial expression."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def _order_key(exponents: tuple[int, ...]) -> tuple:
    # Graded lexicographic, descending: higher total degree first, then
    # lexicographically larger exponent vector first.
    return (-sum(exponents), tuple(-e for e in exponents))


@dataclass(frozen=True)
class DiophantinePolynomial:
    """A polynomial with integer coefficients over an ordered set of unknowns.

    ``terms`` is the canonical representation: coefficients merged per
    exponent vector, zero coefficients dropped, and terms sorted in graded
    lexicographic order (largest first).  Use :meth:`from_terms` rather than
    the raw constructor unless the input is already canonical.
    """

    unknowns: tuple[str, ...]
    terms: tuple[_Term, ...]

    def __post_init__(self):
        k = len(self.unknowns)
        if len(set(self.unknowns)) != k:
            raise ValueError("duplicate unknown names")
        seen = set()
        previous_key = None
        for coefficient, exponents in self.terms:
            if not isinstance(coefficient, int) or coefficient == 0:
                raise ValueError(f"non-canonical coefficient {coefficient!r}")
            if len(exponents) != k:
                raise ValueError(
                    f"exponent vector {exponents!r} does not match {k} unknowns"
                )
            if any(e < 0 or not isinstance(e, int) for e in exponents):
                raise ValueError(f"invalid exponent vector {exponents!r}")
            if exponents in seen:
                raise ValueError(f"unmerged duplicate term {exponents!r}")
            seen.add(exponents)
            key = _order_key(exponents)
            if previous_key is not None and key <= previous_key:
                raise ValueError("terms are not in canonical order")
            previous_key = key

    @classmethod
    def from_terms(
        cls, unknowns: Sequence[str], terms: Iterable[tuple[int, Sequence[int]]]
    ) -> DiophantinePolynomial:
        """Build a polynomial, merging duplicates and dropping zero terms."""
        unknowns = tuple(unknowns)
        merged: dict[tuple[int, ...], int] = {}
        for coefficient, exponents in terms:
            exponents = tuple(int(e) for e in exponents)
            merged[exponents] = merged.get(exponents, 0) + int(coefficient)
        canonical = tuple(
            (c, e)
            for e, c in sorted(merged.items(), key=lambda item: _order_key(item[0]))
            if c != 0
        )
        return cls(unknowns, canonical)

    # -- basic queries ---------------------------------------------------

    @property
    def num_unknowns(self) -> int:
        return len(self.unknowns)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def total_degree(self) -> int:
        """Degree of the polynomial; zero polynomial reports 0."""
        return max((sum(e) for _, e in self.terms), default=0)

    def evaluate(self, point: Sequence[int]) -> int:
        """Exact value at a lattice point, as a Python integer."""
        point = tuple(point)
        if len(point) != self.num_unknowns:
            raise ValueError(
                f"point has {len(point)} coordinates, expected {self.num_unknowns}"
            )
        total = 0
        for coefficient, exponents in self.terms:
            value = coefficient
            for x, e in zip(point, exponents):
                if e:
                    value *= x**e
            total += value
        return total

    # -- ring operations -------------------------------------------------

    def _coerce(self, other) -> DiophantinePolynomial:
        if isinstance(other, int):
            return DiophantinePolynomial.from_terms(
                self.unknowns, [(other, (0,) * self.num_unknowns)]
            )
        if isinstance(other, DiophantinePolynomial):
            if other.unknowns != self.unknowns:
                raise ValueError(
                    f"unknown mismatch: {self.unknowns} vs {other.unknowns}"
                )
            return other
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return DiophantinePolynomial.from_terms(
            self.unknowns, list(self.terms) + list(other.terms)
        )

    __radd__ = __add__

    def __neg__(self):
        return DiophantinePolynomial.from_terms(
            self.unknowns, [(-c, e) for c, e in self.terms]
        )

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
        products = []
        for c1, e1 in self.terms:
            for c2, e2 in other.terms:
                products.append((c1 * c2, tuple(a + b for a, b in zip(e1, e2))))
        return DiophantinePolynomial.from_terms(self.unknowns, products)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError(f"polynomial power must be a nonnegative int, got {exponent!r}")
        result = DiophantinePolynomial.from_terms(
            self.unknowns, [(1, (0,) * self.num_unknowns)]
        )
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # -- printing --------------------------------------------------------

    def _format_monomial(self, coefficient: int, exponents: tuple[int, ...]) -> str:
        magnitude = abs(coefficient)
        factors = []
        if magnitude != 1 or not any(exponents):
            factors.append(str(magnitude))
        for name, e in zip(self.unknowns, exponents):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        return "*".join(factors)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for i, (coefficient, exponents) in enumerate(self.terms):
            body = self._format_monomial(coefficient, exponents)
            if i == 0:
                pieces.append(f"-{body}" if coefficient < 0 else body)
            else:
                sign = "-" if coefficient < 0 else "+"
                pieces.append(f"{sign} {body}")
        return " ".join(pieces)


def evaluate(polynomial: DiophantinePolynomial, point: Sequence[int]) -> int:
    """Exact integer value of ``polynomial`` at ``point``."""
    return polynomial.evaluate(point)


# -- parsing -------------------------------------------------------------

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_BODY = _NAME_START | set("0123456789")
_OPERATORS = set("+-*^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        start = i
        if c.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == ".":
                raise ParseError("non-integer literal", i)
            tokens.append(("int", text[start:i], start))
        elif c in _NAME_START:
            while i < n and text[i] in _NAME_BODY:
                i += 1
            tokens.append(("name", text[start:i], start))
        elif c in _OPERATORS:
            tokens.append(("op", c, start))
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    """Recursive descent over the token list.

    Precedence, loosest to tightest: binary + and -, then *, then unary
    minus, then ^.  Exponents must be nonnegative integer literals and
    multiplication is always explicit.
    """

    def __init__(self, tokens: list[tuple[str, str, int]], unknowns: tuple[str, ...]):
        self.tokens = tokens
        self.pos = 0
        self.unknowns = unknowns
        self.index = {name: i for i, name in enumerate(unknowns)}

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def constant(self, value: int) -> DiophantinePolynomial:
        return DiophantinePolynomial.from_terms(
            self.unknowns, [(value, (0,) * len(self.unknowns))]
        )

    def variable(self, name: str) -> DiophantinePolynomial:
        exponents = [0] * len(self.unknowns)
        exponents[self.index[name]] = 1
        return DiophantinePolynomial.from_terms(self.unknowns, [(1, exponents)])

    def expression(self) -> DiophantinePolynomial:
        result = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                result = result + rhs if value == "+" else result - rhs
            else:
                return result

    def term(self) -> DiophantinePolynomial:
        result = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "*":
                self.advance()
                result = result * self.factor()
            else:
                return result

    def factor(self) -> DiophantinePolynomial:
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.advance()
            inner = self.factor()
            return inner if value == "+" else -inner

        return self.power()

    def power(self) -> DiophantinePolynomial:
        base = self.atom()
        kind, value, position = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            ekind, etext, eposition = self.peek()
            if ekind != "int":
                raise ParseError("exponent negative or non-literal", eposition)
            self.advance()
            return base ** int(etext)
        return base

    def atom(self) -> DiophantinePolynomial:
        kind, value, position = self.advance()
        if kind == "int":
            return self.constant(int(value))
        if kind == "name":
            return self.variable(value)
        if kind == "op" and value == "(":
            inner = self.expression()
            kind, value, position = self.advance()
            if kind != "op" or value != ")":
                raise ParseError("expected ')'", position)
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", position)
        raise ParseError(f"unexpected {value!r}", position)


def parse(text: str) -> DiophantinePolynomial:
    """Parse an integer polynomial expression.

    The grammar accepts ``+``, ``-``, ``*``, ``^`` and parentheses, with
    integer literals of any size.  Multiplication is never implicit, unary
    minus binds tighter than binary plus/minus but looser than ``^``, and
    exponents must be nonnegative integer literals.  Unknowns are ordered by
    first appearance in the text; an unknown that cancels out of every term
    still counts.  Expressions containing no unknowns at all parse to a
    constant polynomial with an empty unknown tuple.

    Example::

        >>> print(parse("x*y + x + 4*y - 11"))
        x*y + x + 4*y - 11
    """
    tokens = _tokenize(text)
    if tokens[0][0] == "end":
        raise ParseError("empty input", 0)
    seen: dict[str, None] = {}
    for kind, value, _ in tokens:
        if kind == "name":
            seen.setdefault(value)
    parser = _Parser(tokens, tuple(seen))
    result = parser.expression()
    kind, value, position = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected {value!r}", position)
    return result


# -- exhaustive search ---------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    """Outcome of scanning a box of lattice points.

    ``zeros`` are the exact solutions found; ``min_square``/``argmin`` track
    the minimum of the squared polynomial over the whole box, and the
    ``*_nonzero`` pair restricts that minimum to points where the polynomial
    does not vanish (useful for locating the lowest nonzero level).
    """

    zeros: tuple[MultiIndex, ...]
    min_square: int
    argmin: tuple[MultiIndex, ...]
    min_nonzero_square: int | None
    argmin_nonzero: tuple[MultiIndex, ...]


def brute_force_search(
    polynomial: DiophantinePolynomial,
    box: Sequence[int],
    max_points: int = 1_000_000,
) -> SearchResult:
    """Scan all points with 0 <= n_i <= box[i] and classify them exactly.

    Raises ValueError if the box contains more than ``max_points`` points.
    """
    box = tuple(int(b) for b in box)
    if len(box) != polynomial.num_unknowns:
        raise ValueError(
            f"box has {len(box)} bounds, expected {polynomial.num_unknowns}"
        )
    if any(b < 0 for b in box):
        raise ValueError("box bounds must be nonnegative")
    total = 1
    for b in box:
        total *= b + 1
    if total > max_points:
        raise ValueError(f"box holds {total} points, above the cap {max_points}")

    zeros: list[MultiIndex] = []
    min_square: int | None = None
    argmin: list[MultiIndex] = []
    min_nonzero: int | None = None
    argmin_nonzero: list[MultiIndex] = []
    for point in itertools.product(*(range(b + 1) for b in box)):
        value = polynomial.evaluate(point)
        square = value * value
        if square == 0:
            zeros.append(point)
        if min_square is None or square < min_square:
            min_square = square
            argmin = [point]
        elif square == min_square:
            argmin.append(point)
        if square != 0:
            if min_nonzero is None or square < min_nonzero:
                min_nonzero = square
                argmin_nonzero = [point]
            elif square == min_nonzero:
                argmin_nonzero.append(point)
    assert min_square is not None
    return SearchResult(
        zeros=tuple(zeros),
        min_square=min_square,
        argmin=tuple(argmin),
        min_nonzero_square=min_nonzero,
        argmin_nonzero=tuple(argmin_nonzero),
    )
