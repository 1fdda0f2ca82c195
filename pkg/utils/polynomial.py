"""Sparse multivariate polynomials and truncated power series.

Coefficients are Fractions whenever the inputs are exact; floats are accepted
for series expanded at floating base points. Exponents are tuples of
nonnegative ints, one entry per variable.
"""

import logging
import re
from collections import defaultdict
from fractions import Fraction
from math import factorial
import numbers
from numbers import Number
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionMismatch, NegativeExponent, PolySyntaxError

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
Coeff = Union[Fraction, float]

MAX_SERIES_DEGREE = 8


def _coerce(c) -> Coeff:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, numbers.Integral):
        return Fraction(int(c))
    if isinstance(c, float):
        return c
    if isinstance(c, Number):
        return float(c)
    raise TypeError(f"Unsupported coefficient type: {type(c).__name__}")


class SparsePoly:
    """Polynomial in ``nvars`` variables stored as {exponent: coefficient}."""

    __slots__ = ('nvars', '_terms')

    def __init__(self, nvars: int, terms: Optional[Mapping[Sequence[int], Coeff]] = None):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        self.nvars = nvars
        clean: Dict[Exponent, Coeff] = {}
        for gamma, c in (terms or {}).items():
            gamma = tuple(int(g) for g in gamma)
            if len(gamma) != nvars:
                raise DimensionMismatch(f"Exponent {gamma} does not have {nvars} entries")
            if any(g < 0 for g in gamma):
                raise NegativeExponent("Negative exponent in term", 0)
            c = _coerce(c)
            if c != 0:
                clean[gamma] = clean.get(gamma, 0) + c
                if clean[gamma] == 0:
                    del clean[gamma]
        self._terms = clean

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, c) -> "SparsePoly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "SparsePoly":
        gamma = [0] * nvars
        gamma[index] = 1
        return cls(nvars, {tuple(gamma): 1})

    @classmethod
    def monomial(cls, gamma: Sequence[int], c=1) -> "SparsePoly":
        return cls(len(gamma), {tuple(gamma): c})

    @classmethod
    def linear_form(cls, coeffs: Sequence) -> "SparsePoly":
        n = len(coeffs)
        return cls(n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(coeffs)})

    # access -------------------------------------------------------------

    @property
    def terms(self) -> Dict[Exponent, Coeff]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def support(self) -> List[Exponent]:
        return sorted(self._terms)

    def coefficient(self, gamma: Sequence[int]) -> Coeff:
        return self._terms.get(tuple(gamma), Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    def degree(self) -> int:
        return max((sum(g) for g in self._terms), default=-1)

    def min_degree(self) -> int:
        return min((sum(g) for g in self._terms), default=-1)

    def homogeneous_part(self, degree: int) -> "SparsePoly":
        return SparsePoly(self.nvars, {g: c for g, c in self._terms.items() if sum(g) == degree})

    def truncate(self, degree: int) -> "SparsePoly":
        return SparsePoly(self.nvars, {g: c for g, c in self._terms.items() if sum(g) <= degree})

    def restrict(self, exponents: Iterable[Sequence[int]]) -> "SparsePoly":
        keep = {tuple(g) for g in exponents}
        return SparsePoly(self.nvars, {g: c for g, c in self._terms.items() if g in keep})

    def permute(self, perm: Sequence[int]) -> "SparsePoly":
        """Rename variable i to perm[i]."""
        if sorted(perm) != list(range(self.nvars)):
            raise DimensionMismatch(f"{perm} is not a permutation of {self.nvars} variables")
        out = {}
        for g, c in self._terms.items():
            new = [0] * self.nvars
            for i, e in enumerate(g):
                new[perm[i]] = e
            out[tuple(new)] = c
        return SparsePoly(self.nvars, out)

    # arithmetic ---------------------------------------------------------

    def _check(self, other: "SparsePoly"):
        if other.nvars != self.nvars:
            raise DimensionMismatch(f"{self.nvars} vs {other.nvars} variables")

    def __add__(self, other):
        if isinstance(other, Number):
            other = SparsePoly.constant(self.nvars, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for g, c in other._terms.items():
            out[g] = out.get(g, 0) + c
        return SparsePoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly(self.nvars, {g: -c for g, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return SparsePoly(self.nvars, {g: c * _coerce(other) for g, c in self._terms.items()})
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check(other)
        return SparsePoly(self.nvars, multiply_terms(self._terms, other._terms))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("Negative powers are not polynomials")
        result = SparsePoly.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Number):
            other = SparsePoly.constant(self.nvars, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def __repr__(self):
        return f"SparsePoly({self.nvars}, {format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)

    # evaluation ---------------------------------------------------------

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at an (n, nvars) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0])
        for g, c in self._terms.items():
            out += float(c) * np.prod(pts ** np.asarray(g), axis=1)
        return out

    def partial(self, index: int) -> "SparsePoly":
        out = {}
        for g, c in self._terms.items():
            e = g[index]
            if e:
                ng = list(g)
                ng[index] = e - 1
                out[tuple(ng)] = c * e
        return SparsePoly(self.nvars, out)

    def gradient(self) -> List["SparsePoly"]:
        return [self.partial(i) for i in range(self.nvars)]


def multiply_terms(a: Mapping[Exponent, Coeff], b: Mapping[Exponent, Coeff],
                   max_degree: Optional[int] = None) -> Dict[Exponent, Coeff]:
    """Product of two term maps, skipping pairs whose total degree exceeds max_degree."""
    out: Dict[Exponent, Coeff] = defaultdict(int)
    if max_degree is None:
        for ga, ca in a.items():
            for gb, cb in b.items():
                out[tuple(x + y for x, y in zip(ga, gb))] += ca * cb
        return dict(out)

    by_degree = defaultdict(list)
    for gb, cb in b.items():
        by_degree[sum(gb)].append((gb, cb))
    degrees_b = sorted(by_degree)
    for ga, ca in a.items():
        da = sum(ga)
        for db in degrees_b:
            if da + db > max_degree:
                break
            for gb, cb in by_degree[db]:
                out[tuple(x + y for x, y in zip(ga, gb))] += ca * cb
    return dict(out)


class TruncatedSeries:
    """Multivariate power series modulo monomials of total degree > D."""

    __slots__ = ('poly', 'D')

    def __init__(self, poly: SparsePoly, D: int):
        if D < 0:
            raise ValueError("Truncation degree must be nonnegative")
        self.D = D
        self.poly = poly.truncate(D)

    @property
    def nvars(self) -> int:
        return self.poly.nvars

    @classmethod
    def zero(cls, nvars: int, D: int) -> "TruncatedSeries":
        return cls(SparsePoly(nvars), D)

    @classmethod
    def constant(cls, nvars: int, c, D: int) -> "TruncatedSeries":
        return cls(SparsePoly.constant(nvars, c), D)

    def _other(self, other) -> SparsePoly:
        if isinstance(other, TruncatedSeries):
            if other.D != self.D:
                raise DimensionMismatch(f"Truncation degrees {self.D} and {other.D} differ")
            return other.poly
        if isinstance(other, SparsePoly):
            return other
        return SparsePoly.constant(self.nvars, other)

    def __add__(self, other):
        return TruncatedSeries(self.poly + self._other(other), self.D)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.poly, self.D)

    def __sub__(self, other):
        return TruncatedSeries(self.poly - self._other(other), self.D)

    def __rsub__(self, other):
        return TruncatedSeries(self._other(other) - self.poly, self.D)

    def __mul__(self, other):
        if isinstance(other, Number):
            return TruncatedSeries(self.poly * other, self.D)
        p = self._other(other)
        if p.nvars != self.nvars:
            raise DimensionMismatch(f"{self.nvars} vs {p.nvars} variables")
        return TruncatedSeries(SparsePoly(self.nvars, multiply_terms(self.poly.terms, p.terms, self.D)), self.D)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.D == other.D and self.poly == other.poly

    def __repr__(self):
        return f"TruncatedSeries(D={self.D}, {format_poly(self.poly)!r})"

    def constant_term(self) -> Coeff:
        return self.poly.coefficient((0,) * self.nvars)

    def homogeneous_part(self, degree: int) -> SparsePoly:
        return self.poly.homogeneous_part(degree)

    def compose_germ(self, coeffs: Sequence) -> "TruncatedSeries":
        """Σ coeffs[k]·self^k by Horner; self must have zero constant term."""
        if self.constant_term() != 0:
            raise ValueError("Germ composition needs an inner series without constant term")
        coeffs = list(coeffs)[: self.D + 1]
        result = TruncatedSeries.constant(self.nvars, coeffs[-1] if coeffs else 0, self.D)
        for c in reversed(coeffs[:-1]):
            result = result * self + c
        return result


# 1-D germs -----------------------------------------------------------------

def sqrt1p_coeffs(D: int) -> List[Fraction]:
    """Taylor coefficients of √(1+u): binomial(1/2, k)."""
    out = [Fraction(1)]
    for k in range(1, D + 1):
        out.append(out[-1] * (Fraction(1, 2) - (k - 1)) / k)
    return out


def sin_coeffs(D: int) -> List[Fraction]:
    return [Fraction(0) if k % 2 == 0 else Fraction((-1) ** (k // 2), factorial(k)) for k in range(D + 1)]


def cos_coeffs(D: int) -> List[Fraction]:
    return [Fraction((-1) ** (k // 2), factorial(k)) if k % 2 == 0 else Fraction(0) for k in range(D + 1)]


# linear substitution -------------------------------------------------------

def compose_linear(P: Union[SparsePoly, TruncatedSeries], A: Sequence[Sequence]):
    """Return P(A·y): variable i of P is replaced by Σⱼ A[i][j]·yⱼ."""
    nvars = P.nvars
    rows = [list(r) for r in A]
    if len(rows) != nvars or any(len(r) != nvars for r in rows):
        raise DimensionMismatch(f"Substitution matrix must be {nvars}x{nvars}")

    D = P.D if isinstance(P, TruncatedSeries) else None
    poly = P.poly if isinstance(P, TruncatedSeries) else P
    forms = [SparsePoly.linear_form(r) for r in rows]
    cache: Dict[Tuple[int, int], Dict[Exponent, Coeff]] = {}

    def power(i: int, k: int) -> Dict[Exponent, Coeff]:
        key = (i, k)
        if key not in cache:
            if k == 0:
                cache[key] = {(0,) * nvars: Fraction(1)}
            else:
                cache[key] = multiply_terms(power(i, k - 1), forms[i].terms, D)
        return cache[key]

    total: Dict[Exponent, Coeff] = defaultdict(int)
    for gamma, c in poly.items():
        acc = {(0,) * nvars: c}
        for i, e in enumerate(gamma):
            if e:
                acc = multiply_terms(acc, power(i, e), D)
        for g, v in acc.items():
            total[g] += v
    result = SparsePoly(nvars, total)
    return TruncatedSeries(result, D) if D is not None else result


# text format ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<var>x\d+)|(?P<op>[-+*/^]))")


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolySyntaxError(f"Unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(('end', '', len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None):
        tok = self.take()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise PolySyntaxError(f"Expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def parse(self) -> List[Tuple[Fraction, Dict[int, int]]]:
        terms = []
        sign = 1
        tok = self.peek()
        if tok[0] == 'op' and tok[1] in '+-':
            self.take()
            sign = -1 if tok[1] == '-' else 1
        terms.append(self.term(sign))
        while self.peek()[0] == 'op' and self.peek()[1] in '+-':
            sign = -1 if self.take()[1] == '-' else 1
            terms.append(self.term(sign))
        tok = self.peek()
        if tok[0] != 'end':
            raise PolySyntaxError(f"Unexpected {tok[1]!r}", tok[2])
        return terms

    def term(self, sign: int):
        powers: Dict[int, int] = defaultdict(int)
        coeff_box = [Fraction(sign)]
        self.factor(powers, coeff_box)
        while self.peek()[0] == 'op' and self.peek()[1] == '*':
            self.take()
            self.factor(powers, coeff_box)
        return coeff_box[0], powers

    def factor(self, powers: Dict[int, int], coeff_box: list):
        tok = self.take()
        if tok[0] == 'num':
            value = Fraction(int(tok[1]))
            if self.peek()[0] == 'op' and self.peek()[1] == '/':
                self.take()
                den = self.expect('num')
                if int(den[1]) == 0:
                    raise PolySyntaxError("Zero denominator", den[2])
                value /= int(den[1])
            coeff_box[0] *= value
            return
        if tok[0] == 'var':
            index = int(tok[1][1:])
            if not 1 <= index <= 9:
                raise PolySyntaxError(f"Variable {tok[1]} outside x1..x9", tok[2])
            exponent = 1
            if self.peek()[0] == 'op' and self.peek()[1] == '^':
                self.take()
                nxt = self.peek()
                if nxt[0] == 'op' and nxt[1] == '-':
                    raise NegativeExponent("Negative exponent", nxt[2])
                exponent = int(self.expect('num')[1])
            powers[index - 1] += exponent
            return
        raise PolySyntaxError(f"Expected a number or variable, found {tok[1] or 'end of input'!r}", tok[2])


def parse_poly(text: str, nvars: Optional[int] = None) -> SparsePoly:
    """Parse e.g. ``"x1^2*x2 - 1/3*x2^3"`` into a SparsePoly.

    Args:
        text: signed sum of products of rationals and variables x1..x9
        nvars: number of variables; defaults to the largest index used

    Raises:
        PolySyntaxError: malformed input, with the offending position
        NegativeExponent: an exponent with a minus sign
    """
    parsed = _Parser(text).parse()
    used = max((i + 1 for _, powers in parsed for i in powers), default=0)
    if nvars is None:
        nvars = max(used, 1)
    elif used > nvars:
        raise DimensionMismatch(f"Expression uses x{used} but nvars={nvars}")
    terms: Dict[Exponent, Fraction] = defaultdict(Fraction)
    for coeff, powers in parsed:
        gamma = [0] * nvars
        for i, e in powers.items():
            gamma[i] = e
        terms[tuple(gamma)] += coeff
    return SparsePoly(nvars, terms)


def _format_coeff(c: Coeff) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def format_poly(P: SparsePoly) -> str:
    """Print in the grammar accepted by parse_poly (exact coefficients only round-trip)."""
    if P.is_zero():
        return "0"
    ordered = sorted(P.items(), key=lambda item: (-sum(item[0]), tuple(-e for e in item[0])))
    parts = []
    for k, (gamma, c) in enumerate(ordered):
        negative = c < 0
        mag = -c if negative else c
        factors = [f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(gamma) if e]
        if mag != 1 or not factors:
            factors.insert(0, _format_coeff(mag))
        body = "*".join(factors)
        if k == 0:
            parts.append(f"-{body}" if negative else body)
        else:
            parts.append(f"- {body}" if negative else f"+ {body}")
    return " ".join(parts)
