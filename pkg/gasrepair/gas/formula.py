"""
Parametric gas formulas.

A GasFormula is a finite sum of terms ``coefficient * monomial * atom`` where the
monomial is a product of powers of symbolic variables (loop trip counts) and the
atom is an optional opaque token, the canonical text of a non-polynomial factor such
as ``sin(x)``.  Coefficients are exact rationals.  Formulas are immutable values kept
in canonical form: equal formulas have equal term maps and print identically.

Comparison goes through sympy: to_polynomial() maps each distinct atom to a fresh
variable through a SubstitutionBinding shared by both formulas of a comparison, so
that identical atoms meet as the same variable.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

import sympy

Monomial = tuple[tuple[str, int], ...]
TermKey = tuple[Monomial, Optional[str]]
Number = Union[int, Fraction]


def _monomial(powers: Mapping[str, int]) -> Monomial:
    return tuple(sorted((var, exp) for var, exp in powers.items() if exp))


def _times(a: Monomial, b: Monomial) -> Monomial:
    powers = dict(a)
    for var, exp in b:
        powers[var] = powers.get(var, 0) + exp
    return _monomial(powers)


def _atom_times(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a is None or b is None:
        return a or b
    return "*".join(sorted((a, b)))


def _format_coefficient(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value}"


class GasFormula:
    """Immutable, canonical sum of (coefficient, monomial, atom) terms"""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[TermKey, Number]] = None):
        canonical = {}
        for key, coefficient in (terms or {}).items():
            value = Fraction(coefficient)
            if value:
                canonical[key] = canonical.get(key, Fraction(0)) + value
        self._terms: dict[TermKey, Fraction] = {
            key: value for key, value in sorted(canonical.items(), key=_sort_key) if value
        }
        self._hash = None

    # Constructors

    @classmethod
    def constant(cls, value: Number) -> GasFormula:
        return cls({((), None): value})

    @classmethod
    def variable(cls, name: str) -> GasFormula:
        return cls({(((name, 1),), None): 1})

    @classmethod
    def atom(cls, text: str, coefficient: Number = 1) -> GasFormula:
        return cls({((), text): coefficient})

    @classmethod
    def parse(cls, text: str) -> GasFormula:
        """Build a formula from text such as ``10*n1 + 3*n1*n2 + 42`` or ``x**2 + sin(x)``.

        Symbols raised to non-negative integer powers become monomial factors; any
        other factor (function applications, symbolic exponents) becomes the atom.
        """
        try:
            expr = sympy.expand(sympy.sympify(text))
        except (sympy.SympifyError, TypeError, SyntaxError) as e:
            raise ValueError(f"cannot parse gas formula {text!r}: {e}") from e
        terms: dict[TermKey, Fraction] = {}
        for term in sympy.Add.make_args(expr):
            coefficient, rest = term.as_coeff_Mul()
            if not coefficient.is_Rational:
                raise ValueError(f"non-rational coefficient in {text!r}")
            powers: dict[str, int] = {}
            opaque = []
            for factor in sympy.Mul.make_args(rest):
                base, exp = factor.as_base_exp()
                if base.is_Symbol and exp.is_Integer and exp > 0:
                    powers[str(base)] = powers.get(str(base), 0) + int(exp)
                elif factor != 1:
                    opaque.append(str(factor))
            atom = "*".join(sorted(opaque)) if opaque else None
            key = (_monomial(powers), atom)
            terms[key] = terms.get(key, Fraction(0)) + Fraction(
                int(coefficient.p), int(coefficient.q)
            )
        return cls(terms)

    # Algebra

    @property
    def terms(self) -> dict[TermKey, Fraction]:
        return dict(self._terms)

    def __add__(self, other) -> GasFormula:
        other = _coerce(other)
        if other is NotImplemented:
            return other
        merged = dict(self._terms)
        for key, value in other._terms.items():
            merged[key] = merged.get(key, Fraction(0)) + value
        return GasFormula(merged)

    __radd__ = __add__

    def __mul__(self, other) -> GasFormula:
        other = _coerce(other)
        if other is NotImplemented:
            return other
        product: dict[TermKey, Fraction] = {}
        for (mono_a, atom_a), coef_a in self._terms.items():
            for (mono_b, atom_b), coef_b in other._terms.items():
                key = (_times(mono_a, mono_b), _atom_times(atom_a, atom_b))
                product[key] = product.get(key, Fraction(0)) + coef_a * coef_b
        return GasFormula(product)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    # Queries

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(var for (mono, _) in self._terms for var, _ in mono)

    @property
    def atoms(self) -> frozenset[str]:
        return frozenset(atom for (_, atom) in self._terms if atom is not None)

    @property
    def is_constant(self) -> bool:
        return all(key == ((), None) for key in self._terms)

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get(((), None), Fraction(0))

    def coefficient(self, monomial: Monomial, atom: Optional[str] = None) -> Fraction:
        return self._terms.get((monomial, atom), Fraction(0))

    def evaluate(
        self,
        assignment: Optional[Mapping[str, Number]] = None,
        atoms: Optional[Mapping[str, Number]] = None,
    ) -> Fraction:
        """Value of the formula; unassigned variables are 0, atoms must be given"""
        assignment = assignment or {}
        total = Fraction(0)
        for (mono, atom), coefficient in self._terms.items():
            value = coefficient
            for var, exp in mono:
                value *= Fraction(assignment.get(var, 0)) ** exp
            if atom is not None:
                if atoms is None or atom not in atoms:
                    raise KeyError(f"no value for atom {atom!r}")
                value *= Fraction(atoms[atom])
            total += value
        return total

    def substitute(self, assignment: Mapping[str, Number]) -> GasFormula:
        """Partially evaluate: replace the given variables by numbers"""
        out: dict[TermKey, Fraction] = {}
        for (mono, atom), coefficient in self._terms.items():
            value = coefficient
            rest = {}
            for var, exp in mono:
                if var in assignment:
                    value *= Fraction(assignment[var]) ** exp
                else:
                    rest[var] = exp
            key = (_monomial(rest), atom)
            out[key] = out.get(key, Fraction(0)) + value
        return GasFormula(out)

    def to_sympy(self, binding: Optional[SubstitutionBinding] = None) -> sympy.Expr:
        expr = sympy.Integer(0)
        for (mono, atom), coefficient in self._terms.items():
            term = sympy.Rational(coefficient.numerator, coefficient.denominator)
            for var, exp in mono:
                term *= sympy.Symbol(var) ** exp
            if atom is not None:
                factor = binding.bind(atom) if binding is not None else sympy.sympify(atom)
                term *= factor
            expr += term
        return expr

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for (mono, atom), coefficient in self._terms.items():
            factors = [var if exp == 1 else f"{var}**{exp}" for var, exp in mono]
            if atom is not None:
                factors.append(atom)
            magnitude = abs(coefficient)
            if not factors:
                body = _format_coefficient(magnitude)
            elif magnitude == 1:
                body = "*".join(factors)
            else:
                body = "*".join([_format_coefficient(magnitude)] + factors)
            sign = "-" if coefficient < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"GasFormula('{self}')"


def _sort_key(item) -> tuple:
    (mono, atom), _ = item
    # constant last, then by monomial, atoms after plain monomials
    return (mono == () and atom is None, mono, atom is not None, atom or "")


def _coerce(value):
    if isinstance(value, GasFormula):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return GasFormula.constant(value)
    return NotImplemented


def total(formulas: Iterable[GasFormula]) -> GasFormula:
    result = GasFormula()
    for formula in formulas:
        result = result + formula
    return result


class SubstitutionBinding:
    """Session map from opaque atoms to fresh sympy symbols (injective and stable)"""

    PREFIX = "_atom"

    def __init__(self):
        self._symbols: dict[str, sympy.Symbol] = {}

    def bind(self, atom: str) -> sympy.Symbol:
        symbol = self._symbols.get(atom)
        if symbol is None:
            symbol = sympy.Symbol(f"{self.PREFIX}{len(self._symbols) + 1}")
            self._symbols[atom] = symbol
        return symbol

    def __getitem__(self, atom: str) -> sympy.Symbol:
        return self._symbols[atom]

    def __contains__(self, atom: str) -> bool:
        return atom in self._symbols

    def __len__(self):
        return len(self._symbols)

    def items(self):
        return self._symbols.items()


def to_polynomial(
    formula: GasFormula,
    binding: SubstitutionBinding,
    gens: Optional[Iterable[sympy.Symbol]] = None,
) -> sympy.Poly:
    """Polynomial over QQ: monomial terms unchanged, each atom replaced by its bound
    fresh variable (coefficients kept)"""
    expr = formula.to_sympy(binding)
    generators = list(gens) if gens is not None else sorted(expr.free_symbols, key=str)
    if not generators:
        generators = [sympy.Symbol(f"{SubstitutionBinding.PREFIX}0")]
    return sympy.Poly(expr, *generators, domain="QQ")
