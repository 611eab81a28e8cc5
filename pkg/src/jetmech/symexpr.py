"""Exact canonical polynomial expressions over jet coordinates.

The scalar algebra everything else is built on: expressions are finite sums
of terms ``rational * power-product`` over a small vocabulary of symbols
(time t, coordinates x^i, velocities x'^i, accelerations x''^i, named
parameters, and registered forcing signals). Coefficients are exact
``fractions.Fraction`` values, so algebraic identities hold exactly, not to
tolerance. Two expressions are equal iff their canonical forms are
structurally identical.

Forcing signals are opaque functions of time from two closed families
(polynomials and sinusoids), each with exact derivatives inside its family.
Polynomial signals may participate in the scaling integral; sinusoids may
not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

from .errors import AdmissibilityError, DifferentiationError, UnboundSymbolError

Rational = Union[int, Fraction]


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise TypeError(
            "floating-point coefficients are not exact; use Fraction or int"
        )
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


# ---------------------------------------------------------------------------
# forcing signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialSignal:
    """Signal t -> sum_k coeffs[k) * t**k with exact rational coefficients."""

    name: str
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_as_fraction(c) for c in self.coeffs))

    @property
    def admissible(self) -> bool:
        return True

    def derivative_coeffs(self, order: int) -> tuple[Fraction, ...]:
        """Coefficients of the order-th derivative, same polynomial family."""
        coeffs = self.coeffs
        for _ in range(order):
            coeffs = tuple(c * k for k, c in enumerate(coeffs) if k >= 1)
        return coeffs

    def value_at(self, t: float, order: int = 0) -> float:
        acc = 0.0
        for c in reversed(self.derivative_coeffs(order)):
            acc = acc * t + float(c)
        return acc


@dataclass(frozen=True)
class SinusoidSignal:
    """Signal A*sin(omega*t + phase) (or cos when ``cosine`` is set).

    Derivatives cycle through the sin/cos pair with an extra factor omega,
    so every derivative stays inside the family with exact parameters.
    """

    name: str
    amplitude: Fraction
    omega: Fraction
    phase: Fraction
    cosine: bool = False

    def __post_init__(self):
        object.__setattr__(self, "amplitude", _as_fraction(self.amplitude))
        object.__setattr__(self, "omega", _as_fraction(self.omega))
        object.__setattr__(self, "phase", _as_fraction(self.phase))

    @property
    def admissible(self) -> bool:
        return False

    def derivative_parts(self, order: int) -> tuple[Fraction, bool]:
        """(signed amplitude including omega**order, use-cosine flag)."""
        amp = self.amplitude * self.omega**order
        phase_quarter = (order + (1 if self.cosine else 0)) % 4
        # quarter turns: sin, cos, -sin, -cos
        if phase_quarter >= 2:
            amp = -amp
        return amp, phase_quarter % 2 == 1

    def value_at(self, t: float, order: int = 0) -> float:
        amp, use_cos = self.derivative_parts(order)
        angle = float(self.omega) * t + float(self.phase)
        return float(amp) * (math.cos(angle) if use_cos else math.sin(angle))


ForcingSignal = Union[PolynomialSignal, SinusoidSignal]


def polynomial_signal(name: str, *coeffs) -> PolynomialSignal:
    return PolynomialSignal(name, tuple(_as_fraction(c) for c in coeffs))


def sinusoid_signal(name: str, amplitude, omega, phase) -> SinusoidSignal:
    return SinusoidSignal(
        name, _as_fraction(amplitude), _as_fraction(omega), _as_fraction(phase)
    )


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


class SymbolKind(IntEnum):
    TIME = 0
    COORD = 1
    VEL = 2
    ACC = 3
    PARAM = 4
    SIGNAL = 5


@dataclass(frozen=True)
class Symbol:
    """One coordinate of the symbolic vocabulary.

    ``index`` is the coordinate index for COORD/VEL/ACC kinds, ``name`` the
    identifier for PARAM, and SIGNAL symbols carry their ForcingSignal plus
    a derivative order (order 0 is the signal itself, 1 its time derivative,
    and so on).
    """

    kind: SymbolKind
    index: int = 0
    name: str = ""
    signal: ForcingSignal | None = field(default=None, compare=True)
    order: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("coordinate index must be nonnegative")
        if self.kind == SymbolKind.PARAM and not self.name:
            raise ValueError("parameter symbols need a name")
        if self.kind == SymbolKind.SIGNAL:
            if self.signal is None:
                raise ValueError("signal symbols must reference a ForcingSignal")
            if self.order < 0:
                raise ValueError("signal derivative order must be nonnegative")
        elif self.signal is not None or self.order != 0:
            raise ValueError("signal/order fields are reserved for SIGNAL symbols")

    def sort_key(self):
        if self.kind == SymbolKind.SIGNAL:
            sig = self.signal
            if isinstance(sig, PolynomialSignal):
                fp: tuple = ("poly", sig.coeffs)
            else:
                fp = ("sin", sig.amplitude, sig.omega, sig.phase, sig.cosine)
            return (int(self.kind), 0, sig.name, self.order, fp)
        return (int(self.kind), self.index, self.name, 0, ())

    def display(self, coords: tuple[str, ...] = ()) -> str:
        """Short name used by repr and the default renderer."""
        def cname(i):
            if i < len(coords):
                return coords[i]
            return ("x", "y", "z")[i] if i < 3 else f"x{i}"

        if self.kind == SymbolKind.TIME:
            return "t"
        if self.kind == SymbolKind.COORD:
            return cname(self.index)
        if self.kind == SymbolKind.VEL:
            return cname(self.index) + "'"
        if self.kind == SymbolKind.ACC:
            return cname(self.index) + "''"
        if self.kind == SymbolKind.PARAM:
            return self.name
        inner = f"sig({self.signal.name})"
        for _ in range(self.order):
            inner = f"dsig({inner[4:-1]})" if inner.startswith("sig(") else f"dsig({inner})"
        return inner


TAU = Symbol(SymbolKind.TIME)


def coord(i: int) -> Symbol:
    return Symbol(SymbolKind.COORD, index=i)


def vel(i: int) -> Symbol:
    return Symbol(SymbolKind.VEL, index=i)


def acc(i: int) -> Symbol:
    return Symbol(SymbolKind.ACC, index=i)


def param(name: str) -> Symbol:
    return Symbol(SymbolKind.PARAM, name=name)


def signal_symbol(signal: ForcingSignal, order: int = 0) -> Symbol:
    return Symbol(SymbolKind.SIGNAL, signal=signal, order=order)


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

# a monomial is a tuple of (Symbol, exponent>0) pairs sorted by sort_key
Monomial = tuple[tuple[Symbol, int], ...]


def _mono_key(mono: Monomial):
    return tuple((sym.sort_key(), exp) for sym, exp in mono)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    merged: dict = {}
    for sym, exp in m1:
        merged[sym] = merged.get(sym, 0) + exp
    for sym, exp in m2:
        merged[sym] = merged.get(sym, 0) + exp
    return tuple(sorted(merged.items(), key=lambda it: it[0].sort_key()))


class Expr:
    """Canonical multivariate polynomial with exact rational coefficients.

    Immutable; arithmetic re-canonicalizes, so structural equality is
    semantic equality. Instances are hashable and safe to share between
    threads.
    """

    __slots__ = ("_terms",)

    def __init__(self, _terms: tuple[tuple[Monomial, Fraction], ...] = ()):
        # internal: _terms must already be canonical; use the factories below
        self._terms = _terms

    # -- construction ------------------------------------------------------

    @staticmethod
    def _from_map(acc: dict) -> "Expr":
        terms = tuple(
            sorted(
                ((m, c) for m, c in acc.items() if c != 0),
                key=lambda it: _mono_key(it[0]),
            )
        )
        return Expr(terms)

    @classmethod
    def const(cls, value: Rational) -> "Expr":
        q = _as_fraction(value)
        return cls(() if q == 0 else (((), q),))

    @classmethod
    def var(cls, symbol: Symbol) -> "Expr":
        term = (((symbol, 1),), Fraction(1))
        return cls((term,))  # type: ignore[arg-type]

    # -- inspection --------------------------------------------------------

    @property
    def terms(self) -> tuple[tuple[Monomial, Fraction], ...]:
        return self._terms

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def symbols(self) -> set[Symbol]:
        return {sym for mono, _ in self._terms for sym, _ in mono}

    def contains_kind(self, kind: SymbolKind) -> bool:
        return any(sym.kind == kind for sym in self.symbols())

    def constant_term(self) -> Fraction:
        for mono, c in self._terms:
            if mono == ():
                return c
        return Fraction(0)

    def max_coordinate_index(self) -> int:
        """Largest coordinate/velocity/acceleration index present, or -1."""
        idx = -1
        for sym in self.symbols():
            if sym.kind in (SymbolKind.COORD, SymbolKind.VEL, SymbolKind.ACC):
                idx = max(idx, sym.index)
        return idx

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, Fraction)):
            return Expr.const(other)
        if isinstance(other, Symbol):
            return Expr.var(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        acc = dict(self._terms)
        for mono, c in other._terms:
            acc[mono] = acc.get(mono, Fraction(0)) + c
        return Expr._from_map(acc)

    __radd__ = __add__

    def __neg__(self):
        return Expr(tuple((m, -c) for m, c in self._terms))

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        acc: dict = {}
        for m1, c1 in self._terms:
            for m2, c2 in other._terms:
                mono = _mono_mul(m1, m2)
                acc[mono] = acc.get(mono, Fraction(0)) + c1 * c2
        return Expr._from_map(acc)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponents must be nonnegative integers")
        result = Expr.const(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            q = _as_fraction(other)
            if q == 0:
                raise ZeroDivisionError("division of an expression by zero")
            return self * (1 / q)
        raise TypeError("expressions may only be divided by exact rationals")

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Expr.const(other)
        return NotImplemented

    def __hash__(self):
        return hash(self._terms)

    def __repr__(self):
        return f"Expr({format_basic(self)})"


ZERO = Expr.const(0)
ONE = Expr.const(1)


# factor order for rendering: parameters first, then signals, time, and the
# jet coordinates, which matches conventional physics notation (k*x^2)
_DISPLAY_RANK = {
    SymbolKind.PARAM: 0,
    SymbolKind.SIGNAL: 1,
    SymbolKind.TIME: 2,
    SymbolKind.COORD: 3,
    SymbolKind.VEL: 4,
    SymbolKind.ACC: 5,
}


def format_basic(e: Expr, coords: tuple[str, ...] = ()) -> str:
    """Deterministic, re-parseable rendering of a canonical expression."""
    if e.is_zero:
        return "0"
    parts = []
    for i, (mono, c) in enumerate(e.terms):
        factors = sorted(
            mono, key=lambda it: (_DISPLAY_RANK[it[0].kind], it[0].sort_key())
        )
        frags = []
        for sym, exp in factors:
            s = sym.display(coords)
            frags.append(s if exp == 1 else f"{s}^{exp}")
        body = "*".join(frags)
        mag = abs(c)
        if body and mag == 1:
            frag = body
        elif body:
            frag = f"{mag}*{body}"
        else:
            frag = str(mag)
        if i == 0:
            parts.append(("-" if c < 0 else "") + frag)
        else:
            parts.append((" - " if c < 0 else " + ") + frag)
    return "".join(parts)


# ---------------------------------------------------------------------------
# normalize: raw trees -> canonical expressions
# ---------------------------------------------------------------------------

# raw trees are nested tuples over Symbol / int / Fraction / Expr leaves:
#   ("add", *xs) ("sub", a, b) ("mul", *xs) ("neg", a)
#   ("pow", base, int-exponent) ("div", a, rational)
RawExpr = Union[Expr, Symbol, int, Fraction, tuple]


def normalize(raw: RawExpr) -> Expr:
    """Fold a raw expression tree into canonical form. Idempotent."""
    if isinstance(raw, Expr):
        return raw
    if isinstance(raw, Symbol):
        return Expr.var(raw)
    if isinstance(raw, (int, Fraction)):
        return Expr.const(raw)
    if not isinstance(raw, tuple) or not raw:
        raise TypeError(f"not a raw expression tree: {raw!r}")
    op, *args = raw
    if op == "add":
        out = ZERO
        for a in args:
            out = out + normalize(a)
        return out
    if op == "sub":
        a, b = args
        return normalize(a) - normalize(b)
    if op == "mul":
        out = ONE
        for a in args:
            out = out * normalize(a)
        return out
    if op == "neg":
        (a,) = args
        return -normalize(a)
    if op == "pow":
        base, exp = args
        if not isinstance(exp, int) or exp < 0:
            raise ValueError("exponents must be nonnegative integers")
        return normalize(base) ** exp
    if op == "div":
        a, b = args
        return normalize(a) / _as_fraction(b)
    raise TypeError(f"unknown raw-tree operator {op!r}")


# ---------------------------------------------------------------------------
# differentiation, substitution, evaluation
# ---------------------------------------------------------------------------


def _power_rule(e: Expr, s: Symbol) -> Expr:
    """d/ds treating s as an independent variable (no chain rule)."""
    acc: dict = {}
    for mono, c in e.terms:
        for k, (sym, exp) in enumerate(mono):
            if sym == s:
                if exp == 1:
                    new = mono[:k] + mono[k + 1 :]
                else:
                    new = mono[:k] + ((sym, exp - 1),) + mono[k + 1 :]
                acc[new] = acc.get(new, Fraction(0)) + c * exp
                break
    return Expr._from_map(acc)


def partial(e: Expr, s: Symbol) -> Expr:
    """Exact partial derivative.

    Differentiation with respect to time applies the chain rule to signal
    symbols (each order-k signal symbol contributes its order-(k+1)
    companion); differentiating with respect to a signal symbol itself is
    undefined, since signals are functions of time, not independent
    variables.
    """
    if s.kind == SymbolKind.SIGNAL:
        raise DifferentiationError(
            f"cannot differentiate with respect to signal '{s.signal.name}'"
        )
    result = _power_rule(e, s)
    if s.kind == SymbolKind.TIME:
        sig_syms = {sym for sym in e.symbols() if sym.kind == SymbolKind.SIGNAL}
        for sym in sig_syms:
            bumped = signal_symbol(sym.signal, sym.order + 1)
            result = result + _power_rule(e, sym) * Expr.var(bumped)
    return result


def substitute(e: Expr, binding: Mapping[Symbol, Union[Expr, Rational, Symbol]]) -> Expr:
    """Simultaneous substitution, re-canonicalized.

    Signal symbols may not be rebound (they are functions of time).
    """
    for key in binding:
        if key.kind == SymbolKind.SIGNAL:
            raise ValueError("cannot substitute for signal symbols")
    out = ZERO
    for mono, c in e.terms:
        term = Expr.const(c)
        for sym, exp in mono:
            if sym in binding:
                term = term * normalize(binding[sym]) ** exp
            else:
                term = term * Expr.var(sym) ** exp
        out = out + term
    return out


def evaluate(e: Expr, binding: Mapping[Symbol, float]) -> float:
    """Numeric evaluation; every non-signal symbol must be bound.

    Signal symbols are computed from their closed form at the bound time.
    """
    total = 0.0
    for mono, c in e.terms:
        val = float(c)
        for sym, exp in mono:
            if sym in binding:
                base = float(binding[sym])
            elif sym.kind == SymbolKind.SIGNAL:
                if TAU not in binding:
                    raise UnboundSymbolError(
                        f"evaluating signal '{sym.signal.name}' requires t"
                    )
                base = sym.signal.value_at(float(binding[TAU]), sym.order)
            else:
                raise UnboundSymbolError(f"unbound symbol {sym.display()}")
            val *= base**exp
        total += val
    return total


# ---------------------------------------------------------------------------
# the scaling integral
# ---------------------------------------------------------------------------

DEFAULT_SCALED_KINDS = (SymbolKind.TIME, SymbolKind.COORD, SymbolKind.VEL, SymbolKind.ACC)
FIBER_SCALED_KINDS = (SymbolKind.COORD, SymbolKind.VEL)


def _signal_poly_expr(sym: Symbol) -> Expr:
    """Expand a polynomial-signal symbol into its explicit time polynomial."""
    coeffs = sym.signal.derivative_coeffs(sym.order)
    out = ZERO
    for k, c in enumerate(coeffs):
        out = out + Expr.const(c) * Expr.var(TAU) ** k
    return out


def expand_polynomial_signals(e: Expr) -> Expr:
    """Replace polynomial-signal symbols by explicit time polynomials.

    Raises AdmissibilityError when a sinusoid signal is present, naming it.
    """
    out = ZERO
    for mono, c in e.terms:
        term = Expr.const(c)
        for sym, exp in mono:
            if sym.kind == SymbolKind.SIGNAL:
                if not sym.signal.admissible:
                    raise AdmissibilityError(sym.signal.name)
                term = term * _signal_poly_expr(sym) ** exp
            else:
                term = term * Expr.var(sym) ** exp
        out = out + term
    return out


def scaling_integral(
    e: Expr,
    scaled_kinds: Iterable[SymbolKind] = DEFAULT_SCALED_KINDS,
    weight: int = 0,
) -> Expr:
    """Integrate s^weight * e(s * point) over s in [0, 1], exactly.

    Every symbol whose kind is in ``scaled_kinds`` is scaled by s
    (parameters never are), so a term of total scaled degree d picks up the
    factor 1/(d+weight+1). The weight powers the homotopy operators on
    higher form degrees. When time is scaled, signals ride along as
    f(s*t): polynomial signals are expanded into explicit time polynomials
    first and sinusoids are rejected, since f(s*t) would leave their
    closed family.
    """
    kinds = frozenset(scaled_kinds)
    if SymbolKind.TIME in kinds:
        e = expand_polynomial_signals(e)
    acc: dict = {}
    for mono, c in e.terms:
        d = sum(exp for sym, exp in mono if sym.kind in kinds)
        acc[mono] = acc.get(mono, Fraction(0)) + c / (d + weight + 1)
    return Expr._from_map(acc)


# ---------------------------------------------------------------------------
# compilation to fast numeric callables
# ---------------------------------------------------------------------------


def _float_lit(q: Fraction) -> str:
    return repr(float(q))


def _signal_code(sym: Symbol) -> str:
    sig = sym.signal
    if isinstance(sig, PolynomialSignal):
        coeffs = sig.derivative_coeffs(sym.order)
        if not coeffs:
            return "0.0"
        body = _float_lit(coeffs[-1])
        for c in reversed(coeffs[:-1]):
            body = f"({_float_lit(c)} + t*({body}))"
        return body
    amp, use_cos = sig.derivative_parts(sym.order)
    fn = "cos" if use_cos else "sin"
    angle = f"{_float_lit(sig.omega)}*t + {_float_lit(sig.phase)}"
    return f"({_float_lit(amp)}*{fn}({angle}))"


def compile_expr(
    e: Expr, params: Mapping[str, float], vectorized: bool = False
) -> Callable:
    """Compile to ``f(t, x, v, a=None)`` with parameters bound as constants.

    ``x``, ``v``, ``a`` are indexable by coordinate. The scalar flavour uses
    math.sin/cos; the vectorized flavour uses numpy and accepts arrays for
    every slot. Raises UnboundSymbolError for parameters missing from
    ``params``.
    """
    pieces = []
    for mono, c in e.terms:
        factors = [_float_lit(c)]
        for sym, exp in mono:
            if sym.kind == SymbolKind.TIME:
                base = "t"
            elif sym.kind == SymbolKind.COORD:
                base = f"x[{sym.index}]"
            elif sym.kind == SymbolKind.VEL:
                base = f"v[{sym.index}]"
            elif sym.kind == SymbolKind.ACC:
                base = f"a[{sym.index}]"
            elif sym.kind == SymbolKind.PARAM:
                if sym.name not in params:
                    raise UnboundSymbolError(f"parameter '{sym.name}' has no value")
                base = repr(float(params[sym.name]))
            else:
                base = _signal_code(sym)
            factors.append(base if exp == 1 else f"{base}**{exp}")
        pieces.append("*".join(factors))
    body = " + ".join(pieces) if pieces else "0.0"
    src = f"def _compiled(t, x, v, a=None):\n    return {body}\n"
    if vectorized:
        import numpy as np

        namespace = {"sin": np.sin, "cos": np.cos}
    else:
        namespace = {"sin": math.sin, "cos": math.cos}
    exec(src, namespace)  # noqa: S102 - source is generated locally
    return namespace["_compiled"]
