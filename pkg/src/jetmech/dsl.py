"""System-definition language and expression syntax.

Surface syntax for declaring mechanical systems: coordinates, parameters,
forcing signals, the momentum/force components of the dynamical one-form,
optional declared splits, a direct Newtonian oracle, initial conditions
and integration window. Primed identifiers denote jet coordinates (x' is
the velocity, x'' the acceleration), ``t`` is reserved for time, and
signals are referenced through sig(name)/dsig(name).

Files use '#' line comments and newline-or-semicolon statement
separators; the conventional extension is ``.mech``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .errors import MechError
from .formcalc import (
    Decomposition,
    VerticalOneForm,
    accept_user_split,
    decompose,
)
from .spencer import EquationsOfMotion, dual_spencer
from .symexpr import (
    TAU,
    Expr,
    ForcingSignal,
    PolynomialSignal,
    SinusoidSignal,
    ZERO,
    acc,
    coord,
    normalize,
    param,
    signal_symbol,
    vel,
)


class ParseError(MechError):
    """Syntax or resolution error with a 1-based source position."""

    def __init__(self, line: int, col: int, message: str, token: str = ""):
        self.line = line
        self.col = col
        self.message = message
        self.token = token
        super().__init__(f"line {line}, col {col}: {message}")


class UndeclaredSymbolError(ParseError):
    pass


class DuplicateDeclarationError(ParseError):
    pass


RESERVED = {"t", "sig", "dsig"}


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    type: str  # IDENT NUMBER STRING OP NEWLINE EOF
    value: object
    line: int
    col: int
    primes: int = 0

    def describe(self) -> str:
        if self.type == "EOF":
            return "end of input"
        if self.type == "NEWLINE":
            return "end of line"
        return repr(str(self.value) + "'" * self.primes)


_OPS = set("+-*/^()=,:;{}")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def err(msg, tok=""):
        raise ParseError(line, col, msg, tok)

    while i < n:
        ch = text[i]
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            tokens.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            name = text[i:j]
            primes = 0
            while j < n and text[j] == "'":
                primes += 1
                j += 1
            if primes > 2:
                raise ParseError(line, start_col, "at most two primes are allowed", name)
            col += j - i
            i = j
            tokens.append(Token("IDENT", name, line, start_col, primes))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and not (j + 1 < n and text[j + 1] == "."):
                j += 1
                if j >= n or not text[j].isdigit():
                    raise ParseError(line, start_col, "malformed number", text[i:j])
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            lit = text[i:j]
            col += j - i
            i = j
            tokens.append(Token("NUMBER", _parse_number(lit, line, start_col), line, start_col))
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise ParseError(line, start_col, "unterminated string")
            value = text[i + 1 : j]
            col += j + 1 - i
            i = j + 1
            tokens.append(Token("STRING", value, line, start_col))
            continue
        if ch == "." and i + 1 < n and text[i + 1] == ".":
            tokens.append(Token("OP", "..", line, start_col))
            i += 2
            col += 2
            continue
        if ch in _OPS:
            tokens.append(Token("OP", ch, line, start_col))
            i += 1
            col += 1
            continue
        err(f"unexpected character {ch!r}", ch)
    tokens.append(Token("EOF", None, line, col))
    return tokens


def _parse_number(lit: str, line: int, col: int) -> Fraction:
    """Exact rational value of a decimal/scientific literal (1.25 -> 5/4)."""
    mantissa, exp = lit, 0
    for e in ("e", "E"):
        if e in lit:
            mantissa, exp_str = lit.split(e, 1)
            exp = int(exp_str)
            break
    try:
        value = Fraction(mantissa)
    except (ValueError, ZeroDivisionError):
        raise ParseError(line, col, "malformed number", lit) from None
    return value * Fraction(10) ** exp


# ---------------------------------------------------------------------------
# expression AST and parser (precedence climbing)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Fraction
    line: int
    col: int


@dataclass(frozen=True)
class Name:
    name: str
    primes: int
    line: int
    col: int


@dataclass(frozen=True)
class TimeRef:
    line: int
    col: int


@dataclass(frozen=True)
class SigRef:
    name: str
    order: int
    line: int
    col: int


@dataclass(frozen=True)
class Neg:
    operand: object
    line: int
    col: int


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: object
    rhs: object
    line: int
    col: int


ExprNode = Union[Num, Name, TimeRef, SigRef, Neg, BinOp]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


class _ExprParser:
    def __init__(self, tokens: list[Token], pos: int = 0):
        self.tokens = tokens
        self.pos = pos

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(tok.line, tok.col, message, tok.describe())

    def parse(self, min_prec: int = 1) -> ExprNode:
        lhs = self.atom()
        while True:
            tok = self.peek()
            if tok.type != "OP" or tok.value not in _PREC:
                return lhs
            prec = _PREC[tok.value]
            if prec < min_prec:
                return lhs
            self.advance()
            if tok.value == "/":
                rhs_tok = self.peek()
                if rhs_tok.type != "NUMBER":
                    self.fail("division requires a numeric literal", rhs_tok)
                if rhs_tok.value == 0:
                    self.fail("division by zero", rhs_tok)
                self.advance()
                rhs: ExprNode = Num(rhs_tok.value, rhs_tok.line, rhs_tok.col)
            elif tok.value == "^":
                rhs_tok = self.peek()
                if rhs_tok.type != "NUMBER" or rhs_tok.value.denominator != 1 or rhs_tok.value < 0:
                    self.fail("exponent must be a nonnegative integer", rhs_tok)
                self.advance()
                rhs = Num(rhs_tok.value, rhs_tok.line, rhs_tok.col)
            else:
                # left-associative + - *; climb one level
                rhs = self.parse(prec + 1)
            lhs = BinOp(tok.value, lhs, rhs, tok.line, tok.col)

    def atom(self) -> ExprNode:
        tok = self.peek()
        if tok.type == "NUMBER":
            self.advance()
            return Num(tok.value, tok.line, tok.col)
        if tok.type == "OP" and tok.value == "-":
            self.advance()
            operand = self.parse(2)  # binds looser than * and ^
            return Neg(operand, tok.line, tok.col)
        if tok.type == "OP" and tok.value == "(":
            self.advance()
            inner = self.parse(1)
            closing = self.peek()
            if closing.type != "OP" or closing.value != ")":
                self.fail("expected closing parenthesis", closing)
            self.advance()
            return inner
        if tok.type == "IDENT":
            if tok.value in ("sig", "dsig"):
                return self.signal_ref()
            self.advance()
            if tok.value == "t":
                if tok.primes:
                    self.fail("'t' is reserved for time and cannot be primed", tok)
                return TimeRef(tok.line, tok.col)
            return Name(tok.value, tok.primes, tok.line, tok.col)
        self.fail("expected operand", tok)

    def signal_ref(self) -> SigRef:
        head = self.advance()  # 'sig' or 'dsig'
        paren = self.peek()
        if paren.type != "OP" or paren.value != "(":
            self.fail("expected '(' after signal reference", paren)
        self.advance()
        inner_tok = self.peek()
        if inner_tok.type == "IDENT" and inner_tok.value in ("sig", "dsig"):
            if head.value == "sig":
                self.fail("sig() takes a signal name", inner_tok)
            inner = self.signal_ref()
            name, order = inner.name, inner.order
        elif inner_tok.type == "IDENT":
            self.advance()
            name, order = inner_tok.value, 0
        else:
            self.fail("expected signal name", inner_tok)
        closing = self.peek()
        if closing.type != "OP" or closing.value != ")":
            self.fail("expected closing parenthesis in signal reference", closing)
        self.advance()
        if head.value == "dsig":
            order += 1
        return SigRef(name, order, head.line, head.col)


def parse_expr(text: str) -> ExprNode:
    """Parse an expression into its raw syntax tree (identifiers unresolved)."""
    tokens = [t for t in tokenize(text) if t.type != "NEWLINE"]
    parser = _ExprParser(tokens)
    tree = parser.parse()
    tail = parser.peek()
    if tail.type != "EOF":
        parser.fail("unexpected trailing input", tail)
    return tree


# ---------------------------------------------------------------------------
# resolution: AST -> canonical Expr
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExprContext:
    """Declared names visible to an expression."""

    coords: tuple[str, ...] = ()
    params: frozenset = frozenset()
    signals: Mapping[str, ForcingSignal] = field(default_factory=dict)
    allow_acceleration: bool = True


def resolve_expr(node: ExprNode, ctx: ExprContext):
    """Lower an AST into a raw tree over Symbols and rationals."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, TimeRef):
        return TAU
    if isinstance(node, SigRef):
        sig = ctx.signals.get(node.name)
        if sig is None:
            raise UndeclaredSymbolError(
                node.line, node.col, f"undeclared signal '{node.name}'", node.name
            )
        return signal_symbol(sig, node.order)
    if isinstance(node, Name):
        if node.name in ctx.coords:
            i = ctx.coords.index(node.name)
            if node.primes == 0:
                return coord(i)
            if node.primes == 1:
                return vel(i)
            if not ctx.allow_acceleration:
                raise ParseError(
                    node.line,
                    node.col,
                    "acceleration symbols are not permitted here",
                    node.name + "''",
                )
            return acc(i)
        if node.name in ctx.params:
            if node.primes:
                raise ParseError(
                    node.line, node.col, f"parameter '{node.name}' cannot be primed"
                )
            return param(node.name)
        if node.name in ctx.signals:
            raise ParseError(
                node.line,
                node.col,
                f"signal '{node.name}' must be referenced as sig({node.name})",
            )
        raise UndeclaredSymbolError(
            node.line, node.col, f"undeclared symbol '{node.name}'", node.name
        )
    if isinstance(node, Neg):
        return ("neg", resolve_expr(node.operand, ctx))
    if isinstance(node, BinOp):
        lhs = resolve_expr(node.lhs, ctx)
        if node.op == "^":
            return ("pow", lhs, int(node.rhs.value))
        if node.op == "/":
            return ("div", lhs, node.rhs.value)
        rhs = resolve_expr(node.rhs, ctx)
        return ({"+": "add", "-": "sub", "*": "mul"}[node.op], lhs, rhs)
    raise TypeError(f"unknown AST node {node!r}")


def text_to_expr(text: str, ctx: ExprContext) -> Expr:
    """parse, resolve and canonicalize in one step."""
    return normalize(resolve_expr(parse_expr(text), ctx))


# ---------------------------------------------------------------------------
# canonical rendering
# ---------------------------------------------------------------------------

def format_expr(e: Expr, coords: tuple[str, ...] = ()) -> str:
    """Deterministic re-parseable rendering of a canonical expression.

    Factors print parameters first, then signals, time and jet coordinates;
    rational coefficients render as p/q prefixes. Coordinates beyond the
    given names fall back to x, y, z, x3, ...
    """
    from .symexpr import format_basic

    return format_basic(e, coords)


# ---------------------------------------------------------------------------
# system files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemSpec:
    """A fully-declared mechanical system ready for derivation/simulation."""

    name: str
    coords: tuple[str, ...]
    params: dict  # name -> Fraction
    signals: dict  # name -> ForcingSignal
    phi: VerticalOneForm
    lagrangian_decl: Optional[Expr] = None
    antiexact_decl: Optional[VerticalOneForm] = None
    oracle_forces: Optional[tuple[Expr, ...]] = None
    init: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = None
    time: Optional[tuple[float, float, float]] = None
    integrator: str = "rk4"

    @property
    def n(self) -> int:
        return len(self.coords)

    def param_values(self) -> dict:
        return {k: float(v) for k, v in self.params.items()}

    @property
    def has_declared_split(self) -> bool:
        return self.lagrangian_decl is not None or self.antiexact_decl is not None

    def declared_decomposition(self) -> Decomposition:
        """Validate and return the user-declared split (may raise
        ReconstructionError)."""
        if not self.has_declared_split:
            raise MechError(f"system '{self.name}' declares no split")
        lag = self.lagrangian_decl if self.lagrangian_decl is not None else ZERO
        anti = (
            self.antiexact_decl
            if self.antiexact_decl is not None
            else VerticalOneForm.zero(self.n)
        )
        return accept_user_split(lag, anti, self.phi)

    def canonical_decomposition(self) -> Decomposition:
        return decompose(self.phi)

    def eom(self) -> EquationsOfMotion:
        return dual_spencer(self.phi)

    def context(self) -> ExprContext:
        return ExprContext(
            coords=self.coords,
            params=frozenset(self.params),
            signals=dict(self.signals),
            allow_acceleration=False,
        )


class _SystemParser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.coords: list[str] = []
        self.params: dict = {}
        self.signals: dict = {}
        self.momentum_nodes: dict = {}
        self.force_nodes: dict = {}
        self.lagrangian_node = None
        self.antiexact_nodes: dict = {}  # (name, primed) -> node
        self.oracle_nodes: dict = {}
        self.init_nodes: dict = {}  # (name, primed) -> Fraction
        self.time_clause = None
        self.integrator = "rk4"
        self.declared_positions: dict = {}

    # token plumbing -------------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(tok.line, tok.col, message, tok.describe())

    def skip_separators(self):
        while self.peek().type == "NEWLINE" or (
            self.peek().type == "OP" and self.peek().value == ";"
        ):
            self.advance()

    def expect_op(self, value: str) -> Token:
        tok = self.peek()
        if tok.type != "OP" or tok.value != value:
            self.fail(f"expected '{value}'", tok)
        return self.advance()

    def expect_ident(self, what="identifier") -> Token:
        tok = self.peek()
        if tok.type != "IDENT":
            self.fail(f"expected {what}", tok)
        return self.advance()

    def expect_end_of_statement(self):
        tok = self.peek()
        if tok.type == "NEWLINE" or (tok.type == "OP" and tok.value in (";", "}")):
            return
        if tok.type == "EOF":
            return
        self.fail("expected end of statement", tok)

    def number_literal(self) -> Fraction:
        neg = False
        tok = self.peek()
        if tok.type == "OP" and tok.value == "-":
            self.advance()
            neg = True
            tok = self.peek()
        if tok.type != "NUMBER":
            self.fail("expected a number", tok)
        self.advance()
        value = tok.value
        nxt = self.peek()
        if nxt.type == "OP" and nxt.value == "/":
            self.advance()
            den = self.peek()
            if den.type != "NUMBER":
                self.fail("expected a number after '/'", den)
            if den.value == 0:
                self.fail("division by zero", den)
            self.advance()
            value = value / den.value
        return -value if neg else value

    def parse_expression_node(self) -> ExprNode:
        parser = _ExprParser(self.tokens, self.pos)
        node = parser.parse()
        self.pos = parser.pos
        return node

    # declarations ---------------------------------------------------------

    def declare(self, tok: Token, kind: str):
        name = tok.value
        if name in RESERVED:
            self.fail(f"'{name}' is reserved", tok)
        if name in self.declared_positions:
            raise DuplicateDeclarationError(
                tok.line, tok.col, f"duplicate declaration of '{name}'", name
            )
        self.declared_positions[name] = (tok.line, tok.col, kind)

    # statement dispatch ----------------------------------------------------

    def parse_system(self) -> SystemSpec:
        self.skip_separators()
        head = self.expect_ident("'system'")
        if head.value != "system":
            self.fail("expected 'system'", head)
        name_tok = self.peek()
        if name_tok.type != "STRING":
            self.fail("expected a quoted system name", name_tok)
        self.advance()
        self.skip_separators()
        self.expect_op("{")
        while True:
            self.skip_separators()
            tok = self.peek()
            if tok.type == "OP" and tok.value == "}":
                self.advance()
                break
            if tok.type == "EOF":
                self.fail("unterminated system block (missing '}')", tok)
            self.statement()
        self.skip_separators()
        if self.peek().type != "EOF":
            self.fail("unexpected input after system block")
        return self.build(name_tok.value)

    def statement(self):
        tok = self.expect_ident("statement keyword")
        kw = tok.value
        handler = {
            "parameter": self.stmt_parameter,
            "coordinate": self.stmt_coordinate,
            "signal": self.stmt_signal,
            "momentum": self.stmt_momentum,
            "force": self.stmt_force,
            "lagrangian": self.stmt_lagrangian,
            "antiexact": self.stmt_antiexact,
            "oracle": self.stmt_oracle,
            "init": self.stmt_init,
            "time": self.stmt_time,
            "integrator": self.stmt_integrator,
        }.get(kw)
        if handler is None:
            self.fail(f"unknown statement '{kw}'", tok)
        handler(tok)
        self.expect_end_of_statement()

    def stmt_parameter(self, _):
        name = self.expect_ident("parameter name")
        if name.primes:
            self.fail("parameter names cannot carry primes", name)
        self.declare(name, "parameter")
        self.expect_op("=")
        self.params[name.value] = self.number_literal()

    def stmt_coordinate(self, _):
        name = self.expect_ident("coordinate name")
        if name.primes:
            self.fail("declare the coordinate without primes", name)
        self.declare(name, "coordinate")
        self.coords.append(name.value)

    def stmt_signal(self, _):
        name = self.expect_ident("signal name")
        self.declare(name, "signal")
        self.expect_op("=")
        kind = self.expect_ident("signal kind")
        self.expect_op("(")
        args = [self.number_literal()]
        while self.peek().type == "OP" and self.peek().value == ",":
            self.advance()
            args.append(self.number_literal())
        self.expect_op(")")
        if kind.value == "polynomial":
            self.signals[name.value] = PolynomialSignal(name.value, tuple(args))
        elif kind.value == "sinusoid":
            if len(args) != 3:
                self.fail("sinusoid takes (amplitude, omega, phase)", kind)
            self.signals[name.value] = SinusoidSignal(name.value, *args)
        else:
            self.fail("signal kind must be polynomial or sinusoid", kind)

    def coordinate_ref(self, allow_prime=False) -> tuple[str, int, Token]:
        tok = self.expect_ident("coordinate name")
        if tok.primes > (1 if allow_prime else 0):
            self.fail("unexpected primes on coordinate reference", tok)
        return tok.value, tok.primes, tok

    def stmt_momentum(self, _):
        name, _, tok = self.coordinate_ref()
        if name in self.momentum_nodes:
            raise DuplicateDeclarationError(
                tok.line, tok.col, f"duplicate momentum clause for '{name}'", name
            )
        self.expect_op(":")
        self.momentum_nodes[name] = (tok, self.parse_expression_node())

    def stmt_force(self, _):
        name, _, tok = self.coordinate_ref()
        if name in self.force_nodes:
            raise DuplicateDeclarationError(
                tok.line, tok.col, f"duplicate force clause for '{name}'", name
            )
        self.expect_op(":")
        self.force_nodes[name] = (tok, self.parse_expression_node())

    def stmt_lagrangian(self, tok):
        if self.lagrangian_node is not None:
            raise DuplicateDeclarationError(
                tok.line, tok.col, "duplicate lagrangian clause", "lagrangian"
            )
        self.expect_op(":")
        self.lagrangian_node = self.parse_expression_node()

    def stmt_antiexact(self, _):
        name, primes, tok = self.coordinate_ref(allow_prime=True)
        key = (name, primes)
        if key in self.antiexact_nodes:
            raise DuplicateDeclarationError(
                tok.line, tok.col, f"duplicate antiexact clause for '{name}'", name
            )
        self.expect_op(":")
        self.antiexact_nodes[key] = (tok, self.parse_expression_node())

    def stmt_oracle(self, _):
        name, _, tok = self.coordinate_ref()
        if name in self.oracle_nodes:
            raise DuplicateDeclarationError(
                tok.line, tok.col, f"duplicate oracle clause for '{name}'", name
            )
        self.expect_op(":")
        self.oracle_nodes[name] = (tok, self.parse_expression_node())

    def stmt_init(self, _):
        while True:
            tok = self.expect_ident("coordinate name")
            if tok.primes > 1:
                self.fail("init assigns x or x' only", tok)
            self.expect_op("=")
            value = self.number_literal()
            key = (tok.value, tok.primes)
            if key in self.init_nodes:
                raise DuplicateDeclarationError(
                    tok.line, tok.col, f"duplicate init for '{tok.value}'", tok.value
                )
            self.init_nodes[key] = (tok, value)
            nxt = self.peek()
            if nxt.type == "OP" and nxt.value == ",":
                self.advance()
                continue
            break

    def stmt_time(self, _):
        a = self.number_literal()
        self.expect_op("..")
        b = self.number_literal()
        step_tok = self.expect_ident("'step'")
        if step_tok.value != "step":
            self.fail("expected 'step'", step_tok)
        h = self.number_literal()
        if not b > a:
            self.fail("time interval must satisfy b > a", step_tok)
        if not h > 0:
            self.fail("step must be positive", step_tok)
        self.time_clause = (float(a), float(b), float(h))

    def stmt_integrator(self, _):
        tok = self.expect_ident("integrator name")
        if tok.value not in ("rk4", "rkf45"):
            self.fail("integrator must be rk4 or rkf45", tok)
        self.integrator = tok.value

    # assembly ---------------------------------------------------------------

    def require_coordinate(self, name: str, tok: Token):
        if name not in self.coords:
            raise UndeclaredSymbolError(
                tok.line, tok.col, f"undeclared coordinate '{name}'", name
            )

    def build(self, sys_name: str) -> SystemSpec:
        if not self.coords:
            self.fail("system declares no coordinates")
        ctx = ExprContext(
            coords=tuple(self.coords),
            params=frozenset(self.params),
            signals=dict(self.signals),
            allow_acceleration=False,
        )

        def to_expr(pair) -> Expr:
            _, node = pair
            return normalize(resolve_expr(node, ctx))

        for name, pair in {**self.momentum_nodes, **self.force_nodes, **self.oracle_nodes}.items():
            self.require_coordinate(name, pair[0])
        for (name, _), pair in self.antiexact_nodes.items():
            self.require_coordinate(name, pair[0])
        for (name, _), pair in self.init_nodes.items():
            self.require_coordinate(name, pair[0])

        n = len(self.coords)
        default_momentum = None
        if "m" in self.params:
            m = Expr.var(param("m"))
            default_momentum = [m * Expr.var(vel(i)) for i in range(n)]
        F, Pi = [], []
        for i, cname in enumerate(self.coords):
            F.append(to_expr(self.force_nodes[cname]) if cname in self.force_nodes else ZERO)
            if cname in self.momentum_nodes:
                Pi.append(to_expr(self.momentum_nodes[cname]))
            elif default_momentum is not None:
                Pi.append(default_momentum[i])
            else:
                Pi.append(ZERO)
        phi = VerticalOneForm(tuple(F), tuple(Pi))

        lagrangian = (
            normalize(resolve_expr(self.lagrangian_node, ctx))
            if self.lagrangian_node is not None
            else None
        )
        antiexact = None
        if self.antiexact_nodes:
            aF = [ZERO] * n
            aPi = [ZERO] * n
            for (cname, primes), pair in self.antiexact_nodes.items():
                i = self.coords.index(cname)
                if primes == 0:
                    aF[i] = to_expr(pair)
                else:
                    aPi[i] = to_expr(pair)
            antiexact = VerticalOneForm(tuple(aF), tuple(aPi))
        elif lagrangian is not None:
            antiexact = VerticalOneForm.zero(n)

        oracle = None
        if self.oracle_nodes:
            oracle = tuple(
                to_expr(self.oracle_nodes[cname]) if cname in self.oracle_nodes else ZERO
                for cname in self.coords
            )

        init = None
        if self.init_nodes:
            x0 = [0.0] * n
            v0 = [0.0] * n
            for (cname, primes), (_, value) in self.init_nodes.items():
                i = self.coords.index(cname)
                if primes == 0:
                    x0[i] = float(value)
                else:
                    v0[i] = float(value)
            init = (tuple(x0), tuple(v0))

        return SystemSpec(
            name=sys_name,
            coords=tuple(self.coords),
            params=dict(self.params),
            signals=dict(self.signals),
            phi=phi,
            lagrangian_decl=lagrangian,
            antiexact_decl=antiexact,
            oracle_forces=oracle,
            init=init,
            time=self.time_clause,
            integrator=self.integrator,
        )


def parse_system(text: str) -> SystemSpec:
    """Parse a system-definition file into a SystemSpec.

    Declared splits are stored, not validated here; validation happens when
    a decomposition is requested (so verification commands can report the
    mismatch instead of refusing to load the file).
    """
    return _SystemParser(tokenize(text)).parse_system()


# ---------------------------------------------------------------------------
# library presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, str] = {
    "harmonic": """\
system "harmonic" {
  parameter m = 1
  parameter k = 1
  coordinate x
  force x: -k*x
  momentum x: m*x'
  lagrangian: m*x'^2/2 - k*x^2/2
  oracle x: -k*x
  init x = 1, x' = 0
  time 0 .. 10 step 1e-3
}
""",
    "damped_ho": """\
system "damped_ho" {
  parameter m = 1
  parameter k = 1
  parameter b = 0.1
  coordinate x
  signal f = sinusoid(0.3, 1.2, 0)
  force x: -k*x - b*x' + sig(f)
  momentum x: m*x'
  lagrangian: m*x'^2/2 - k*x^2/2
  antiexact x: -b*x' + sig(f)
  oracle x: -k*x - b*x' + sig(f)
  init x = 1, x' = 0
  time 0 .. 20 step 1e-3
}
""",
    "duffing": """\
system "duffing" {
  parameter m = 1
  parameter a = 1
  parameter b = 0.3
  coordinate x
  force x: -a*x^3 - b*x'
  momentum x: m*x'
  oracle x: -a*x^3 - b*x'
  init x = 1, x' = 0
  time 0 .. 20 step 1e-3
}
""",
    "vanderpol": """\
system "vanderpol" {
  parameter m = 1
  parameter k = 1
  parameter b0 = 1
  coordinate x
  force x: -k*x - b0*(x^2 - 1)*x'
  momentum x: m*x'
  oracle x: -k*x - b0*(x^2 - 1)*x'
  init x = 1, x' = 0
  time 0 .. 20 step 1e-3
}
""",
}


def preset(name: str) -> SystemSpec:
    if name not in PRESETS:
        raise MechError(f"unknown preset '{name}' (have: {', '.join(sorted(PRESETS))})")
    return parse_system(PRESETS[name])
