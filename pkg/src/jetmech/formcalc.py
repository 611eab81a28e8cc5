"""Differential forms on the first-order jet space (coordinates t, x^i, v^i).

Provides the exterior derivative of functions and vertical one-forms, the
interior product with the radius field, the homotopy (Poincare contraction)
operator, and the exact/anti-exact decomposition of a dynamical one-form
into d(Lagrangian) plus a homotopy-annulled remainder.

Decomposition works modulo dt components (the vertical quotient): the dt
part of an exact differential never contributes to dynamics, so one-forms
are compared and reconstructed through their dx/dv components only. The
homotopy operator contracts along the fiber radius x d/dx + v d/dv with
time held fixed; this is the unique convention for which the contraction
identity and the annulment of the remainder hold exactly on the vertical
quotient, for arbitrary polynomial components including time-dependent
ones.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AdmissibilityError, ReconstructionError
from .symexpr import (
    FIBER_SCALED_KINDS,
    TAU,
    Expr,
    SymbolKind,
    ZERO,
    coord,
    format_basic,
    partial,
    scaling_integral,
    vel,
)


def _check_acceleration_free(e: Expr, what: str):
    if e.contains_kind(SymbolKind.ACC):
        raise ValueError(f"{what} must not contain acceleration symbols")


# ---------------------------------------------------------------------------
# form types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerticalOneForm:
    """F_i dx^i + Pi_i dv^i with no dt component and acceleration-free parts."""

    F: tuple[Expr, ...]
    Pi: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.F) != len(self.Pi):
            raise ValueError("F and Pi must have the same length")
        n = len(self.F)
        for e in (*self.F, *self.Pi):
            _check_acceleration_free(e, "one-form components")
            if e.max_coordinate_index() >= n:
                raise ValueError("component references a coordinate index >= n")

    @property
    def n(self) -> int:
        return len(self.F)

    @property
    def is_zero(self) -> bool:
        return all(e.is_zero for e in (*self.F, *self.Pi))

    @classmethod
    def zero(cls, n: int) -> "VerticalOneForm":
        return cls((ZERO,) * n, (ZERO,) * n)

    def __add__(self, other: "VerticalOneForm") -> "VerticalOneForm":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return VerticalOneForm(
            tuple(a + b for a, b in zip(self.F, other.F)),
            tuple(a + b for a, b in zip(self.Pi, other.Pi)),
        )

    def __neg__(self) -> "VerticalOneForm":
        return VerticalOneForm(tuple(-e for e in self.F), tuple(-e for e in self.Pi))

    def __sub__(self, other: "VerticalOneForm") -> "VerticalOneForm":
        return self + (-other)


@dataclass(frozen=True)
class GeneralOneForm:
    """T dt + F_i dx^i + Pi_i dv^i (acceleration-free components)."""

    T: Expr
    F: tuple[Expr, ...]
    Pi: tuple[Expr, ...]

    def __post_init__(self):
        _check_acceleration_free(self.T, "one-form components")

    @property
    def n(self) -> int:
        return len(self.F)

    def vertical(self) -> VerticalOneForm:
        """Drop the dt component."""
        return VerticalOneForm(self.F, self.Pi)


# basis covectors are keyed ("t",), ("x", i) or ("v", i); two-form keys are
# ordered pairs under dt < dx^0 < ... < dx^{n-1} < dv^0 < ...
BasisKey = tuple


def _basis_rank(b: BasisKey):
    tag = b[0]
    if tag == "t":
        return (0, 0)
    return (1, b[1]) if tag == "x" else (2, b[1])


def _fiber_coordinate(b: BasisKey) -> Expr | None:
    """Radius-field component dual to a basis covector (None for dt)."""
    if b[0] == "x":
        return Expr.var(coord(b[1]))
    if b[0] == "v":
        return Expr.var(vel(b[1]))
    return None


@dataclass(frozen=True)
class TwoForm:
    """Exterior 2-form stored on the ordered basis; absent keys are zero."""

    coeffs: tuple[tuple[tuple[BasisKey, BasisKey], Expr], ...]

    @classmethod
    def from_dict(cls, data: dict) -> "TwoForm":
        items = tuple(
            sorted(
                ((pair, e) for pair, e in data.items() if not e.is_zero),
                key=lambda it: (_basis_rank(it[0][0]), _basis_rank(it[0][1])),
            )
        )
        for (b1, b2), _ in items:
            if not _basis_rank(b1) < _basis_rank(b2):
                raise ValueError("two-form keys must be strictly ordered pairs")
        return cls(items)

    def coefficient(self, b1: BasisKey, b2: BasisKey) -> Expr:
        """Coefficient of db1 ^ db2, with antisymmetry applied."""
        sign = 1
        if _basis_rank(b1) > _basis_rank(b2):
            b1, b2, sign = b2, b1, -1
        elif _basis_rank(b1) == _basis_rank(b2):
            return ZERO
        for pair, e in self.coeffs:
            if pair == (b1, b2):
                return e if sign == 1 else -e
        return ZERO

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def fiber_block_is_zero(self) -> bool:
        """True when every dx^dx, dx^dv, dv^dv coefficient vanishes."""
        return all(b1[0] == "t" for (b1, _), _ in self.coeffs)


@dataclass(frozen=True)
class Decomposition:
    """A Lagrangian plus the anti-exact remainder of a dynamical one-form.

    ``canonical-homotopy`` decompositions satisfy homotopy(anti_exact) = 0
    exactly; ``user-declared`` ones only promise exact reconstruction.
    """

    lagrangian: Expr
    anti_exact: VerticalOneForm
    mode: str  # "canonical-homotopy" | "user-declared"


# ---------------------------------------------------------------------------
# exterior derivatives
# ---------------------------------------------------------------------------


def d0(e: Expr, n: int | None = None) -> GeneralOneForm:
    """Exterior derivative of a function on the 1-jet space.

    The dt coefficient includes the chain rule through signal symbols.
    """
    _check_acceleration_free(e, "d0 input")
    if n is None:
        n = max(e.max_coordinate_index() + 1, 1)
    return GeneralOneForm(
        partial(e, TAU),
        tuple(partial(e, coord(i)) for i in range(n)),
        tuple(partial(e, vel(i)) for i in range(n)),
    )


def d1(omega: VerticalOneForm) -> TwoForm:
    """Exterior derivative of a vertical one-form, collected antisymmetrically."""
    n = omega.n
    acc: dict = {}

    def add(b1: BasisKey, b2: BasisKey, e: Expr):
        if e.is_zero:
            return
        sign = 1
        if _basis_rank(b1) > _basis_rank(b2):
            b1, b2, sign = b2, b1, -1
        elif _basis_rank(b1) == _basis_rank(b2):
            return
        key = (b1, b2)
        acc[key] = acc.get(key, ZERO) + (e if sign == 1 else -e)

    basis = [("t",)] + [("x", j) for j in range(n)] + [("v", j) for j in range(n)]

    def partial_along(e: Expr, b: BasisKey) -> Expr:
        if b[0] == "t":
            return partial(e, TAU)
        return partial(e, coord(b[1]) if b[0] == "x" else vel(b[1]))

    for i in range(n):
        for b in basis:
            add(b, ("x", i), partial_along(omega.F[i], b))
            add(b, ("v", i), partial_along(omega.Pi[i], b))
    return TwoForm.from_dict(acc)


# ---------------------------------------------------------------------------
# radius contraction and homotopy
# ---------------------------------------------------------------------------


def interior_radius(omega: VerticalOneForm) -> Expr:
    """Contraction with the radius field: sum_i F_i x^i + Pi_i v^i."""
    out = ZERO
    for i in range(omega.n):
        out = out + omega.F[i] * Expr.var(coord(i)) + omega.Pi[i] * Expr.var(vel(i))
    return out


def _require_admissible(omega: VerticalOneForm):
    for e in (*omega.F, *omega.Pi):
        for sym in e.symbols():
            if sym.kind == SymbolKind.SIGNAL and not sym.signal.admissible:
                raise AdmissibilityError(sym.signal.name)


def homotopy(omega: VerticalOneForm) -> Expr:
    """Poincare contraction of a vertical one-form into a function.

    Integrates the components along the fiber ray (s*x, s*v) against the
    unscaled radius: H(omega) = sum_i [int_0^1 F_i(t, s x, s v) ds] x^i +
    [int_0^1 Pi_i(t, s x, s v) ds] v^i. The result vanishes at the fiber
    origin x = v = 0. Sinusoid signals are refused (admissibility contract).
    """
    _require_admissible(omega)
    out = ZERO
    for i in range(omega.n):
        out = out + scaling_integral(omega.F[i], FIBER_SCALED_KINDS) * Expr.var(coord(i))
        out = out + scaling_integral(omega.Pi[i], FIBER_SCALED_KINDS) * Expr.var(vel(i))
    return out


def homotopy_two_form(eta: TwoForm, n: int) -> VerticalOneForm:
    """Fiber homotopy on two-forms; dt^... blocks land in the dt slot and drop.

    For a fiber block coefficient a at dy^i ^ dy^j, contributes
    [int_0^1 s a(t, s x, s v) ds] (y^i dy^j - y^j dy^i).
    """
    comps: dict = {("x", i): ZERO for i in range(n)}
    comps.update({("v", i): ZERO for i in range(n)})
    for (b1, b2), a in eta.coeffs:
        y1 = _fiber_coordinate(b1)
        y2 = _fiber_coordinate(b2)
        a_int = scaling_integral(a, FIBER_SCALED_KINDS, weight=1)
        if y1 is not None and b2[0] != "t":
            comps[b2] = comps[b2] + a_int * y1
        if y2 is not None and b1[0] != "t":
            comps[b1] = comps[b1] - a_int * y2
    return VerticalOneForm(
        tuple(comps[("x", i)] for i in range(n)),
        tuple(comps[("v", i)] for i in range(n)),
    )


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------


def decompose(phi: VerticalOneForm) -> Decomposition:
    """Split phi = d(L) + phi_a with H(phi_a) = 0, both exactly.

    L is the homotopy of phi; the remainder is phi minus the vertical part
    of dL. Raises AdmissibilityError when a sinusoid signal blocks the
    homotopy integral.
    """
    lagrangian = homotopy(phi)
    anti_exact = phi - d0(lagrangian, n=phi.n).vertical()
    return Decomposition(lagrangian, anti_exact, mode="canonical-homotopy")


def reconstruction_residual(dec: Decomposition, phi: VerticalOneForm) -> VerticalOneForm:
    """phi minus (vertical part of d(L) plus anti-exact part); zero iff exact."""
    return phi - (d0(dec.lagrangian, n=phi.n).vertical() + dec.anti_exact)


def accept_user_split(
    lagrangian: Expr, anti_exact: VerticalOneForm, phi: VerticalOneForm
) -> Decomposition:
    """Validate a physically-motivated split against the source form.

    The split need not be homotopy-annulled (the canonical one is), but the
    vertical part of d(L) plus the declared remainder must rebuild phi
    exactly; otherwise the residual one-form is reported.
    """
    dec = Decomposition(lagrangian, anti_exact, mode="user-declared")
    residual = reconstruction_residual(dec, phi)
    if not residual.is_zero:
        raise ReconstructionError(
            residual,
            "split reconstruction residual: " + format_one_form(residual),
        )
    return dec


def format_one_form(omega: VerticalOneForm, coords: tuple[str, ...] = ()) -> str:
    """Readable rendering like '(-b*x' + sig(f)) dx + m*x' dx''."""
    def cname(i):
        if i < len(coords):
            return coords[i]
        return ("x", "y", "z")[i] if i < 3 else f"x{i}"

    parts = []
    for i in range(omega.n):
        if not omega.F[i].is_zero:
            parts.append(f"({format_basic(omega.F[i], coords)}) d{cname(i)}")
        if not omega.Pi[i].is_zero:
            parts.append(f"({format_basic(omega.Pi[i], coords)}) d{cname(i)}'")
    return " + ".join(parts) if parts else "0"


def format_two_form(eta: TwoForm, coords: tuple[str, ...] = ()) -> str:
    def cname(i):
        if i < len(coords):
            return coords[i]
        return ("x", "y", "z")[i] if i < 3 else f"x{i}"

    def bname(b: BasisKey) -> str:
        if b[0] == "t":
            return "dt"
        return "d" + cname(b[1]) + ("" if b[0] == "x" else "'")

    parts = [
        f"({format_basic(e, coords)}) {bname(b1)}^{bname(b2)}"
        for (b1, b2), e in eta.coeffs
    ]
    return " + ".join(parts) if parts else "0"
