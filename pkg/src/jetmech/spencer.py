"""Dual Spencer dynamics: from a dynamical one-form to equations of motion.

The total time derivative promotes 1-jet expressions to 2-jet expressions
(acceleration symbols are the second-order fiber coordinates). The dual
Spencer operator turns a vertical one-form F_i dx^i + Pi_i dv^i into the
residuals R_i = F_i - d(Pi_i)/dt, whose joint vanishing is the dynamical
law; it reduces to the Euler-Lagrange variational derivative when the form
is exact. The Spencer residual of a sampled section measures, by finite
differences, how far the section is from being the prolongation of a
curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MechError, ReconstructionError
from .formcalc import (
    Decomposition,
    VerticalOneForm,
    format_one_form,
    reconstruction_residual,
)
from .symexpr import TAU, Expr, SymbolKind, acc, coord, partial, vel


@dataclass(frozen=True)
class EquationsOfMotion:
    """Per-coordinate residuals R_i; R_i = 0 for all i is the dynamical law.

    Each residual is affine in the acceleration symbols. ``source_phi``
    and ``split_mode`` record where the equations came from.
    """

    residuals: tuple[Expr, ...]
    source_phi: VerticalOneForm | None = None
    split_mode: str | None = None

    @property
    def n(self) -> int:
        return len(self.residuals)

    def normalized(self) -> tuple[Expr, ...]:
        """Residuals with sign fixed so acceleration terms enter positively.

        Display convention only; R = 0 and -R = 0 are the same equation.
        """
        out = []
        for r in self.residuals:
            flip = False
            for mono, c in r.terms:
                if any(sym.kind == SymbolKind.ACC for sym, _ in mono):
                    flip = c < 0
                    break
            out.append(-r if flip else r)
        return tuple(out)


@dataclass(frozen=True)
class NumericSection:
    """Sampled jet-space section (t_k, x_k, v_k) on a uniform grid."""

    taus: np.ndarray
    xs: np.ndarray  # shape (N, n)
    vs: np.ndarray  # shape (N, n)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "xs", np.atleast_2d(np.asarray(self.xs, dtype=float)))
        object.__setattr__(self, "vs", np.atleast_2d(np.asarray(self.vs, dtype=float)))
        if self.xs.shape[0] != taus.shape[0]:
            object.__setattr__(self, "xs", self.xs.T)
            object.__setattr__(self, "vs", self.vs.T)
        if len(taus) >= 2:
            steps = np.diff(taus)
            h = steps[0]
            if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
                raise ValueError("section grid must be uniform and increasing")

    @property
    def h(self) -> float:
        return float(self.taus[1] - self.taus[0])

    @property
    def n(self) -> int:
        return self.xs.shape[1]


def total_time_derivative(e: Expr) -> Expr:
    """Total derivative along sections: d/dt + v^j d/dx^j + a^j d/dv^j.

    Raises ValueError when the input already contains acceleration symbols
    (one total derivative raises jet order by exactly one).
    """
    if e.contains_kind(SymbolKind.ACC):
        raise ValueError("total time derivative input must be acceleration-free")
    out = partial(e, TAU)
    n = e.max_coordinate_index() + 1
    for j in range(n):
        out = out + partial(e, coord(j)) * Expr.var(vel(j))
        out = out + partial(e, vel(j)) * Expr.var(acc(j))
    return out


def dual_spencer(phi: VerticalOneForm) -> EquationsOfMotion:
    """Dynamical residuals R_i = F_i - d(Pi_i)/dt (the momentum block itself
    contributes nothing beyond its total derivative)."""
    residuals = tuple(
        phi.F[i] - total_time_derivative(phi.Pi[i]) for i in range(phi.n)
    )
    return EquationsOfMotion(residuals, source_phi=phi)


def variational_derivative(lagrangian: Expr, n: int | None = None) -> tuple[Expr, ...]:
    """Euler-Lagrange components dL/dx^i - d/dt(dL/dv^i)."""
    if lagrangian.contains_kind(SymbolKind.ACC):
        raise ValueError("Lagrangian must be acceleration-free")
    if n is None:
        n = max(lagrangian.max_coordinate_index() + 1, 1)
    return tuple(
        partial(lagrangian, coord(i))
        - total_time_derivative(partial(lagrangian, vel(i)))
        for i in range(n)
    )


def assemble_with_split(dec: Decomposition, phi: VerticalOneForm) -> EquationsOfMotion:
    """Equations of motion from a Lagrangian/anti-exact split.

    The split must reconstruct phi; the result is checked against the
    direct dual-Spencer residuals of phi (they agree exactly by linearity).
    """
    residual_form = reconstruction_residual(dec, phi)
    if not residual_form.is_zero:
        raise ReconstructionError(
            residual_form,
            "split reconstruction residual: " + format_one_form(residual_form),
        )
    var_der = variational_derivative(dec.lagrangian, n=phi.n)
    anti = dual_spencer(dec.anti_exact)
    combined = tuple(var_der[i] + anti.residuals[i] for i in range(phi.n))
    direct = dual_spencer(phi)
    if combined != direct.residuals:
        raise MechError("split assembly disagrees with direct dual-Spencer residuals")
    return EquationsOfMotion(combined, source_phi=phi, split_mode=dec.mode)


def spencer_residual(section: NumericSection) -> np.ndarray:
    """Sampled Spencer residual r_k = (dx/dt)|_k - v_k, shape (N, n).

    Central differences in the interior, one-sided second-order stencils at
    the endpoints; identically zero (to O(h^2)) iff the section is the
    prolongation of a curve.
    """
    if len(section.taus) < 3:
        raise ValueError("Spencer residual needs at least 3 samples")
    x, v, h = section.xs, section.vs, section.h
    dxdt = np.empty_like(x)
    dxdt[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
    dxdt[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
    dxdt[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * h)
    return dxdt - v
