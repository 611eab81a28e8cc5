"""Numerical layer: integration, oracle comparison, energy audit, variations.

Turns symbolic equations of motion into explicit ODE systems through the
mass-matrix solve, integrates them with fixed-step RK4 or adaptive RKF45
(resampled onto a uniform grid), and provides the verification
instruments: comparison against a directly-declared Newtonian law, the
energy balance ledger, and first-variation / transversality quadrature
along trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import AuditUnsupportedError, MechError, SingularMassError
from .formcalc import Decomposition, VerticalOneForm
from .spencer import EquationsOfMotion, NumericSection, dual_spencer
from .symexpr import (
    TAU,
    Expr,
    Symbol,
    SymbolKind,
    ZERO,
    acc,
    compile_expr,
    coord,
    partial,
    substitute,
    vel,
)

# ---------------------------------------------------------------------------
# linear algebra (tiny systems, explicit pivot threshold semantics)
# ---------------------------------------------------------------------------


def _solve_pivoting(A: list, b: list, threshold: float, state_desc: str) -> list:
    """Gaussian elimination with partial pivoting on small dense systems."""
    n = len(b)
    M = [row[:] for row in A]
    rhs = b[:]
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(M[r][col]))
        pivot = M[pivot_row][col]
        if abs(pivot) < threshold:
            raise SingularMassError(
                f"mass matrix singular (pivot {pivot:.3e} below threshold) at {state_desc}",
            )
        if pivot_row != col:
            M[col], M[pivot_row] = M[pivot_row], M[col]
            rhs[col], rhs[pivot_row] = rhs[pivot_row], rhs[col]
        inv = 1.0 / M[col][col]
        for r in range(col + 1, n):
            factor = M[r][col] * inv
            if factor != 0.0:
                for c in range(col, n):
                    M[r][c] -= factor * M[col][c]
                rhs[r] -= factor * rhs[col]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = rhs[r]
        for c in range(r + 1, n):
            s -= M[r][c] * out[c]
        out[r] = s / M[r][r]
    return out


# ---------------------------------------------------------------------------
# explicit ODE assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplicitODE:
    """First-order system x' = v, v' = a(t, x, v) from affine residuals."""

    n: int
    rhs: Callable[[float, Sequence[float], Sequence[float]], list]
    mass_constant: bool
    params: dict
    pivot_threshold: float
    mass_symbolic: tuple  # n x n tuple of Expr, M_ij = -dR_i/da^j
    force_symbolic: tuple  # n tuple of Expr, c_i = R_i at a = 0


def mass_and_force(eom: EquationsOfMotion) -> tuple[tuple, tuple]:
    """Split affine residuals R = c - M a into (M, c) symbolically."""
    n = eom.n
    zero_acc = {acc(j): ZERO for j in range(n)}
    mass = []
    for i in range(n):
        row = []
        for j in range(n):
            entry = -partial(eom.residuals[i], acc(j))
            if entry.contains_kind(SymbolKind.ACC):
                raise MechError("residuals are not affine in the accelerations")
            row.append(entry)
        mass.append(tuple(row))
    force = tuple(substitute(eom.residuals[i], zero_acc) for i in range(n))
    return tuple(mass), force


def assemble_explicit(
    eom: EquationsOfMotion,
    params: Mapping[str, float],
    pivot_threshold: float = 1e-12,
) -> ExplicitODE:
    """Solve M a = c pointwise for the accelerations.

    M_ij = -dR_i/da^j and c_i = R_i with accelerations zeroed; the solve
    uses partial pivoting and reports the offending state when a pivot
    falls below the threshold. A state-independent mass matrix is detected
    and factored once.
    """
    n = eom.n
    mass_sym, force_sym = mass_and_force(eom)
    params = dict(params)
    state_kinds = (SymbolKind.TIME, SymbolKind.COORD, SymbolKind.VEL, SymbolKind.SIGNAL)
    constant = all(
        not any(s.kind in state_kinds for s in mass_sym[i][j].symbols())
        for i in range(n)
        for j in range(n)
    )
    force_fns = [compile_expr(force_sym[i], params) for i in range(n)]

    if constant:
        M0 = [
            [compile_expr(mass_sym[i][j], params)(0.0, (), ()) for j in range(n)]
            for i in range(n)
        ]
        if n == 1:
            pivot = M0[0][0]
            if abs(pivot) < pivot_threshold:
                raise SingularMassError(
                    f"mass matrix singular (pivot {pivot:.3e} below threshold)"
                )
            inv = 1.0 / pivot
            f0 = force_fns[0]

            def rhs(t, x, v):
                return [f0(t, x, v) * inv]

        else:
            # prefactor by solving against unit vectors
            inv_cols = []
            for j in range(n):
                e = [0.0] * n
                e[j] = 1.0
                inv_cols.append(
                    _solve_pivoting(M0, e, pivot_threshold, "constant mass matrix")
                )
            inv_rows = [[inv_cols[j][i] for j in range(n)] for i in range(n)]

            def rhs(t, x, v):
                c = [fn(t, x, v) for fn in force_fns]
                return [
                    sum(inv_rows[i][j] * c[j] for j in range(n)) for i in range(n)
                ]

    else:
        mass_fns = [
            [compile_expr(mass_sym[i][j], params) for j in range(n)] for i in range(n)
        ]

        def rhs(t, x, v):
            M = [[mass_fns[i][j](t, x, v) for j in range(n)] for i in range(n)]
            c = [fn(t, x, v) for fn in force_fns]
            return _solve_pivoting(
                M, c, pivot_threshold, f"t={t!r}, x={list(x)!r}, v={list(v)!r}"
            )

    return ExplicitODE(
        n=n,
        rhs=rhs,
        mass_constant=constant,
        params=params,
        pivot_threshold=pivot_threshold,
        mass_symbolic=mass_sym,
        force_symbolic=force_sym,
    )


# ---------------------------------------------------------------------------
# trajectories and integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution on a uniform grid, with provenance."""

    taus: np.ndarray
    xs: np.ndarray  # (N, n)
    vs: np.ndarray  # (N, n)
    integrator: str
    h: float
    provenance: str  # "derived-eom" | "newton-oracle" | "analytic"
    truncated: bool = False

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    def section(self) -> NumericSection:
        return NumericSection(self.taus, self.xs, self.vs)


def _finite(state: Sequence[float]) -> bool:
    return all(math.isfinite(s) for s in state)


def _rk4(rhs, x0, v0, taus, h, n):
    N = len(taus) - 1
    xs = [list(x0)]
    vs = [list(v0)]
    x, v = list(x0), list(v0)
    truncated = False
    h2, h6 = h / 2.0, h / 6.0
    for k in range(N):
        t = taus[k]
        try:
            a1 = rhs(t, x, v)
            x2 = [x[i] + h2 * v[i] for i in range(n)]
            v2 = [v[i] + h2 * a1[i] for i in range(n)]
            a2 = rhs(t + h2, x2, v2)
            x3 = [x[i] + h2 * v2[i] for i in range(n)]
            v3 = [v[i] + h2 * a2[i] for i in range(n)]
            a3 = rhs(t + h2, x3, v3)
            x4 = [x[i] + h * v3[i] for i in range(n)]
            v4 = [v[i] + h * a3[i] for i in range(n)]
            a4 = rhs(t + h, x4, v4)
            x = [x[i] + h6 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]) for i in range(n)]
            v = [v[i] + h6 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]) for i in range(n)]
        except (OverflowError, ValueError):
            # float range exceeded inside the compiled law: blow-up
            truncated = True
            break
        if not (_finite(x) and _finite(v)):
            truncated = True
            break
        xs.append(list(x))
        vs.append(list(v))
    return xs, vs, truncated


# Fehlberg 4(5) tableau: 4th-order propagation, 5th-order error estimate.
_RKF_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3554 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_RKF_ERR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)


def _rkf45_knots(rhs, x0, v0, a_t, b_t, n, atol, rtol, max_step):
    """Adaptive pass; returns accepted knots (t, x, v, accel) and a flag."""
    t = a_t
    x, v = list(x0), list(v0)
    accel = rhs(t, x, v)
    knots = [(t, list(x), list(v), list(accel))]
    dt = min(max_step, (b_t - a_t) / 10.0)
    min_step = 1e-14 * (b_t - a_t)
    truncated = False
    while t < b_t - 1e-15 * (b_t - a_t):
        dt = min(dt, b_t - t)
        kx = [None] * 6
        kv = [None] * 6
        try:
            for s in range(6):
                xs_ = [x[i] + dt * sum(_RKF_A[s][r] * kx[r][i] for r in range(s)) for i in range(n)]
                vs_ = [v[i] + dt * sum(_RKF_A[s][r] * kv[r][i] for r in range(s)) for i in range(n)]
                kx[s] = vs_
                kv[s] = rhs(t + _RKF_C[s] * dt, xs_, vs_)
            err = 0.0
            scale = atol + rtol * max(max(abs(c) for c in x), max(abs(c) for c in v), 1.0)
            for i in range(n):
                ex = dt * sum(_RKF_ERR[s] * kx[s][i] for s in range(6))
                ev = dt * sum(_RKF_ERR[s] * kv[s][i] for s in range(6))
                err = max(err, abs(ex), abs(ev))
        except (OverflowError, ValueError):
            truncated = True
            break
        if not math.isfinite(err):
            truncated = True
            break
        if err <= scale:
            x = [x[i] + dt * sum(_RKF_B4[s] * kx[s][i] for s in range(6)) for i in range(n)]
            v = [v[i] + dt * sum(_RKF_B4[s] * kv[s][i] for s in range(6)) for i in range(n)]
            t = t + dt
            if not (_finite(x) and _finite(v)):
                truncated = True
                break
            accel = rhs(t, x, v)
            knots.append((t, list(x), list(v), list(accel)))
        ratio = (scale / err) ** 0.2 if err > 0.0 else 5.0
        dt = min(max_step, dt * min(5.0, max(0.2, 0.9 * ratio)))
        if dt < min_step:
            truncated = True
            break
    return knots, truncated


def _hermite(y0, d0_, y1, d1_, w, dt):
    h00 = (1 + 2 * w) * (1 - w) ** 2
    h10 = w * (1 - w) ** 2
    h01 = w * w * (3 - 2 * w)
    h11 = w * w * (w - 1)
    return h00 * y0 + h10 * dt * d0_ + h01 * y1 + h11 * dt * d1_


def integrate(
    ode: ExplicitODE,
    x0: Sequence[float],
    v0: Sequence[float],
    interval: tuple[float, float],
    h: float,
    method: str = "rk4",
    atol: float = 1e-10,
    rtol: float = 1e-9,
    max_step: float = 0.02,
    provenance: str = "derived-eom",
) -> Trajectory:
    """Integrate to a uniform grid of step ~h over [a, b].

    rk4 is the fixed-step workhorse (global order 4). rkf45 runs adaptively
    under (atol, rtol) and is resampled onto the uniform grid by cubic
    Hermite interpolation; max_step bounds the knot spacing so the
    interpolation error stays at the tolerance level. Non-finite states
    truncate the trajectory and set the flag instead of raising.
    """
    a_t, b_t = float(interval[0]), float(interval[1])
    if not b_t > a_t:
        raise ValueError("time interval must satisfy b > a")
    if not h > 0:
        raise ValueError("step must be positive")
    N = max(1, int(round((b_t - a_t) / h)))
    taus = np.linspace(a_t, b_t, N + 1)
    h_eff = (b_t - a_t) / N
    n = ode.n
    x0 = [float(c) for c in x0]
    v0 = [float(c) for c in v0]
    if len(x0) != n or len(v0) != n:
        raise ValueError("initial condition dimension mismatch")

    if method == "rk4":
        xs, vs, truncated = _rk4(ode.rhs, x0, v0, taus, h_eff, n)
        m = len(xs)
        return Trajectory(
            taus[:m], np.array(xs), np.array(vs), "rk4", h_eff, provenance, truncated
        )
    if method != "rkf45":
        raise ValueError(f"unknown integrator '{method}'")

    knots, truncated = _rkf45_knots(ode.rhs, x0, v0, a_t, b_t, n, atol, rtol, max_step)
    knot_ts = np.array([k[0] for k in knots])
    xs_out, vs_out = [], []
    for t in taus:
        if t > knot_ts[-1] + 1e-12 * (b_t - a_t):
            break
        j = int(np.searchsorted(knot_ts, t, side="right") - 1)
        j = min(max(j, 0), len(knots) - 2) if len(knots) > 1 else 0
        t0, x0k, v0k, a0k = knots[j]
        if len(knots) == 1:
            xs_out.append(list(x0k))
            vs_out.append(list(v0k))
            continue
        t1, x1k, v1k, a1k = knots[j + 1]
        dt = t1 - t0
        w = 0.0 if dt == 0 else (t - t0) / dt
        xs_out.append([_hermite(x0k[i], v0k[i], x1k[i], v1k[i], w, dt) for i in range(n)])
        vs_out.append([_hermite(v0k[i], a0k[i], v1k[i], a1k[i], w, dt) for i in range(n)])
    m = len(xs_out)
    return Trajectory(
        taus[:m], np.array(xs_out), np.array(vs_out), "rkf45", h_eff, provenance,
        truncated or m < len(taus),
    )


# ---------------------------------------------------------------------------
# quadrature and differencing helpers
# ---------------------------------------------------------------------------


def simpson_uniform(y: np.ndarray, h: float) -> float:
    """Composite Simpson on a uniform grid; 3/8 rule absorbs an odd tail."""
    y = np.asarray(y, dtype=float)
    n_int = len(y) - 1
    if n_int < 1:
        raise ValueError("quadrature needs at least two samples")
    if n_int == 1:
        return float(0.5 * h * (y[0] + y[1]))
    if n_int == 3:
        return float(3.0 * h / 8.0 * (y[0] + 3 * y[1] + 3 * y[2] + y[3]))
    if n_int % 2 == 0:
        body, tail = y, 0.0
    else:
        body = y[: n_int - 3 + 1]
        tail = 3.0 * h / 8.0 * (y[-4] + 3 * y[-3] + 3 * y[-2] + y[-1])
    s = body[0] + body[-1] + 4.0 * body[1:-1:2].sum() + 2.0 * body[2:-1:2].sum()
    return float(h / 3.0 * s + tail)


def _diff_order2(y: np.ndarray, h: float) -> np.ndarray:
    """d/dt by central differences, one-sided second-order at the ends."""
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * h)
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
    d[-1] = (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * h)
    return d


def _eval_on_trajectory(e: Expr, traj: Trajectory, params, accels=None) -> np.ndarray:
    fn = compile_expr(e, params, vectorized=True)
    x_rows = traj.xs.T
    v_rows = traj.vs.T
    a_rows = accels.T if accels is not None else None
    out = fn(traj.taus, x_rows, v_rows, a_rows)
    return np.broadcast_to(np.asarray(out, dtype=float), traj.taus.shape).copy()


def accelerations_on(traj: Trajectory, ode: ExplicitODE) -> np.ndarray:
    """Accelerations recomputed from the explicit law at each sample."""
    out = np.empty_like(traj.xs)
    for k in range(len(traj.taus)):
        out[k] = ode.rhs(float(traj.taus[k]), traj.xs[k], traj.vs[k])
    return out


# ---------------------------------------------------------------------------
# oracle comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleReport:
    max_divergence: float
    derived: Trajectory
    oracle: Trajectory


def newton_oracle_eom(oracle_forces: Sequence[Expr], n: int) -> EquationsOfMotion:
    """Hand-written second law m a_i = F_i as residuals, bypassing any
    momentum bookkeeping (requires a parameter named 'm')."""
    m = Expr.var(Symbol(SymbolKind.PARAM, name="m"))
    residuals = tuple(
        oracle_forces[i] - m * Expr.var(acc(i)) for i in range(n)
    )
    return EquationsOfMotion(residuals, split_mode="newton-oracle")


def oracle_compare(system, interval=None, h=None, method: str = "rk4") -> OracleReport:
    """Integrate the derived equations and the declared Newtonian law with
    identical integrator and steps; report the max state divergence.

    ``system`` is a parsed SystemSpec (duck-typed: phi, oracle_forces,
    param_values(), init, time fields are used).
    """
    if system.oracle_forces is None:
        raise MechError(f"system '{system.name}' declares no newton oracle")
    if "m" not in system.param_values():
        raise MechError("newton oracle requires a parameter named 'm'")
    if system.init is None:
        raise MechError("oracle comparison requires initial conditions")
    interval = interval or (system.time[0], system.time[1])
    h = h or system.time[2]
    params = system.param_values()
    x0, v0 = system.init
    derived_ode = assemble_explicit(dual_spencer(system.phi), params)
    oracle_ode = assemble_explicit(
        newton_oracle_eom(system.oracle_forces, system.n), params
    )
    derived = integrate(derived_ode, x0, v0, interval, h, method, provenance="derived-eom")
    oracle = integrate(oracle_ode, x0, v0, interval, h, method, provenance="newton-oracle")
    m = min(len(derived.taus), len(oracle.taus))
    div = np.abs(derived.xs[:m] - oracle.xs[:m]).sum(axis=1) + np.abs(
        derived.vs[:m] - oracle.vs[:m]
    ).sum(axis=1)
    return OracleReport(float(div.max()), derived, oracle)


# ---------------------------------------------------------------------------
# energy balance audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BalanceReport:
    """Sampled energy ledger: E, power input P, residual rho = dE/dt - P."""

    E: np.ndarray
    P: np.ndarray
    rho: np.ndarray
    max_residual: float
    rms_residual: float

    @property
    def relative_drift(self) -> float:
        base = max(abs(float(self.E[0])), 1e-300)
        return float(np.abs(self.E - self.E[0]).max() / base)


def energy_audit(traj: Trajectory, dec: Decomposition, params) -> BalanceReport:
    """Check dE/dt = P along a trajectory.

    E is the Legendre form v^i dL/dv^i - L of the exact part; P is the
    anti-exact force contracted with velocity, plus the explicit time
    derivative of L folded in. Splits whose anti-exact part carries dv
    components are outside the supported family and are refused.
    """
    n = traj.n
    if len(traj.taus) < 3:
        raise AuditUnsupportedError("energy audit needs at least 3 samples")
    if any(not e.is_zero for e in dec.anti_exact.Pi):
        raise AuditUnsupportedError(
            "energy audit requires an anti-exact part with zero dv components"
        )
    L = dec.lagrangian
    E_expr = ZERO
    for i in range(n):
        E_expr = E_expr + partial(L, vel(i)) * Expr.var(vel(i))
    E_expr = E_expr - L
    P_expr = -partial(L, TAU)
    for i in range(n):
        P_expr = P_expr + dec.anti_exact.F[i] * Expr.var(vel(i))
    E = _eval_on_trajectory(E_expr, traj, params)
    P = _eval_on_trajectory(P_expr, traj, params)
    rho = _diff_order2(E, traj.h) - P
    return BalanceReport(
        E, P, rho, float(np.abs(rho).max()), float(np.sqrt(np.mean(rho**2)))
    )


# ---------------------------------------------------------------------------
# first variation and transversality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariationField:
    """Variation delta-x along a trajectory: symbolic in t, or sampled.

    Symbolic components may contain time and signal symbols only; sampled
    fields carry their own derivative samples (differenced at second order
    when absent). Endpoint flags assert fixed-boundary behaviour.
    """

    exprs: tuple[Expr, ...] | None = None
    samples: np.ndarray | None = None
    dot_samples: np.ndarray | None = None
    vanishes_at_a: bool = False
    vanishes_at_b: bool = False

    def __post_init__(self):
        if (self.exprs is None) == (self.samples is None):
            raise ValueError("provide exactly one of exprs or samples")
        if self.exprs is not None:
            for e in self.exprs:
                for s in e.symbols():
                    if s.kind not in (SymbolKind.TIME, SymbolKind.SIGNAL):
                        raise ValueError(
                            "symbolic variations may only involve time and signals"
                        )
        if self.samples is not None:
            object.__setattr__(self, "samples", np.atleast_2d(np.asarray(self.samples, float)))
            if self.dot_samples is not None:
                object.__setattr__(
                    self, "dot_samples", np.atleast_2d(np.asarray(self.dot_samples, float))
                )

    @classmethod
    def from_exprs(cls, *exprs: Expr, vanishes_at_a=False, vanishes_at_b=False):
        return cls(exprs=tuple(exprs), vanishes_at_a=vanishes_at_a, vanishes_at_b=vanishes_at_b)

    @classmethod
    def from_samples(cls, samples, dot_samples=None, vanishes_at_a=False, vanishes_at_b=False):
        return cls(
            samples=np.asarray(samples, float),
            dot_samples=None if dot_samples is None else np.asarray(dot_samples, float),
            vanishes_at_a=vanishes_at_a,
            vanishes_at_b=vanishes_at_b,
        )

    def sample_on(self, taus: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
        """(delta, delta_dot) arrays of shape (N, n) on the given grid."""
        N = len(taus)
        if self.exprs is not None:
            cols = []
            dcols = []
            zeros = np.zeros_like(taus)
            dummy = (zeros,) * 8
            for e in self.exprs:
                fn = compile_expr(e, {}, vectorized=True)
                dfn = compile_expr(partial(e, TAU), {}, vectorized=True)
                cols.append(np.broadcast_to(np.asarray(fn(taus, dummy, dummy), float), taus.shape))
                dcols.append(np.broadcast_to(np.asarray(dfn(taus, dummy, dummy), float), taus.shape))
            delta = np.column_stack(cols)
            ddot = np.column_stack(dcols)
        else:
            delta = self.samples
            if delta.shape[0] != N:
                delta = delta.T
            if delta.shape[0] != N:
                raise ValueError("sampled variation does not match the trajectory grid")
            if self.dot_samples is not None:
                ddot = self.dot_samples
                if ddot.shape[0] != N:
                    ddot = ddot.T
            else:
                ddot = np.column_stack(
                    [_diff_order2(delta[:, i], h) for i in range(delta.shape[1])]
                )
        if self.vanishes_at_a and np.abs(delta[0]).max() > 1e-12:
            raise ValueError("variation flagged as vanishing at a does not")
        if self.vanishes_at_b and np.abs(delta[-1]).max() > 1e-12:
            raise ValueError("variation flagged as vanishing at b does not")
        return delta, ddot


def transversality_term(
    traj: Trajectory, phi: VerticalOneForm, variation: VariationField, params
) -> tuple[float, float]:
    """Boundary pairing (Pi_i delta-x^i) at the two interval endpoints."""
    delta, _ = variation.sample_on(traj.taus, traj.h)
    pi_fns = [compile_expr(phi.Pi[i], params) for i in range(traj.n)]
    vals = []
    for k in (0, len(traj.taus) - 1):
        t = float(traj.taus[k])
        vals.append(
            sum(pi_fns[i](t, traj.xs[k], traj.vs[k]) * delta[k, i] for i in range(traj.n))
        )
    return vals[0], vals[1]


def first_variation(
    traj: Trajectory,
    phi: VerticalOneForm,
    variation: VariationField,
    params,
    form: str = "pre",
    include_boundary: bool = True,
) -> float:
    """First-variation functional along a prolonged trajectory, by Simpson.

    form="pre" integrates F_i d^i + Pi_i d(d^i)/dt. form="post" integrates
    the integrated-by-parts density (F_i - d(Pi_i)/dt) d^i and, unless
    include_boundary is False, adds the transversality boundary term. The
    two forms agree to quadrature tolerance.
    """
    delta, ddot = variation.sample_on(traj.taus, traj.h)
    if form == "pre":
        integrand = np.zeros_like(traj.taus)
        for i in range(traj.n):
            integrand += _eval_on_trajectory(phi.F[i], traj, params) * delta[:, i]
            integrand += _eval_on_trajectory(phi.Pi[i], traj, params) * ddot[:, i]
        return simpson_uniform(integrand, traj.h)
    if form != "post":
        raise ValueError("form must be 'pre' or 'post'")
    eom = dual_spencer(phi)
    ode = assemble_explicit(eom, params)
    accels = accelerations_on(traj, ode)
    integrand = np.zeros_like(traj.taus)
    for i in range(traj.n):
        integrand += (
            _eval_on_trajectory(eom.residuals[i], traj, params, accels=accels)
            * delta[:, i]
        )
    total = simpson_uniform(integrand, traj.h)
    if include_boundary:
        theta_a, theta_b = transversality_term(traj, phi, variation, params)
        total += theta_b - theta_a
    return total


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path, report: BalanceReport | None = None):
    """One row per sample, 17 significant digits, deterministic."""
    n = traj.n
    header = ["tau"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    if report is not None:
        header += ["E", "P", "rho"]
    lines = [",".join(header)]
    for k in range(len(traj.taus)):
        row = [f"{traj.taus[k]:.17g}"]
        row += [f"{traj.xs[k, i]:.17g}" for i in range(n)]
        row += [f"{traj.vs[k, i]:.17g}" for i in range(n)]
        if report is not None:
            row += [
                f"{report.E[k]:.17g}",
                f"{report.P[k]:.17g}",
                f"{report.rho[k]:.17g}",
            ]
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
