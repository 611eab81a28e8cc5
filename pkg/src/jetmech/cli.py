"""Command-line front end.

Subcommands: decompose (exact/anti-exact split of the dynamical form),
derive (equations of motion), simulate (trajectory CSV with optional
energy audit and oracle comparison), verify (property suites).

Exit codes: 0 success, 1 verification failure, 2 usage/parse error,
3 numeric failure. MECH_SEED fixes the randomized-suite seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .dsl import (
    ParseError,
    PRESETS,
    SystemSpec,
    format_expr,
    parse_system,
)
from .dynamics import (
    assemble_explicit,
    energy_audit,
    integrate,
    mass_and_force,
    oracle_compare,
    write_trajectory_csv,
)
from .errors import (
    AdmissibilityError,
    AuditUnsupportedError,
    MechError,
    ReconstructionError,
    SingularMassError,
)
from .formcalc import d1, format_one_form, format_two_form
from .spencer import dual_spencer
from .symexpr import Expr, SymbolKind, acc
from .verify import DEFAULT_SEED, run_builtin_suites

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


def _load_system(target: str) -> SystemSpec:
    if os.path.isfile(target):
        with open(target, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif target in PRESETS:
        text = PRESETS[target]
    else:
        raise _UsageError(f"no such file or preset: {target}")
    return parse_system(text)


def _report_dict(system=None, dec=None, eom=None, checks=()):
    coords = system.coords if system is not None else ()
    out = {
        "system": system.name if system is not None else None,
        "lagrangian": format_expr(dec.lagrangian, coords) if dec is not None else None,
        "anti_exact": (
            {
                "F": [format_expr(e, coords) for e in dec.anti_exact.F],
                "Pi": [format_expr(e, coords) for e in dec.anti_exact.Pi],
            }
            if dec is not None
            else None
        ),
        "residuals": (
            [format_expr(r, coords) for r in eom.normalized()] if eom is not None else None
        ),
        "checks": [
            {"name": name, "pass": bool(ok), "detail": detail}
            for name, ok, detail in checks
        ],
    }
    return out


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_decompose(args) -> int:
    system = _load_system(args.target)
    coords = system.coords
    checks = []
    if args.mode == "declared":
        if not system.has_declared_split:
            raise _UsageError(
                "declared mode requires lagrangian/antiexact clauses in the system"
            )
        try:
            dec = system.declared_decomposition()
        except ReconstructionError as exc:
            print(f"FAIL {exc}")
            return EXIT_VERIFICATION
    else:
        try:
            dec = system.canonical_decomposition()
        except AdmissibilityError as exc:
            print(
                "homotopy decomposition requires polynomial signals "
                f"(signal '{exc.signal_name}' is a sinusoid)"
            )
            return EXIT_NUMERIC
    print(f"system: {system.name}")
    print(f"mode: {dec.mode}")
    print(f"L = {format_expr(dec.lagrangian, coords)}")
    print(f"phi_a = {format_one_form(dec.anti_exact, coords)}")
    differential = d1(dec.anti_exact)
    if dec.anti_exact.is_zero:
        print("phi_a = 0: form is exact")
        checks.append(("anti-exact-closed", True, "phi_a = 0"))
    elif differential.is_zero:
        print("phi_a closed")
        checks.append(("anti-exact-closed", True, "d(phi_a) = 0"))
    else:
        rendered = format_two_form(differential, coords)
        print(f"phi_a not closed: d(phi_a) = {rendered} (so it cannot be exact)")
        checks.append(("anti-exact-closed", False, f"d(phi_a) = {rendered}"))
    from .formcalc import reconstruction_residual

    residual = reconstruction_residual(dec, system.phi)
    ok = residual.is_zero
    print("reconstruction: exact" if ok else "reconstruction: FAILED")
    checks.append(("reconstruction", ok, format_one_form(residual, coords)))
    if args.json:
        _write_json(
            args.json, _report_dict(system, dec, dual_spencer(system.phi), checks)
        )
        print(f"wrote {args.json}")
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_derive(args) -> int:
    system = _load_system(args.target)
    coords = system.coords
    eom = system.eom()
    normalized = eom.normalized()
    for i, r in enumerate(normalized):
        print(f"{format_expr(r, coords)} = 0")
    mass, force = mass_and_force(eom)
    n = eom.n
    diagonal_constant = all(
        (i == j or mass[i][j].is_zero)
        and all(s.kind == SymbolKind.PARAM for s in mass[i][i].symbols())
        for i in range(n)
        for j in range(n)
    ) and all(not mass[i][i].is_zero for i in range(n))
    if diagonal_constant:
        for i in range(n):
            lhs = format_expr(mass[i][i] * Expr.var(acc(i)), coords)
            print(f"explicit: {lhs} = {format_expr(force[i], coords)}")
    else:
        print("warning: mass matrix singular or non-diagonal; residuals left implicit")
    if args.json:
        _write_json(args.json, _report_dict(system, None, eom, ()))
        print(f"wrote {args.json}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    system = _load_system(args.target)
    if system.init is None:
        raise _UsageError("simulate requires init")
    if system.time is None:
        raise _UsageError("simulate requires a time clause")
    params = system.param_values()
    method = args.method or system.integrator
    a, b, h = system.time
    try:
        ode = assemble_explicit(dual_spencer(system.phi), params)
    except SingularMassError as exc:
        print(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    try:
        traj = integrate(
            ode, system.init[0], system.init[1], (a, b), h, method,
            provenance="derived-eom",
        )
    except SingularMassError as exc:
        print(f"numeric failure: {exc}")
        return EXIT_NUMERIC

    failures = []
    report = None
    if args.audit:
        try:
            dec = (
                system.declared_decomposition()
                if system.has_declared_split
                else system.canonical_decomposition()
            )
            report = energy_audit(traj, dec, params)
        except (ReconstructionError, AdmissibilityError, AuditUnsupportedError) as exc:
            # the trajectory is still useful; land it before reporting
            write_trajectory_csv(traj, args.out, None)
            print(f"wrote {args.out} ({len(traj.taus)} samples, no audit columns)")
            if isinstance(exc, ReconstructionError):
                print(f"FAIL {exc}")
                return EXIT_VERIFICATION
            print(f"numeric failure: {exc}")
            return EXIT_NUMERIC
        print(
            f"energy audit: max |rho| = {report.max_residual:.6e}, "
            f"rms = {report.rms_residual:.6e}, "
            f"energy drift {report.relative_drift:.6e}"
        )

    write_trajectory_csv(traj, args.out, report)
    print(f"wrote {args.out} ({len(traj.taus)} samples)")
    if traj.truncated:
        print("numeric failure: trajectory truncated (non-finite state); partial CSV written")
        return EXIT_NUMERIC

    if args.oracle:
        try:
            oracle_report = oracle_compare(system, (a, b), h, method)
        except MechError as exc:
            raise _UsageError(str(exc)) from exc
        print(f"max divergence {oracle_report.max_divergence:.6e}")
        if oracle_report.max_divergence > args.tol:
            failures.append(
                f"oracle divergence {oracle_report.max_divergence:.3e} exceeds tol {args.tol:.3e}"
            )
    for f in failures:
        print(f"FAIL {f}")
    return EXIT_VERIFICATION if failures else EXIT_OK


def cmd_verify(args) -> int:
    seed = int(os.environ.get("MECH_SEED", str(DEFAULT_SEED)))
    checks = []
    system = None
    if args.target is None and not args.builtin_suite:
        raise _UsageError("verify needs a system file or --builtin-suite")
    if args.target is not None:
        system = _load_system(args.target)
        if system.has_declared_split:
            try:
                system.declared_decomposition()
                checks.append(("split-reconstruction", True, "declared split rebuilds phi", None))
            except ReconstructionError as exc:
                checks.append(("split-reconstruction", False, str(exc), None))
        if system.oracle_forces is not None and system.init and system.time:
            rep = oracle_compare(system)
            ok = rep.max_divergence <= 1e-8
            checks.append(
                (
                    "oracle-equivalence",
                    ok,
                    f"max divergence {rep.max_divergence:.3e}",
                    None,
                )
            )
    for result in run_builtin_suites(seed):
        checks.append((result.name, result.passed, result.detail, result.seed))

    width = max(len(name) for name, *_ in checks)
    all_ok = True
    for name, ok, detail, case_seed in checks:
        mark = "PASS" if ok else "FAIL"
        all_ok &= ok
        suffix = f" (seed={case_seed})" if case_seed is not None else ""
        print(f"[{mark}] {name:<{width}}  {detail}{suffix}")
    if args.json:
        _write_json(
            args.json,
            _report_dict(
                system, None, None, [(n, ok, d) for n, ok, d, _ in checks]
            ),
        )
        print(f"wrote {args.json}")
    return EXIT_OK if all_ok else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jetmech",
        description=(
            "derive, decompose, simulate and verify non-conservative "
            "mechanical systems declared as dynamical one-forms"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="exact/anti-exact split of the dynamical form")
    p.add_argument("target", help=".mech file or preset name")
    p.add_argument("--mode", choices=("canonical", "declared"), default="canonical")
    p.add_argument("--json", help="write a JSON report here")
    p.set_defaults(handler=cmd_decompose)

    p = sub.add_parser("derive", help="print the equations of motion")
    p.add_argument("target", help=".mech file or preset name")
    p.add_argument("--json", help="write a JSON report here")
    p.set_defaults(handler=cmd_derive)

    p = sub.add_parser("simulate", help="integrate and export a trajectory CSV")
    p.add_argument("target", help=".mech file or preset name")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--audit", action="store_true", help="append E, P, rho columns")
    p.add_argument("--oracle", action="store_true", help="compare against the newton oracle")
    p.add_argument("--tol", type=float, default=1e-8, help="oracle divergence tolerance")
    p.add_argument("--method", choices=("rk4", "rkf45"), default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("target", nargs="?", default=None, help=".mech file or preset name")
    p.add_argument("--builtin-suite", action="store_true", help="run suites on shipped presets")
    p.add_argument("--json", help="write a JSON report here")
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularMassError, AdmissibilityError, AuditUnsupportedError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ReconstructionError as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except MechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry():  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
