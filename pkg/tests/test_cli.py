import json

from jetmech.cli import main

DAMPED = """
system "lab" {
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
  time 0 .. 2 step 1e-3
}
"""

BAD_SPLIT = """
system "badsplit" {
  parameter m = 1
  coordinate x
  force x: x
  momentum x: m*x'
  lagrangian: m*x'^2/2
  init x = 1, x' = 0
  time 0 .. 1 step 1e-2
}
"""

CORRUPTED_ORACLE = """
system "corrupt" {
  parameter m = 1
  parameter k = 1
  coordinate x
  force x: -(k + 1)*x
  momentum x: m*x'
  oracle x: -k*x
  init x = 1, x' = 0
  time 0 .. 2 step 1e-3
}
"""

MASSLESS = 'system "nomass" { parameter k = 1; coordinate x; force x: -k*x }'


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out + out.err


class TestDerive:
    def test_duffing_preset(self, capsys):
        code, out = run(capsys, "derive", "duffing")
        assert code == 0
        assert "m*x'' = -a*x^3 - b*x'" in out
        assert "a*x^3 + b*x' + m*x'' = 0" in out

    def test_vanderpol_preset(self, capsys):
        code, out = run(capsys, "derive", "vanderpol")
        assert code == 0
        assert "m*x'' = -k*x - b0*x^2*x' + b0*x'" in out

    def test_damped_driven(self, capsys, tmp_path):
        path = tmp_path / "lab.mech"
        path.write_text(DAMPED)
        code, out = run(capsys, "derive", str(path))
        assert code == 0
        assert "k*x + b*x' + m*x'' - sig(f) = 0" in out

    def test_massless_warns_but_succeeds(self, capsys, tmp_path):
        path = tmp_path / "m.mech"
        path.write_text(MASSLESS)
        code, out = run(capsys, "derive", str(path))
        assert code == 0
        assert "mass matrix singular" in out


class TestDecompose:
    def test_declared_split(self, capsys):
        code, out = run(capsys, "decompose", "damped_ho", "--mode", "declared")
        assert code == 0
        assert "L = -1/2*k*x^2 + 1/2*m*x'^2" in out
        assert "phi_a = (-b*x' + sig(f)) dx" in out
        assert "not closed" in out
        assert "dt^dx" in out and "dx^dx'" in out
        assert "reconstruction: exact" in out

    def test_exact_form(self, capsys):
        code, out = run(capsys, "decompose", "harmonic")
        assert code == 0
        assert "form is exact" in out

    def test_sinusoid_refused_in_canonical_mode(self, capsys):
        code, out = run(capsys, "decompose", "damped_ho", "--mode", "canonical")
        assert code == 3
        assert "polynomial signals" in out

    def test_declared_mode_without_split(self, capsys):
        code, out = run(capsys, "decompose", "duffing", "--mode", "declared")
        assert code == 2

    def test_json_report_schema(self, capsys, tmp_path):
        report_path = tmp_path / "report.json"
        code, _ = run(
            capsys, "decompose", "harmonic", "--json", str(report_path)
        )
        assert code == 0
        payload = json.loads(report_path.read_text())
        assert payload["system"] == "harmonic"
        assert payload["lagrangian"] == "-1/2*k*x^2 + 1/2*m*x'^2"
        assert payload["anti_exact"] == {"F": ["0"], "Pi": ["0"]}
        assert payload["residuals"] == ["k*x + m*x''"]
        assert all({"name", "pass", "detail"} <= set(c) for c in payload["checks"])


class TestSimulate:
    def test_writes_csv_and_audits(self, capsys, tmp_path):
        out_csv = tmp_path / "traj.csv"
        path = tmp_path / "lab.mech"
        path.write_text(DAMPED)
        code, out = run(
            capsys, "simulate", str(path), "--out", str(out_csv), "--audit", "--oracle"
        )
        assert code == 0
        assert "max divergence" in out
        assert out_csv.read_text().splitlines()[0] == "tau,x0,v0,E,P,rho"

    def test_deterministic_output(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run(capsys, "simulate", "harmonic", "--out", str(a))
        run(capsys, "simulate", "harmonic", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_missing_init_is_usage_error(self, capsys, tmp_path):
        path = tmp_path / "noinit.mech"
        path.write_text(
            'system "noinit" { parameter m = 1; coordinate x; force x: -x;\n'
            "time 0 .. 1 step 0.01 }"
        )
        code, out = run(capsys, "simulate", str(path), "--out", str(tmp_path / "t.csv"))
        assert code == 2
        assert "simulate requires init" in out

    def test_corrupted_oracle_fails_tolerance(self, capsys, tmp_path):
        path = tmp_path / "corrupt.mech"
        path.write_text(CORRUPTED_ORACLE)
        code, out = run(
            capsys,
            "simulate",
            str(path),
            "--out",
            str(tmp_path / "c.csv"),
            "--oracle",
        )
        assert code == 1
        assert "exceeds tol" in out

    def test_singular_mass_is_numeric_failure(self, capsys, tmp_path):
        path = tmp_path / "m.mech"
        path.write_text(
            'system "nomass" { parameter k = 1; coordinate x; force x: -k*x;\n'
            "init x = 1; time 0 .. 1 step 0.01 }"
        )
        code, out = run(capsys, "simulate", str(path), "--out", str(tmp_path / "t.csv"))
        assert code == 3
        assert "singular" in out

    def test_blow_up_flagged_partial_csv(self, capsys, tmp_path):
        path = tmp_path / "b.mech"
        path.write_text(
            'system "blow" { parameter m = 1; coordinate x; force x: x\'^2;\n'
            "momentum x: m*x'; init x = 0, x' = 1; time 0 .. 2 step 1e-3 }"
        )
        out_csv = tmp_path / "b.csv"
        code, out = run(capsys, "simulate", str(path), "--out", str(out_csv))
        assert code == 3
        assert "truncated" in out
        assert out_csv.exists()
        assert len(out_csv.read_text().splitlines()) > 10


class TestVerify:
    def test_builtin_suite_passes(self, capsys):
        code, out = run(capsys, "verify", "--builtin-suite")
        assert code == 0
        for name in (
            "cochain-contraction",
            "el-equivalence",
            "split-invariance",
            "first-variation",
            "spencer-residual",
        ):
            assert f"[PASS] {name}" in out
        assert "seed=" in out

    def test_bad_split_file_fails_with_residual(self, capsys, tmp_path):
        path = tmp_path / "bad.mech"
        path.write_text(BAD_SPLIT)
        code, out = run(capsys, "verify", str(path))
        assert code == 1
        assert "split-reconstruction" in out
        assert "split reconstruction residual" in out
        assert "(x) dx" in out

    def test_oracle_check_included(self, capsys, tmp_path):
        path = tmp_path / "lab.mech"
        path.write_text(DAMPED)
        code, out = run(capsys, "verify", str(path))
        assert code == 0
        assert "[PASS] oracle-equivalence" in out

    def test_empty_file_is_parse_error(self, capsys, tmp_path):
        path = tmp_path / "empty.mech"
        path.write_text("")
        code, out = run(capsys, "verify", str(path))
        assert code == 2
        assert "parse error" in out

    def test_requires_target_or_builtin(self, capsys):
        code, out = run(capsys, "verify")
        assert code == 2

    def test_seed_env_honored(self, capsys, monkeypatch):
        monkeypatch.setenv("MECH_SEED", "777")
        code, out = run(capsys, "verify", "--builtin-suite")
        assert code == 0
        assert "seed=777" in out


class TestUsage:
    def test_unknown_target(self, capsys):
        code, out = run(capsys, "derive", "not-a-system")
        assert code == 2
        assert "no such file or preset" in out

    def test_parse_error_position_reported(self, capsys, tmp_path):
        path = tmp_path / "bad.mech"
        path.write_text('system "oops" { coordinate x; force x: x + }')
        code, out = run(capsys, "derive", str(path))
        assert code == 2
        assert "line 1" in out and "col 44" in out

    def test_unknown_subcommand(self, capsys):
        code, _ = run(capsys, "frobnicate")
        assert code == 2


class TestMethodSelection:
    def test_rkf45_flag(self, capsys, tmp_path):
        out_csv = tmp_path / "t45.csv"
        code, out = run(capsys, "simulate", "harmonic", "--out", str(out_csv), "--method", "rkf45")
        assert code == 0
        assert len(out_csv.read_text().splitlines()) == 10002

    def test_audit_failure_still_writes_csv(self, capsys, tmp_path):
        # canonical split of the constant-forced oscillator has dv components
        path = tmp_path / "dv.mech"
        path.write_text(
            'system "dv" { parameter m = 1; parameter k = 1; parameter b = 0.5;\n'
            "coordinate x; force x: -k*x - b*x'; momentum x: m*x';\n"
            "init x = 1; time 0 .. 1 step 0.01 }"
        )
        out_csv = tmp_path / "dv.csv"
        code, out = run(capsys, "simulate", str(path), "--out", str(out_csv), "--audit")
        assert code == 3
        assert "dv components" in out
        assert out_csv.exists()
