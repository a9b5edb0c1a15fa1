"""CLI surface: subcommands, JSON output, determinism, exit codes."""
import json
import subprocess
import sys

from schsym.cli import main

CASE7_FIELD = '{"tau": "t^2", "rho": "-t"}'
CASE7_POTENTIAL = "(1 + 2*i)*(x1^2 + x2^2)^(-1)"
FREE_FIELDS = ('[{"sigma":"1"},{"rho":"1"},{"chi":["1","0"]},{"chi":["t","0"]},'
               '{"chi":["0","1"]},{"chi":["0","t"]},{"kappa":"1"},{"tau":"1"},'
               '{"tau":"t"},{"tau":"t^2","rho":"-t"}]')


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_residual_zero(capsys):
    code, out = run_cli(capsys, "residual", "0", '{"tau": "1"}')
    assert code == 0
    assert "symmetry: yes" in out


def test_residual_case7(capsys):
    code, out = run_cli(capsys, "residual", CASE7_POTENTIAL, CASE7_FIELD)
    assert code == 0
    assert "symmetry: yes" in out


def test_residual_nonzero_names_witness(capsys):
    code, out = run_cli(capsys, "residual", "t*x1", '{"tau": "1"}')
    assert code == 0
    assert "symmetry: no" in out and "witness" in out


def test_residual_parse_error_exit_2(capsys):
    assert main(["residual", "t*x1 +", '{"tau": "1"}']) == 2


def test_bracket_with_cross_check(capsys):
    code, out = run_cli(capsys, "bracket", '{"tau":"1"}', '{"tau":"t"}', "--check")
    assert code == 0
    assert "agrees" in out


def test_invariants_free_equation_json(capsys):
    code, out = run_cli(capsys, "invariants", FREE_FIELDS, "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert [payload[k] for k in ("k0", "k1", "k2", "k3", "r0")] == [2, 4, 1, 3, 2]


def test_invariants_non_closed_span(capsys):
    bad = '[{"sigma":"1"},{"rho":"1"},{"tau":"1","kappa":"1"},{"tau":"t"}]'
    code, _ = run_cli(capsys, "invariants", bad)
    assert code == 1


def test_transform_sigma_shift(capsys):
    code, out = run_cli(capsys, "transform", "0", '{"Sigma": "t/2"}')
    assert code == 0
    assert out.splitlines()[0].endswith("1/2")


def test_verify_case_json(capsys):
    code, out = run_cli(capsys, "verify-case", "7", "--trials", "2",
                        "--points", "60", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["passed"] and payload["case"] == 7


def test_verify_table_subset_deterministic(capsys):
    args = ["verify-table", "--cases", "1", "13", "--trials", "1",
            "--points", "50", "--seed", "9", "--format", "json"]
    code1, out1 = run_cli(capsys, *args)
    code2, out2 = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_verify_table_strict_tolerance_fails(capsys):
    code, out = run_cli(capsys, "verify-table", "--cases", "2", "--trials", "1",
                        "--points", "40", "--tol", "1e-30")
    assert code == 1
    assert "witness" in out


def test_groupoid_fixture_checks(capsys):
    code, out = run_cli(capsys, "groupoid", "normalized", "disjoint")
    assert code == 0 and "True" in out
    code, out = run_cli(capsys, "groupoid", "non_semi", "semi-normalized")
    assert code == 1
    code, out = run_cli(capsys, "groupoid", "disjoint_semi", "all", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["splitting"] is True


def test_groupoid_model_file_and_errors(tmp_path, capsys):
    from schsym.groupoid import FIXTURE_BUILDERS, model_to_json

    path = tmp_path / "model.json"
    path.write_text(json.dumps(model_to_json(FIXTURE_BUILDERS["normalized"]())))
    code, _ = run_cli(capsys, "groupoid", str(path), "all")
    assert code == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"objects": ["a"]}')
    assert main(["groupoid", str(bad), "all"]) == 2


def test_invariants_kernel_only(capsys):
    code, out = run_cli(capsys, "invariants", '[{"sigma":"1"},{"rho":"1"}]',
                        "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert [payload[k] for k in ("k0", "k1", "k2", "k3", "r0")] == [2, 0, 0, 0, 0]


def test_declarations_file(tmp_path, capsys):
    decls = tmp_path / "decls.json"
    decls.write_text(json.dumps([{"name": "U", "arity": 2, "codomain": "complex"}]))
    code, out = run_cli(capsys, "residual", "U(x1,x2)", '{"tau": "1"}',
                        "--declare", str(decls))
    assert code == 0
    assert "symmetry: yes" in out
    # undeclared symbol is a parse diagnostic
    assert main(["residual", "U(x1,x2)", '{"tau": "1"}']) == 2


def test_config_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trials": 1, "points": 40, "seed": 12}))
    code, out = run_cli(capsys, "verify-table", "--cases", "0",
                        "--config", str(cfg), "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["draws"] == 1 and payload["seed"] == 12


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "schsym.cli", "residual",
                           "0", '{"rho": "1"}'], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "symmetry: yes" in proc.stdout
