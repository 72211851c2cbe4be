import json
import subprocess
import sys

import pytest

from dsfjrw import cli, golden


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err.strip()


def test_frobenius_text(capsys):
    code, out, _ = run(capsys, "frobenius", "--model", "d4")
    assert code == 0
    assert out == golden.table_poly(golden.load("potentials")["tables"]["d4"]).to_text()


def test_json_has_schema(capsys):
    code, out, _ = run(capsys, "frobenius", "--model", "g2", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["schema"] == "1" and data["charge"] == "2/3"


def test_flow_component(capsys):
    assert run(capsys, "flow", "--alpha", "4", "--p", "0", "--coord", "3")[:2] == (0, "3 w4_1")


def test_invariants(capsys):
    assert run(capsys, "invariant", "--model", "d4", "--genus", "1", "--tau", "1,1")[:2] == (0, "1/6")
    assert run(capsys, "invariant", "--model", "a1", "--genus", "1", "--tau", "1,1")[:2] == (0, "1/24")


def test_truncation_exit(capsys):
    code, _, err = run(capsys, "invariant", "--model", "a1", "--genus", "0", "--tau", "1,1", "1,1", "1,1")
    assert code == cli.EXIT_TRUNCATION and "truncation" in err


def test_usage_exit(capsys):
    assert run(capsys, "frobenius", "--model", "e9")[0] == cli.EXIT_USAGE
    assert run(capsys, "free-energy", "--model", "d4", "--pmax", "-1")[0] == cli.EXIT_USAGE


def test_verify_kdv(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "kdv")
    assert code == 0 and out.splitlines()[-1] == "suite kdv: 10/10 pass"


def test_deterministic(capsys):
    a = run(capsys, "free-energy", "--model", "g2", "--pmax", "1", "--format", "json")
    b = run(capsys, "free-energy", "--model", "g2", "--pmax", "1", "--format", "json")
    assert a == b and a[0] == 0


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "dsfjrw.cli", "invariant", "--model", "a1", "--genus", "0",
                           "--tau", "1,0", "1,0", "1,0"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "1"


def test_verify_narrowed(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "virasoro", "--model", "g2")
    assert code == 0 and all(line.split()[1].startswith("g2") for line in out.splitlines()[:-1])
    assert run(capsys, "verify", "--suite", "virasoro", "--pmax", "0")[0] == cli.EXIT_USAGE
