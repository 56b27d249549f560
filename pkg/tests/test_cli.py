import subprocess
import sys

import numpy as np
import pytest

from fastmm.bilinear import emit_spec, strassen
from fastmm.cli import main
from fastmm.matrix import Matrix, format_matrix, parse_matrix, random_matrix, write_matrix


@pytest.fixture
def mats(tmp_path):
    paths = {}
    for name, rows in {"A": [[1, 2], [3, 4]], "B": [[5, 6], [7, 8]], "I": [[1, 0], [0, 1]],
                       "R": [[1, 2, 3], [4, 5, 6]], "S": [[1, 2], [2, 4]]}.items():
        paths[name] = tmp_path / f"{name}.mat"
        write_matrix(Matrix.from_rows(rows), paths[name])
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestMultiply:
    def test_strassen_to_file(self, capsys, mats, tmp_path):
        out = tmp_path / "C.mat"
        code, _, _ = run(capsys, "multiply", "--alg", "strassen", mats["A"], mats["B"], "-o", out)
        assert code == 0
        assert parse_matrix(out.read_text()) == Matrix.from_rows([[19, 22], [43, 50]])

    def test_identity_copies(self, capsys, mats):
        code, out, _ = run(capsys, "multiply", mats["I"], mats["B"])
        assert code == 0 and parse_matrix(out) == Matrix.from_rows([[5, 6], [7, 8]])

    def test_larger_oracle(self, capsys, tmp_path, rng):
        A, B = random_matrix(rng, 9), random_matrix(rng, 9)
        write_matrix(A, tmp_path / "a.mat")
        write_matrix(B, tmp_path / "b.mat")
        code, out, err = run(capsys, "multiply", "--cutoff", "1", "--count", tmp_path / "a.mat",
                             tmp_path / "b.mat")
        assert code == 0 and parse_matrix(out) == A @ B
        assert "scalar multiplications: 2401" in err

    def test_mismatch_names_shapes(self, capsys, mats):
        code, _, err = run(capsys, "multiply", mats["R"], mats["A"])
        assert code == 1 and "2x3" in err and "2x2" in err

    def test_bad_spec(self, capsys, mats, tmp_path):
        bad = tmp_path / "bad.alg"
        bad.write_text("2 7\nU\n")
        code, _, err = run(capsys, "multiply", "--alg", f"spec:{bad}", mats["A"], mats["B"])
        assert code == 2 and "section" in err

    def test_spec_file(self, capsys, mats, tmp_path):
        spec = tmp_path / "s.alg"
        spec.write_text(emit_spec(strassen()))
        code, out, _ = run(capsys, "multiply", "--alg", f"spec:{spec}", "--cutoff", "1",
                           mats["A"], mats["B"])
        assert code == 0 and parse_matrix(out) == Matrix.from_rows([[19, 22], [43, 50]])

    def test_missing_file(self, capsys, tmp_path, mats):
        code, _, _ = run(capsys, "multiply", tmp_path / "nope.mat", mats["A"])
        assert code == 1


class TestValidate:
    def test_strassen(self, capsys):
        code, out, _ = run(capsys, "validate", "strassen")
        assert code == 0 and "2.807354922" in out

    def test_mutant(self, capsys, tmp_path):
        text = emit_spec(strassen()).splitlines()
        text[-1] = text[-1].replace("1", "-1", 1)
        path = tmp_path / "m.alg"
        path.write_text("\n".join(text) + "\n")
        code, out, _ = run(capsys, "validate", f"spec:{path}")
        assert code == 3 and "invalid" in out


class TestBench:
    def test_strassen_rows(self, capsys):
        code, out, _ = run(capsys, "bench", "--sizes", "4,8", "--seed", "7", "--instances", "5")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("#") and "seed=7" in lines[0] and "theta=8" in lines[0]
        assert "norm=max-entry" in lines[0]
        header = lines[2].split(",")
        assert header[0] == "n" and "pass" in header and "multiplications" in header
        rows = [ln.split(",") for ln in lines[3:]]
        assert [r[0] for r in rows] == ["4", "8"]
        assert all(r[header.index("pass")] == "true" for r in rows)
        assert [r[-1] for r in rows] == ["49", "343"]

    def test_deterministic(self, capsys):
        first = run(capsys, "bench", "--sizes", "4", "--instances", "3", "--seed", "11")
        second = run(capsys, "bench", "--sizes", "4", "--instances", "3", "--seed", "11")
        assert first == second

    def test_scaling_line(self, capsys):
        code, out, _ = run(capsys, "bench", "--alg", "classical", "--sizes", "8", "--p", "53",
                           "--scaling", "24", "--instances", "10")
        assert code == 0 and "consistent within 2x" in out and "inconsistent" not in out

    def test_empty_sizes(self, capsys):
        code, _, err = run(capsys, "bench", "--sizes", "")
        assert code == 1 and "at least one size" in err

    def test_bad_size(self, capsys):
        assert run(capsys, "bench", "--sizes", "6")[0] == 1

    def test_invalid_algorithm(self, capsys, tmp_path):
        text = emit_spec(strassen()).replace("W\n1", "W\n0", 1)
        path = tmp_path / "m.alg"
        path.write_text(text)
        assert run(capsys, "bench", "--alg", f"spec:{path}", "--sizes", "4")[0] == 2


class TestSTPP:
    def test_search(self, capsys, tmp_path):
        out = tmp_path / "f.stpp"
        code, _, _ = run(capsys, "stpp", "search", "--group", "5", "--N", "2", "-o", out)
        assert code == 0
        text = out.read_text()
        assert text.startswith("H: 5\nN: 2\n") and "STPP: verified" in text
        assert run(capsys, "stpp", "check", out)[0] == 0

    def test_search_none(self, capsys):
        code, _, err = run(capsys, "stpp", "search", "--group", "5", "--N", "2", "--sizes", "2,1,1")
        assert code == 1 and "exhausted" in err

    def test_check_corrupted(self, capsys, tmp_path):
        path = tmp_path / "bad.stpp"
        path.write_text("H: 4\nN: 1\nX1: (0) (1)\nY1: (0) (2)\nZ1: (0) (1)\n")
        code, out, _ = run(capsys, "stpp", "check", path)
        assert code == 3 and "q_x=" in out and "q_z=" in out

    def test_check_fixture(self, capsys):
        code, out, _ = run(capsys, "stpp", "check", "fixture")
        assert code == 0 and out.count("STPP verified") == 3

    def test_multiply_identity(self, capsys, mats):
        code, out, err = run(capsys, "stpp", "multiply", "--family", "fixture", mats["I"], mats["B"])
        assert code == 0
        np.testing.assert_allclose(parse_matrix(out).to_numpy(), [[5, 6], [7, 8]], atol=1e-12)
        assert "Fourier transform (arithmetic)" in err and "no arithmetic" in err

    def test_growth(self, capsys):
        code, out, _ = run(capsys, "stpp", "growth")
        assert code == 0 and "alpha_hat" in out

    def test_truncated_family(self, capsys, tmp_path):
        path = tmp_path / "t.stpp"
        path.write_text("H: 4\nN: 1\nX1: (0)\n")
        assert run(capsys, "stpp", "check", path)[0] == 2


class TestExponent:
    def test_strassen(self, capsys):
        code, out, _ = run(capsys, "exponent", "--triple", "2,2,2", "--rank", "7")
        assert code == 0 and out.strip() == "omega <= 2.807354922"

    def test_classical(self, capsys):
        assert run(capsys, "exponent", "--triple", "3,3,3", "--rank", "27")[1].strip() == "omega <= 3.000000000"

    def test_alpha_beta(self, capsys):
        code, out, _ = run(capsys, "exponent", "--alpha", "3", "--beta", "1")
        assert code == 0
        assert "2.500000000" in out and "2.000000000" in out and "4.500000000 (> 3)" in out

    def test_family(self, capsys):
        code, out, _ = run(capsys, "exponent", "--stpp-family", "fixture")
        assert code == 0 and "sum =" in out

    @pytest.mark.parametrize("argv", [["--triple", "2,2", "--rank", "7"], ["--triple", "2,x,2", "--rank", "7"],
                                      ["--triple", "0,2,2", "--rank", "7"], ["--triple", "2,2,2"], []])
    def test_malformed(self, capsys, argv):
        assert run(capsys, "exponent", *argv)[0] == 1


class TestLinalg:
    def test_det(self, capsys, mats):
        assert run(capsys, "det", mats["A"])[1].strip() == "-2"
        assert run(capsys, "det", mats["S"])[1].strip() == "0"

    def test_invert(self, capsys, mats):
        code, out, _ = run(capsys, "invert", "--multiplier", "strassen", mats["A"])
        assert code == 0 and parse_matrix(out) == Matrix.from_rows([[-2, 1], ["3/2", "-1/2"]])

    def test_invert_singular(self, capsys, mats):
        code, _, err = run(capsys, "invert", mats["S"])
        assert code == 3 and "singular" in err

    def test_lu(self, capsys, mats):
        code, out, _ = run(capsys, "lu", mats["R"])
        assert code == 0 and "# L" in out and "# U" in out and "# perm" in out

    def test_solve(self, capsys, mats):
        code, out, _ = run(capsys, "solve", mats["A"], mats["B"])
        assert code == 0
        assert Matrix.from_rows([[1, 2], [3, 4]]) @ parse_matrix(out) == Matrix.from_rows([[5, 6], [7, 8]])

    def test_bad_multiplier(self, capsys, mats, tmp_path):
        assert run(capsys, "det", "--multiplier", f"spec:{tmp_path}/x", mats["A"])[0] == 2


def test_module_entry_point(mats):
    proc = subprocess.run([sys.executable, "-m", "fastmm", "det", str(mats["A"])],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "-2"


def test_float_output_is_exact(capsys, tmp_path, rng):
    A = Matrix.from_array(rng.standard_normal((3, 3)))
    write_matrix(A, tmp_path / "a.mat")
    write_matrix(Matrix.identity(3, "float"), tmp_path / "i.mat")
    code, out, _ = run(capsys, "multiply", "--alg", "classical", tmp_path / "a.mat", tmp_path / "i.mat")
    assert code == 0 and out == format_matrix(A)


def test_malformed_matrix_is_input_error(capsys, tmp_path, mats):
    bad = tmp_path / "bad.mat"
    bad.write_text("2 2 rational\n1 2 3\n")
    code, _, err = run(capsys, "multiply", bad, mats["A"])
    assert code == 1 and "bad.mat" in err


def test_argument_errors_are_input_errors(capsys):
    code, _, err = run(capsys, "stpp", "multiply")
    assert code == 1 and "required" in err
    code, _, _ = run(capsys, "bench", "--instances", "many")
    assert code == 1


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0
