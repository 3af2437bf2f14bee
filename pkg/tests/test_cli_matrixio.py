import numpy as np
import pytest

from dtam import cli, matrixio
from dtam.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, read_config_file
from dtam.matrixio import MatrixFormatError, read_matrix, read_vector, write_matrix, write_vector


@pytest.mark.parametrize("suffix", [".csv", ".bin"])
def test_matrix_round_trip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 7))
    path = tmp_path / f"a{suffix}"
    write_matrix(path, A)
    assert read_matrix(path).tobytes() == A.tobytes()
    v = rng.standard_normal(5)
    write_vector(tmp_path / f"v{suffix}", v)
    assert read_vector(tmp_path / f"v{suffix}").tobytes() == v.tobytes()


def test_binary_layout_is_column_major(tmp_path):
    path = tmp_path / "a.bin"
    write_matrix(path, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    raw = path.read_bytes()
    assert np.frombuffer(raw[:16], "<u8").tolist() == [3, 2]
    assert np.frombuffer(raw[16:], "<f8").tolist() == [1, 3, 5, 2, 4, 6]


def test_text_without_header(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("1, 2\n\n3,4\n")
    np.testing.assert_array_equal(read_matrix(path), [[1, 2], [3, 4]])


@pytest.mark.parametrize("text, match", [
    ("# rows=3 cols=2\n1,2\n3,4\n", "header says"),
    ("1,2\n3\n", "ragged"),
    ("1,x\n", ":1:"),
    ("# nothing\n", "no data"),
    ("1,nan\n", "NaN"),
])
def test_text_errors(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(MatrixFormatError, match=match):
        read_matrix(path)


def test_binary_errors(tmp_path):
    path = tmp_path / "a.bin"
    write_matrix(path, np.ones((3, 3)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(MatrixFormatError, match="expected"):
        read_matrix(path)
    path.write_bytes(b"\x01\x02")
    with pytest.raises(MatrixFormatError, match="truncated"):
        read_matrix(path)
    write_matrix(path, np.ones((2, 3)))
    with pytest.raises(MatrixFormatError, match="single row or column"):
        read_vector(path)


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ngamma = 0.5  # trailing\n\nmax-iters=7\n")
    assert read_config_file(path) == {"gamma": "0.5", "max_iters": "7"}
    path.write_text("gamma 0.5\n")
    with pytest.raises(cli.ConfigError, match=":1:"):
        read_config_file(path)


def _instance_files(tmp_path):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 60))
    A /= np.linalg.norm(A, axis=0)
    x = np.zeros(60)
    x[[4, 20, 41]] = [1.0, -2.0, 0.5]
    write_matrix(tmp_path / "A.csv", A)
    write_vector(tmp_path / "y.csv", A @ x)
    return x


def test_recover_from_files(tmp_path, capsys):
    x = _instance_files(tmp_path)
    rc = main(["recover", "--matrix", str(tmp_path / "A.csv"), "--y", str(tmp_path / "y.csv"),
               "--k", "3", "--output", str(tmp_path / "x.csv")])
    assert rc == EXIT_OK
    assert "support" in capsys.readouterr().out
    np.testing.assert_allclose(read_vector(tmp_path / "x.csv"), x, atol=1e-10)


def test_config_file_and_flag_override(tmp_path, capsys):
    _instance_files(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"matrix={tmp_path / 'A.csv'}\ny={tmp_path / 'y.csv'}\nk=3\nmax-iters=1\n")
    assert main(["recover", "--config", str(cfg)]) == EXIT_OK
    assert "iterations 1" in capsys.readouterr().out.replace("=", " ").replace(":", " ")
    assert main(["recover", "--config", str(cfg), "--max-iters", "40"]) == EXIT_OK
    assert "residual_tol" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["recover", "--family", "nope"],
    ["recover", "--gamma", "2"],
    ["recover", "--matrix", "/nonexistent.csv", "--y", "/nonexistent.csv", "--k", "2"],
    ["recover", "--config", "/nonexistent.cfg"],
    ["theory", "--deltas", "0.1,0.2"],
    ["theory", "--deltas", "0.3,0.2,0.1"],
    ["ric", "--k", "2"],
    ["phase-transition", "--n", "10", "--m", "20"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "dtam: error" in capsys.readouterr().err


def test_numeric_failure_exit_3(monkeypatch, capsys):
    def boom(*a, **kw):
        raise np.linalg.LinAlgError("SVD did not converge")
    monkeypatch.setattr(cli.experiments, "theory_report", boom)
    assert main(["theory"]) == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_theory_and_ric_commands(tmp_path, capsys):
    assert main(["theory", "--gamma", "0.1", "--family", "lp_norm", "--l", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "delta_star" in out
    assert any(line.split() == ["g_gamma", "0.1"] for line in out.splitlines())
    write_matrix(tmp_path / "I.csv", np.eye(4))
    assert main(["ric", "--matrix", str(tmp_path / "I.csv"), "--k", "2"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "delta_2=0"


def test_phase_transition_and_demo(tmp_path, capsys):
    out = tmp_path / "pt.csv"
    rc = main(["phase-transition", "--n", "60", "--m", "20", "--k-grid", "2,4", "--trials", "2",
               "--algorithms", "omp,dtam", "--output", str(out), "--omit-timing"])
    assert rc == EXIT_OK
    assert out.exists() and (tmp_path / "pt_summary.csv").exists()
    capsys.readouterr()
    assert main(["signal-demo", "--n", "64", "--sparse"]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("snr_db=inf")


@pytest.mark.parametrize("sub", [None, "phase-transition", "recover", "signal-demo", "theory", "ric"])
def test_help(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main(([sub] if sub else []) + ["--help"])
    assert exc.value.code == 0
    assert "--" in capsys.readouterr().out


def test_module_matrixio_is_public():
    assert matrixio.read_matrix is read_matrix
