import pytest

from bemlocal import harness
from bemlocal.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_PASS, EXIT_RATE, main
from bemlocal.solver import SolverError

FAST = ["--levels", "3", "--elements-per-edge", "2", "--eoc-window", "3"]


def test_predict_prints_rates(capsys):
    assert main(["predict", "--geometry", "lshape", "--alpha", "1/8"]) == EXIT_PASS
    out = capsys.readouterr().out.splitlines()
    rates = dict(line.split() for line in out)
    assert float(rates["energy_global"]) == pytest.approx(0.125)
    assert float(rates["l2_local"]) == pytest.approx(0.791667, abs=1e-6)


def test_run_passes_with_loose_tolerance(tmp_path, capsys):
    csv = tmp_path / "r.csv"
    plot = tmp_path / "r.dat"
    code = main(["run", "--geometry", "lshape", "--alpha", "1/3", "--tolerance", "5", *FAST, "--csv", str(csv), "--plot", str(plot)])
    # the energy tolerance is fixed, so a 3-level run may still miss it; either way the files exist
    assert code in (EXIT_PASS, EXIT_RATE)
    assert csv.exists() and plot.exists()
    assert "level 3 N=96" in capsys.readouterr().out


def test_run_rate_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("geometry = lshape\nalpha = 1/3\nrate-l2_local = 4\n")
    code = main(["run", "--config", str(cfg), *FAST, "--csv", str(tmp_path / "o.csv")])
    assert code == EXIT_RATE


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"geometry = triangle\nalpha = 1/3\ncsv = {tmp_path / 'a.csv'}\n")
    assert main(["run", "--config", str(cfg)]) == EXIT_INPUT
    code = main(["run", "--config", str(cfg), "--geometry", "zshape", "--tolerance", "5", *FAST])
    assert code in (EXIT_PASS, EXIT_RATE)
    assert (tmp_path / "a.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--geometry", "lshape", "--alpha", "1/3"],
        ["run", "--geometry", "hexagon", "--alpha", "1/3", "--csv", "x.csv"],
        ["run", "--geometry", "lshape", "--alpha", "one third", "--csv", "x.csv"],
        ["run", "--geometry", "file:/nonexistent/poly.txt", "--alpha", "1/3", "--csv", "x.csv"],
        ["run", "--config", "/nonexistent/run.cfg", "--csv", "x.csv"],
        ["predict", "--geometry", "lshape", "--alpha", "x"],
    ],
)
def test_input_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_INPUT
    assert "input error" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["run", "--equation", "wave"])
    assert info.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_INPUT


def test_numerical_failure_exit_3(tmp_path, monkeypatch, capsys):
    def boom(m, s, V=None):
        raise SolverError("matrix is not positive definite: pivot 0 is non-positive")

    monkeypatch.setattr(harness, "galerkin_solve_symm", boom)
    code = main(["run", "--geometry", "lshape", "--alpha", "1/3", *FAST, "--csv", str(tmp_path / "x.csv")])
    assert code == EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "level 1" in err and "solve" in err
