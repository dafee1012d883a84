import pytest
from typer.testing import CliRunner

from hocpde.cli import EXIT_CONFIG, EXIT_IO, EXIT_SOLVER, app
from hocpde.utils import read_csv

runner = CliRunner()


def invoke(tmp_path, *args):
    return runner.invoke(app, ["--quiet", "--no-timestamp", "--out", str(tmp_path), *args])


def test_dispersion(tmp_path):
    result = invoke(tmp_path, "--set", "dispersion.resolution=7", "dispersion")
    assert result.exit_code == 0, result.output
    frame, metadata = read_csv(tmp_path / "dispersion.csv")
    assert frame.shape == (28, 6)
    assert "generated" not in metadata


def test_dispersion_help_lists_the_columns(tmp_path):
    columns = ["kappa1_h", "kappa2_k", "lambda_exact", "lambda_4oc_m", "lambda_2oc", "lambda_4ow"]
    result = runner.invoke(app, ["dispersion", "--help"])
    assert result.exit_code == 0, result.output
    help_text = " ".join(result.output.split())
    assert all(name in help_text for name in columns)
    assert invoke(tmp_path, "--set", "dispersion.resolution=3", "dispersion").exit_code == 0
    frame, _ = read_csv(tmp_path / "dispersion.csv")
    assert list(frame.columns) == columns


def test_stability(tmp_path):
    result = invoke(tmp_path, "--set", "stability.dt=0.5", "--set", "stability.coefficients.beta=1.5", "stability")
    assert result.exit_code == 0, result.output
    assert "max|G|" in result.output


def test_grid_defaults_to_the_stretched_domain(tmp_path):
    result = invoke(tmp_path, "grid")
    assert result.exit_code == 0, result.output
    frame, metadata = read_csv(tmp_path / "grid_problem2-stretch_33x33.csv")
    assert len(frame) == 33 * 33
    assert metadata["mapping"] == "problem2-stretch"


def test_field_with_a_config_file(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("problem = problem2\nepsilon = 0.1\ngrid.M = 8\ngrid.N = 8\n")
    result = invoke(tmp_path, "--config", str(config), "field")
    assert result.exit_code == 0, result.output
    frame, _ = read_csv(tmp_path / "field_problem2_9x9.csv")
    assert len(frame) == 81


def test_convergence_options_override_the_file(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("problem = problem2\ngrids = 16, 32\n")
    result = invoke(tmp_path, "--config", str(config), "--set", "time.t_end=0.0625", "convergence", "--problem", "problem1", "--grids", "4")
    assert result.exit_code == 0, result.output
    frame, metadata = read_csv(tmp_path / "convergence_problem1_grid.csv")
    assert metadata["problem"] == "problem1"
    assert list(frame["label"]) == ["5x5"]


@pytest.mark.parametrize(
    "args",
    [
        ("--set", "problem=problem7", "field"),
        ("--set", "grid.M=1", "field"),
        ("--set", "solver.relaxation=2", "dispersion"),
        ("--set", "mapping=spiral", "grid"),
        ("--config", "missing.cfg", "dispersion"),
        ("--set", "stability.coefficients.beta=2", "stability"),
    ],
)
def test_configuration_errors(tmp_path, args):
    result = invoke(tmp_path, *args)
    assert result.exit_code == EXIT_CONFIG, result.output


def test_solver_failure(tmp_path):
    result = invoke(tmp_path, "--set", "solver.max_outer=1", "--set", "solver.tolerance=1e-14", "--set", "grid.M=8", "--set", "grid.N=8", "field")
    assert result.exit_code == EXIT_SOLVER, result.output


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory")
    result = runner.invoke(app, ["--quiet", "--out", str(blocker), "dispersion"])
    assert result.exit_code == EXIT_IO, result.output
