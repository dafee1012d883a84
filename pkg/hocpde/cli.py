# hocpde/cli.py
import logging
from functools import wraps
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from pydantic import ValidationError

from . import services
from .config import load_config_file, merge, settings
from .exceptions import ConfigurationError, DomainError, HocError, SolverError
from .schemas import RunConfig

logger = logging.getLogger(__name__)

app = typer.Typer(help="Fourth-order compact solver for convection-diffusion and stream function-vorticity problems.")

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class _State:
    quiet: bool = False
    timestamp: bool = True
    out: Optional[Path] = None
    config: Optional[Path] = None
    overrides: List[str] = []


state = _State()


@app.callback()
def main(
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only warnings and errors; no progress bars."),
    no_timestamp: bool = typer.Option(False, "--no-timestamp", help="Leave the '# generated:' line out of the CSV header."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (default from HOCPDE_OUTPUT_DIR)."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Run config file of 'key = value' lines."),
    overrides: Optional[List[str]] = typer.Option(None, "--set", "-s", help="Override a config key, e.g. --set grid.M=40."),
):
    level = logging.WARNING if quiet else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)
    state.quiet = quiet
    state.timestamp = settings.timestamp and not no_timestamp
    state.out = out
    state.config = config
    state.overrides = list(overrides or [])


def _run_config(defaults: Optional[Dict[str, Any]] = None, **options: Any) -> RunConfig:
    """Defaults < config file < command options < --set flags."""
    tree = merge(defaults or {}, load_config_file(state.config))
    tree = merge(tree, {key: value for key, value in options.items() if value is not None})
    if state.overrides:
        tree = merge(tree, load_config_file(None, state.overrides))
    if state.out is not None:
        tree["out"] = state.out
    return RunConfig.model_validate(tree)


def _exit_on_error(command):
    """Map library errors onto process exit codes."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ConfigurationError, DomainError, ValidationError) as e:
            logger.error(f"Configuration error: {e}")
            raise typer.Exit(EXIT_CONFIG)
        except SolverError as e:
            logger.error(f"Solver failed: {e}")
            raise typer.Exit(EXIT_SOLVER)
        except OSError as e:
            logger.error(f"I/O error: {e}")
            raise typer.Exit(EXIT_IO)
        except HocError as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise typer.Exit(EXIT_CONFIG)

    return wrapper


@app.command()
@_exit_on_error
def convergence(
    problem: Optional[str] = typer.Option(None, "--problem", "-p", help="problem1, problem2 or ns-vortex."),
    grids: Optional[str] = typer.Option(None, "--grids", help="Comma separated interval counts, e.g. 10,20,40."),
    dt_rule: Optional[str] = typer.Option(None, "--dt-rule", help="'h2' (dt = h^2) or 'fixed' (over time.dts)."),
):
    """
    Error norms and observed orders over a grid (or time step) sequence.
    """
    options: Dict[str, Any] = {"problem": problem, "grids": grids.split(",") if grids else None}
    if dt_rule:
        options["time"] = {"dt_rule": dt_rule}
    frame, path = services.run_convergence(_run_config(**options), progress=not state.quiet, timestamp=state.timestamp)
    if not state.quiet:
        print(frame.to_string(index=False))
    print(f"Wrote {path}")


@app.command()
@_exit_on_error
def field(
    problem: Optional[str] = typer.Option(None, "--problem", "-p"),
    pseudo_time: bool = typer.Option(False, "--pseudo-time", help="Reach the steady state by iota=0.5 marching."),
):
    """
    Physical-domain solution snapshot with pointwise errors.
    """
    _, path = services.run_field(
        _run_config(problem=problem), pseudo_time=pseudo_time, progress=not state.quiet, timestamp=state.timestamp
    )
    print(f"Wrote {path}")


@app.command()
@_exit_on_error
def dispersion():
    """
    Mixed-derivative characteristics of the exact, compact and wide schemes.

    Writes dispersion.csv with columns kappa1_h, kappa2_k, lambda_exact, lambda_4oc_m, lambda_2oc and
    lambda_4ow, one block of rows per kappa2_k.
    """
    _, path = services.run_dispersion(_run_config(), timestamp=state.timestamp)
    print(f"Wrote {path}")


@app.command()
@_exit_on_error
def stability():
    """
    Largest amplification factor over the phase grid for constant coefficients.
    """
    frame, path = services.run_stability(_run_config(), timestamp=state.timestamp)
    report = frame.iloc[0]
    print(f"max|G| = {report['max_G']:.15g} at theta = ({report['theta_x']:.4f}, {report['theta_y']:.4f})")
    print(f"Wrote {path}")


@app.command("ns-vortex")
@_exit_on_error
def ns_vortex():
    """
    Decaying vortex array in stream function-vorticity form.
    """
    series, series_path, snapshot_path = services.run_ns_vortex(
        _run_config(problem="ns-vortex"), progress=not state.quiet, timestamp=state.timestamp
    )
    last = series.iloc[-1]
    print(f"t = {last['time']:.6g}: kinetic energy {last['kinetic_energy']:.6e}, max|omega| {last['max_abs_omega']:.6e}")
    print(f"Wrote {series_path}")
    print(f"Wrote {snapshot_path}")


@app.command()
@_exit_on_error
def grid():
    """
    Physical node coordinates of a mapped grid.
    """
    defaults = {"mapping": {"kind": "problem2-stretch"}, "grid": {"M": 32, "N": 32}}
    _, path = services.run_grid(_run_config(defaults), timestamp=state.timestamp)
    print(f"Wrote {path}")


if __name__ == "__main__":
    app()
