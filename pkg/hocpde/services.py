# hocpde/services.py
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .analysis import dispersion_table, stability_scan
from .assembly import assemble_steady, march, march_to_steady, sample_coefficients
from .exceptions import ConfigurationError
from .grid import build_uniform_grid, mapping_by_name, physical_nodes
from .models import Grid2D, MappingKind, SolutionState
from .navier_stokes import simulate
from .problems import NSProblem, TestProblem, convergence_order, error_norms, problem_by_name
from .schemas import ConvergenceRow, ErrorNorms, IterationReport, NSConfig, RunConfig, TimeIntegratorConfig
from .solver import solve_block
from .utils import records_frame, write_csv

logger = logging.getLogger(__name__)


def _problem(config: RunConfig):
    return problem_by_name(config.problem, epsilon=config.epsilon, re=config.re, lam=config.mapping.lambda_)


def _grid(config: RunConfig, M: Optional[int] = None, N: Optional[int] = None) -> Grid2D:
    return build_uniform_grid(config.grid.bounds, M or config.grid.M, N or M or config.grid.N)


def _mapping(config: RunConfig):
    return mapping_by_name(config.mapping.kind, lam=config.mapping.lambda_, scale=config.mapping.scale)


def _ns_config(config: RunConfig, dt: Optional[float] = None) -> NSConfig:
    return NSConfig(
        re=config.re,
        dt=dt or config.time.dt or 0.01,
        t_end=config.time.t_end,
        coupling_tolerance=config.coupling.tolerance,
        max_coupling_iterations=config.coupling.max_iterations,
    )


def worst_residual(reports: Sequence[IterationReport]) -> float:
    return max((r.residual for r in reports), default=0.0)


def convergence_rows(labels: Sequence[str], norms: Sequence[ErrorNorms]) -> List[ConvergenceRow]:
    """Rows with orders between consecutive levels; the first level has none."""
    rows = []
    for n, (label, e) in enumerate(zip(labels, norms)):
        row = ConvergenceRow(label=label, l1=e.l1, l2=e.l2, linf=e.linf)
        if n > 0:
            prev = norms[n - 1]
            row.l1_order = convergence_order(prev.l1, e.l1)
            row.l2_order = convergence_order(prev.l2, e.l2)
            row.linf_order = convergence_order(prev.linf, e.linf)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------


def solve_steady(problem: TestProblem, grid: Grid2D, config: RunConfig, pseudo_time: bool = False) -> Tuple[SolutionState, List[IterationReport]]:
    coeffs = sample_coefficients(problem.coefficient_functions(), grid, 0.0, problem.mapping, problem.metrics(grid))
    bc = problem.boundary_spec()
    if pseudo_time:
        dt = config.time.dt or grid.h
        state, steps = march_to_steady(coeffs, bc, grid, dt, config.solver)
        logger.info(f"{problem.name} pseudo-time solve on {grid.label()}: {steps} steps of dt={dt:g}")
        return state, []
    state, report = solve_block(assemble_steady(coeffs, bc, grid), None, config.solver)
    logger.info(f"{problem.name} steady solve on {grid.label()}: {report.iterations} outer iterations, residual {report.residual:.2e}")
    return state, [report]


def solve_unsteady(
    problem: TestProblem, grid: Grid2D, dt: float, config: RunConfig, checkpoints: Sequence[float], progress: bool = True
) -> Tuple[Dict[float, SolutionState], List[IterationReport]]:
    t_end = max(checkpoints)
    cfg = TimeIntegratorConfig(iota=config.time.iota, dt=dt, t_end=t_end)
    _, reports, snapshots = march(problem, grid, cfg, config.solver, record_at=checkpoints, progress=progress)
    return snapshots, reports


def _dt_for(grid: Grid2D, config: RunConfig) -> float:
    if config.time.dt is not None:
        return config.time.dt
    return grid.h**2


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_convergence(config: RunConfig, progress: bool = True, timestamp: bool = True) -> Tuple[pd.DataFrame, Path]:
    """Error norms and observed orders over a sequence of grids (or time steps)."""
    problem = _problem(config)
    checkpoints = config.time.checkpoints or [config.time.t_end]
    if isinstance(problem, NSProblem) or problem.steady:
        checkpoints = [checkpoints[-1]]
    fixed_dt = config.time.dt_rule == "fixed"
    levels = config.time.dts if fixed_dt else config.grids
    if not levels:
        raise ConfigurationError("convergence needs at least one grid or time step")

    labels: Dict[float, List[str]] = {t: [] for t in checkpoints}
    norms: Dict[float, List[ErrorNorms]] = {t: [] for t in checkpoints}
    residuals: List[IterationReport] = []
    path = Path(config.out) / f"convergence_{problem.name}_{'dt' if fixed_dt else 'grid'}.csv"

    def table() -> pd.DataFrame:
        frames = []
        for t in (t for t in checkpoints if labels[t]):
            frame = records_frame(convergence_rows(labels[t], norms[t]))
            frame.insert(0, "t", t)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def metadata():
        return {
            "problem": problem.name,
            "dt_rule": config.time.dt_rule,
            "iota": config.time.iota,
            "solver_residual": worst_residual(residuals),
        }

    try:
        for level in tqdm(levels, desc="levels", disable=not progress):
            grid = _grid(config) if fixed_dt else _grid(config, int(level))
            if isinstance(problem, NSProblem):
                dt = float(level) if fixed_dt else (config.time.dt or 0.01)
                flow, _ = simulate(problem, _mapping(config), grid, _ns_config(config, dt), config.solver, progress=progress)
                X, Y = physical_nodes(_mapping(config), grid)
                labels[checkpoints[0]].append(f"dt={dt:g}" if fixed_dt else grid.label())
                norms[checkpoints[0]].append(error_norms(flow.omega.phi, problem.omega(X, Y, flow.time), grid))
                continue
            if problem.steady:
                state, reports = solve_steady(problem, grid, config)
                residuals += reports
                for t in checkpoints:
                    labels[t].append(grid.label())
                    norms[t].append(error_norms(state.phi, problem.exact_on_grid(grid), grid))
                continue
            dt = float(level) if fixed_dt else _dt_for(grid, config)
            snapshots, reports = solve_unsteady(problem, grid, dt, config, checkpoints, progress)
            residuals += reports
            for t in checkpoints:
                labels[t].append(f"dt={dt:g}" if fixed_dt else grid.label())
                norms[t].append(error_norms(snapshots[t].phi, problem.exact_on_grid(grid, t), grid))
            logger.info(f"{problem.name} {labels[checkpoints[-1]][-1]}: Linf error {norms[checkpoints[-1]][-1].linf:.4e}")
    except Exception:
        if any(labels.values()):
            write_csv(path.with_name(path.stem + "_partial.csv"), table(), metadata(), timestamp)
            logger.error(f"Convergence run aborted; partial table written next to {path}")
        raise

    frame = table()
    write_csv(path, frame, metadata(), timestamp)
    return frame, path


def run_field(config: RunConfig, pseudo_time: bool = False, progress: bool = True, timestamp: bool = True) -> Tuple[pd.DataFrame, Path]:
    """Physical-domain snapshot (x, y, value) of one solve, with errors when the exact solution is known."""
    problem = _problem(config)
    grid = _grid(config)
    meta = {"problem": problem.name, "grid": grid.label()}
    if isinstance(problem, NSProblem):
        mapping = _mapping(config)
        ns_cfg = _ns_config(config)
        flow, _ = simulate(problem, mapping, grid, ns_cfg, config.solver, progress=progress)
        X, Y = physical_nodes(mapping, grid)
        values, exact, t = flow.omega.phi, problem.omega(X, Y, flow.time), flow.time
        meta.update(dt=ns_cfg.dt, iota=0.5, t=t)
    elif problem.steady:
        state, reports = solve_steady(problem, grid, config, pseudo_time)
        X, Y = physical_nodes(problem.mapping, grid)
        values, exact = state.phi, problem.exact_on_grid(grid)
        meta.update(solver_residual=worst_residual(reports), pseudo_time=pseudo_time)
    else:
        dt = _dt_for(grid, config)
        snapshots, reports = solve_unsteady(problem, grid, dt, config, [config.time.t_end], progress)
        X, Y = physical_nodes(problem.mapping, grid)
        values, exact = snapshots[config.time.t_end].phi, problem.exact_on_grid(grid, config.time.t_end)
        meta.update(dt=dt, iota=config.time.iota, t=config.time.t_end, solver_residual=worst_residual(reports))

    error = np.abs(values - exact)
    meta["max_error"] = float(np.max(error))
    frame = pd.DataFrame(
        {"x": X.ravel(order="F"), "y": Y.ravel(order="F"), "value": values.ravel(order="F"), "exact": exact.ravel(order="F"), "error": error.ravel(order="F")}
    )
    path = write_csv(Path(config.out) / f"field_{problem.name}_{grid.label()}.csv", frame, meta, timestamp)
    logger.info(f"{problem.name} on {grid.label()}: max error {meta['max_error']:.3e}")
    return frame, path


def run_dispersion(config: RunConfig, timestamp: bool = True) -> Tuple[pd.DataFrame, Path]:
    spec = config.dispersion
    frame = records_frame(dispersion_table(spec.k2k, spec.resolution))
    meta = {"normalisation": "h=k=1", "resolution": spec.resolution}
    return frame, write_csv(Path(config.out) / "dispersion.csv", frame, meta, timestamp)


def run_stability(config: RunConfig, timestamp: bool = True) -> Tuple[pd.DataFrame, Path]:
    spec = config.stability
    report = stability_scan(spec.coefficients, spec.h, spec.k, spec.dt, spec.iota, spec.resolution)
    frame = records_frame([report])
    meta = {**spec.coefficients.model_dump(), "h": spec.h, "k": spec.k, "dt": spec.dt, "iota": spec.iota}
    if report.max_G > 1.0 + 1e-12:
        logger.warning(f"max|G| = {report.max_G:.6g} exceeds 1 (growth rate {report.growth_rate:.4g})")
    return frame, write_csv(Path(config.out) / "stability.csv", frame, meta, timestamp)


def run_ns_vortex(config: RunConfig, progress: bool = True, timestamp: bool = True) -> Tuple[pd.DataFrame, Path, Path]:
    """Time series of kinetic energy, peak vorticity and errors, plus the final psi/omega snapshot."""
    problem = problem_by_name("ns-vortex", re=config.re)
    mapping = _mapping(config)
    grid = _grid(config)
    ns_cfg = _ns_config(config)
    flow, rows = simulate(problem, mapping, grid, ns_cfg, config.solver, progress=progress)
    series = pd.DataFrame(rows)
    meta = {"problem": problem.name, "mapping": mapping.name, "grid": grid.label(), "re": ns_cfg.re, "dt": ns_cfg.dt, "iota": 0.5}
    out = Path(config.out)
    series_path = write_csv(out / f"ns_vortex_{mapping.name}_{grid.label()}.csv", series, meta, timestamp)
    X, Y = physical_nodes(mapping, grid)
    snapshot = pd.DataFrame(
        {
            "x": X.ravel(order="F"),
            "y": Y.ravel(order="F"),
            "psi": flow.psi.phi.ravel(order="F"),
            "omega": flow.omega.phi.ravel(order="F"),
            "u": flow.u.ravel(order="F"),
            "v": flow.v.ravel(order="F"),
        }
    )
    snapshot_path = write_csv(out / f"ns_vortex_{mapping.name}_{grid.label()}_t{flow.time:g}.csv", snapshot, {**meta, "t": flow.time}, timestamp)
    return series, series_path, snapshot_path


def run_grid(config: RunConfig, timestamp: bool = True) -> Tuple[pd.DataFrame, Path]:
    """Physical coordinates of every node of the configured mapping."""
    mapping = _mapping(config)
    grid = _grid(config)
    X, Y = physical_nodes(mapping, grid)
    XI, ETA = grid.mesh
    I, J = np.meshgrid(np.arange(grid.M + 1), np.arange(grid.N + 1), indexing="ij")
    frame = pd.DataFrame(
        {
            "i": I.ravel(order="F"),
            "j": J.ravel(order="F"),
            "xi": XI.ravel(order="F"),
            "eta": ETA.ravel(order="F"),
            "x": X.ravel(order="F"),
            "y": Y.ravel(order="F"),
        }
    )
    meta = {"mapping": mapping.name, "grid": grid.label()}
    if config.mapping.kind is MappingKind.PROBLEM2_STRETCH:
        meta["lambda"] = config.mapping.lambda_
    return frame, write_csv(Path(config.out) / f"grid_{mapping.name}_{grid.label()}.csv", frame, meta, timestamp)
