# hocpde/schemas.py
from pathlib import Path
from typing import List, Literal, Optional, Tuple
import math

from pydantic import BaseModel, Field, field_validator, model_validator

from .config import settings
from .exceptions import ConfigurationError
from .models import InnerSolver, MappingKind


class GridSpec(BaseModel):
    M: int = Field(20, ge=2)
    N: int = Field(20, ge=2)
    bounds: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)


class MappingSpec(BaseModel):
    kind: MappingKind = MappingKind.IDENTITY
    lambda_: float = Field(0.9, alias="lambda", ge=0.0, lt=1.0)
    scale: float = Field(0.5, gt=0.0)

    class Config:
        populate_by_name = True


class SolverConfig(BaseModel):
    tolerance: float = Field(default_factory=lambda: settings.solver_tolerance, gt=0.0)
    max_outer: int = Field(default_factory=lambda: settings.solver_max_outer, ge=1)
    inner: InnerSolver = Field(default_factory=lambda: InnerSolver(settings.solver_inner))
    relaxation: float = Field(default_factory=lambda: settings.solver_relaxation, ge=0.3, le=1.0)
    # relative reduction asked of every inner solve, and its iteration cap
    inner_tolerance: float = Field(1e-3, gt=0.0, lt=1.0)
    inner_max_iterations: int = Field(400, ge=1)


class TimeIntegratorConfig(BaseModel):
    iota: float = Field(0.5, ge=0.0, le=1.0)
    dt: float = Field(..., gt=0.0)
    t_end: float = Field(..., ge=0.0)

    @property
    def steps(self) -> int:
        """Number of steps; dt has to divide t_end."""
        n = round(self.t_end / self.dt)
        if not math.isclose(n * self.dt, self.t_end, rel_tol=1e-9, abs_tol=1e-14):
            raise ConfigurationError(f"dt={self.dt} does not divide t_end={self.t_end}")
        return n

    def growth_bound(self, d_min: float) -> float:
        """Largest dt allowed by the d < 0 stability condition (inf when it does not apply)."""
        if d_min >= 0.0 or self.iota == 0.0:
            return math.inf
        return -1.0 / (self.iota * d_min)

    def check_growth_bound(self, d_min: float) -> None:
        bound = self.growth_bound(d_min)
        if self.dt >= bound:
            raise ConfigurationError(f"dt={self.dt} violates the growth bound dt < {bound:.6g} for min d={d_min:.6g}, iota={self.iota}")


class CouplingSpec(BaseModel):
    tolerance: float = Field(1e-8, gt=0.0)
    max_iterations: int = Field(50, ge=1)


class NSConfig(BaseModel):
    re: float = Field(100.0, gt=0.0)
    dt: float = Field(0.01, gt=0.0)
    t_end: float = Field(0.1, ge=0.0)
    coupling_tolerance: float = Field(1e-8, gt=0.0)
    max_coupling_iterations: int = Field(50, ge=1)
    convection: bool = True

    @property
    def time_integrator(self) -> TimeIntegratorConfig:
        return TimeIntegratorConfig(iota=0.5, dt=self.dt, t_end=self.t_end)


class ConstantCoefficients(BaseModel):
    alpha1: float = Field(1.0, gt=0.0)
    alpha2: float = Field(1.0, gt=0.0)
    beta: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    d: float = 0.0

    class Config:
        frozen = True

    def positive_definite(self) -> bool:
        return self.beta**2 < 4.0 * self.alpha1 * self.alpha2


class TimeSpec(BaseModel):
    dt: Optional[float] = Field(None, gt=0.0)
    t_end: float = Field(0.25, ge=0.0)
    iota: float = Field(0.5, ge=0.0, le=1.0)
    dt_rule: Literal["h2", "fixed"] = "h2"
    dts: List[float] = []
    checkpoints: List[float] = []


class StabilitySpec(BaseModel):
    coefficients: ConstantCoefficients = ConstantCoefficients()
    h: float = Field(0.1, gt=0.0)
    k: float = Field(0.1, gt=0.0)
    dt: float = Field(0.01, gt=0.0)
    iota: float = Field(0.5, ge=0.0, le=1.0)
    resolution: int = Field(64, ge=8)


class DispersionSpec(BaseModel):
    k2k: List[float] = [0.5, 1.0, 1.5, 2.0]
    resolution: int = Field(101, ge=2)


class RunConfig(BaseModel):
    problem: str = "problem1"
    epsilon: float = Field(0.01, gt=0.0)
    re: float = Field(100.0, gt=0.0)
    grid: GridSpec = GridSpec()
    grids: List[int] = [10, 20, 40]
    time: TimeSpec = TimeSpec()
    solver: SolverConfig = Field(default_factory=SolverConfig)
    mapping: MappingSpec = MappingSpec()
    coupling: CouplingSpec = CouplingSpec()
    stability: StabilitySpec = StabilitySpec()
    dispersion: DispersionSpec = DispersionSpec()
    out: Path = Field(default_factory=lambda: settings.output_dir)
    format: Literal["csv"] = "csv"

    @field_validator("mapping", mode="before")
    @classmethod
    def _mapping_from_name(cls, value):
        if isinstance(value, str):
            return {"kind": value}
        return value

    @field_validator("grids", "time", mode="before")
    @classmethod
    def _scalar_to_list(cls, value, info):
        if info.field_name == "grids" and isinstance(value, (str, int)):
            return [value]
        if info.field_name == "time" and isinstance(value, dict):
            return {key: [item] if key in ("dts", "checkpoints") and isinstance(item, (str, float, int)) else item for key, item in value.items()}
        return value

    @model_validator(mode="after")
    def _check_problem(self):
        if self.problem not in ("problem1", "problem2", "ns-vortex"):
            raise ValueError(f"unknown problem {self.problem!r}")
        return self


class IterationReport(BaseModel):
    iterations: int
    residual: float
    residual_history: List[float] = []
    inner_iterations: int = 0
    converged: bool = True


class ErrorNorms(BaseModel):
    l1: float
    l2: float
    linf: float


class ConvergenceRow(BaseModel):
    label: str
    l1: float
    l1_order: Optional[float] = None
    l2: float
    l2_order: Optional[float] = None
    linf: float
    linf_order: Optional[float] = None


class StabilitySample(BaseModel):
    theta_x: float
    theta_y: float
    F_R: float
    F_I: float
    G_magnitude: float = Field(..., ge=0.0)
    coefficients: ConstantCoefficients
    h: float
    k: float
    dt: float
    iota: float


class StabilityReport(BaseModel):
    max_G: float
    theta_x: float
    theta_y: float
    resolution: int
    growth_rate: float
    admissible: bool
    dt_bound: float


class DispersionSample(BaseModel):
    kappa1_h: float
    kappa2_k: float
    lambda_exact: float
    lambda_4oc_m: float
    lambda_2oc: float
    lambda_4ow: float
