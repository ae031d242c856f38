"""Pydantic models for data validation."""

import math
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


Method = Literal["exp-midpoint-2", "magnus-cf-4"]
SignConvention = Literal["paper", "physics"]


class ParameterPoint(BaseModel):
    """A point (t, sigma^m) of the trivialized parameter bundle R x Z."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(..., description="Time coordinate")
    sigma: tuple[float, ...] = Field(default=(), description="Coordinates sigma^m on Z")

    @field_validator("t")
    @classmethod
    def _finite_t(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("t must be finite")
        return value

    @field_validator("sigma")
    @classmethod
    def _finite_sigma(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(x) for x in value):
            raise ValueError("sigma coordinates must be finite")
        return value

    @property
    def d(self) -> int:
        return len(self.sigma)

    def bindings(self) -> dict[str, float]:
        """Variable bindings (t, s1..sd) for expression evaluation."""
        env = {"t": self.t}
        for m, value in enumerate(self.sigma, start=1):
            env[f"s{m}"] = value
        return env


class SpectralBlock(BaseModel):
    """Eigenvalue cluster lambda_k with projector P_k onto E_k."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalue: float = Field(..., description="Cluster eigenvalue (mean of the cluster)")
    projector: np.ndarray = Field(..., description="Orthogonal projector P_k")
    block_dim: int = Field(..., ge=1, description="dim E_k = trace(P_k)")
    basis: np.ndarray = Field(..., description="Orthonormal columns spanning E_k")


class IntegratorConfig(BaseModel):
    """Time-ordered exponential integrator settings."""

    model_config = ConfigDict(frozen=True)

    method: Method = Field(default="exp-midpoint-2", description="Step scheme")
    tol: float = Field(default=1e-8, gt=0, description="Requested global accuracy")
    max_steps: int = Field(default=1_000_000, ge=1, description="Attempted-step budget")
    initial_step: Optional[float] = Field(default=None, gt=0, description="First trial step")

    @property
    def order(self) -> int:
        return 2 if self.method == "exp-midpoint-2" else 4


class Propagator(BaseModel):
    """Unitary G(t_end, t_start) with accuracy metadata."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    U: np.ndarray
    t_start: float
    t_end: float
    steps_taken: int = 0
    defect: float = 0.0
    tol: float = 0.0

    @model_validator(mode="after")
    def _check_interval(self) -> "Propagator":
        # zero-length intervals only for the identity element of compose
        if self.t_end < self.t_start:
            raise ValueError("t_start must precede t_end")
        return self

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @classmethod
    def identity(cls, n: int, t: float) -> "Propagator":
        return cls(U=np.eye(n, dtype=complex), t_start=t, t_end=t)


class HolonomyResult(BaseModel):
    """Parallel-transport operator W along a curve in a Z slice."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    W: np.ndarray
    loop_length: float
    defect: float
    abelian: Optional[float] = Field(default=None, description="arg(w) if W = w*I")
    eigenphases: list[float] = Field(default_factory=list, description="Sorted arg of eig(W)")
    steps_taken: int = 0


class BlockPhase(BaseModel):
    """Geometric factor and dynamical phase of one eigenspace block."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalue: float
    block_dim: int
    basis: np.ndarray
    geometric: np.ndarray
    dynamical_phase: float
    geometric_phase: Optional[float] = Field(default=None, description="Abelian phase for 1-dim blocks")


class CommandOptions(BaseModel):
    """Options shared by every CLI command."""

    scenario: str = Field(..., description="Scenario file or template name")
    overrides: dict[str, float] = Field(default_factory=dict, description="--set constant overrides")
    path: Optional[str] = Field(None, description="Named path (or loop) in the scenario")
    t0: Optional[float] = None
    t1: Optional[float] = None
    tol: Optional[float] = Field(None, gt=0)
    method: Optional[Method] = None
    out: Optional[str] = None
    jobs: int = Field(default=1, ge=1)
    sign_convention: Optional[SignConvention] = None
    t_slice: float = 0.0
    state: Optional[int] = Field(default=None, ge=0, description="Initial basis state index for run")
    base_steps: int = Field(default=16, ge=1)
    variable: Optional[str] = None
    values: list[float] = Field(default_factory=list)
    inner: str = "transport"
    table: Optional[str] = None


class CommandRecord(BaseModel):
    """One JSON-lines output record."""

    command: str
    scenario: str
    status: Literal["ok", "error"] = "ok"
    error_code: Optional[str] = None
    error: Optional[str] = None
    summary: dict[str, Optional[float]] = Field(default_factory=dict, description="Scalar columns")
    data: dict[str, Any] = Field(default_factory=dict, description="Full payload")
