"""
Pydantic Schemas for Model Parameters, Analytic Results and Experiment Records
"""

from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, List, Tuple
from pathlib import Path
import math

from models import DesignGoal, MinDegreeRegime, TargetKind, FigureId


# ============================================================================
# MODEL PARAMETER SCHEMAS
# ============================================================================

class ModelParams(BaseModel):
    """The tuple (n, K, P, p, q) of a q-composite graph with on/off channels"""
    n: int = Field(..., ge=2, description="Number of nodes")
    K: int = Field(..., ge=1, description="Key-ring size")
    P: int = Field(..., ge=1, description="Key-pool size")
    p: float = Field(..., ge=0.0, le=1.0, description="Channel-on probability")
    q: int = Field(..., ge=1, description="Required number of shared keys")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_ring_fits_pool(self):
        if self.K > self.P:
            raise ValueError(f"Key-ring size K={self.K} exceeds pool size P={self.P}")
        return self

    def with_ring_size(self, K: int) -> "ModelParams":
        return self.model_copy(update={"K": K})

    def header(self) -> str:
        return f"n={self.n} K={self.K} P={self.P} p={self.p:g} q={self.q}"


# ============================================================================
# ANALYTIC RESULT SCHEMAS
# ============================================================================

class LinkProbabilities(BaseModel):
    p_sq: float = Field(..., ge=0.0, le=1.0)
    p_eq: float = Field(..., ge=0.0, le=1.0)
    pool_size_warning: bool = False  # set when P < 2K


class AsymptoticDecomposition(BaseModel):
    """
    Decompositions of n * p_eq - ln n.

    alpha solves p_eq = (ln n + (k-1) ln ln n + alpha) / n for the requested k;
    (ell_star, gamma_star) is the best-fit integer level and its residual.
    The fine-grained law writes alpha = b ln ln n + beta with
    b = ell_star - k and beta = gamma_star.
    """
    n: int
    k: Optional[int] = None
    alpha: Optional[float] = None
    ell_star: Optional[int] = None
    gamma_star: Optional[float] = None

    @property
    def log_log_n(self) -> float:
        return math.log(math.log(self.n))

    @property
    def b(self) -> Optional[int]:
        if self.k is None or self.ell_star is None:
            return None
        return self.ell_star - self.k

    @property
    def beta(self) -> Optional[float]:
        return self.gamma_star

    @property
    def within_fine_grained_range(self) -> Optional[bool]:
        """Finite-n reading of -1 < beta / ln ln n < 1"""
        if self.gamma_star is None:
            return None
        return abs(self.gamma_star) < self.log_log_n


class MinDegreePmf(BaseModel):
    support: List[Tuple[int, float]]  # ascending degree value
    regime: MinDegreeRegime

    def probability(self, degree: int) -> float:
        for value, prob in self.support:
            if value == degree:
                return prob
        return 0.0

    def tail_above(self, degree: int) -> float:
        return sum(prob for value, prob in self.support if value > degree)


class DesignReport(BaseModel):
    n: int
    P: int
    p: float
    q: int
    k: int
    goal: DesignGoal
    constant: float  # c1, rho or c2 depending on goal
    threshold: float
    K: int
    p_eq: float
    key_ratio: float  # K^2 / P
    prob_min_degree_at_least: float
    min_degree_pmf: MinDegreePmf


# ============================================================================
# EXPERIMENT SCHEMAS
# ============================================================================

class Target(BaseModel):
    """One observable recorded per trial"""
    kind: TargetKind
    k: Optional[int] = Field(None, ge=0)
    max_k: Optional[int] = Field(None, ge=0)
    h: Optional[int] = Field(None, ge=0)
    max_count: Optional[int] = Field(None, ge=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_arguments(self):
        required = {
            TargetKind.MIN_DEGREE_GE: ("k",),
            TargetKind.MIN_DEGREE_PMF: ("max_k",),
            TargetKind.PHI_COUNT_DIST: ("h", "max_count"),
            TargetKind.EDGE_DENSITY: (),
        }[self.kind]
        for name in required:
            if getattr(self, name) is None:
                raise ValueError(f"Target {self.kind.value} requires '{name}'")
        return self

    @classmethod
    def min_degree_ge(cls, k: int) -> "Target":
        return cls(kind=TargetKind.MIN_DEGREE_GE, k=k)

    @classmethod
    def min_degree_pmf(cls, max_k: int) -> "Target":
        return cls(kind=TargetKind.MIN_DEGREE_PMF, max_k=max_k)

    @classmethod
    def phi_count_dist(cls, h: int, max_count: int) -> "Target":
        return cls(kind=TargetKind.PHI_COUNT_DIST, h=h, max_count=max_count)

    @classmethod
    def edge_density(cls) -> "Target":
        return cls(kind=TargetKind.EDGE_DENSITY)

    @property
    def label(self) -> str:
        if self.kind == TargetKind.MIN_DEGREE_GE:
            return f"min_degree_ge({self.k})"
        if self.kind == TargetKind.MIN_DEGREE_PMF:
            return f"min_degree_pmf({self.max_k})"
        if self.kind == TargetKind.PHI_COUNT_DIST:
            return f"phi_count_dist({self.h},{self.max_count})"
        return "edge_density"


class ExperimentConfig(BaseModel):
    params: ModelParams
    trials: int = Field(2000, ge=1)
    base_seed: int = Field(..., ge=0, lt=2 ** 64)
    targets: List[Target]
    trial_offset: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    block_size: Optional[int] = Field(None, ge=1)

    @field_validator("targets")
    def validate_targets(cls, v):
        if not v:
            raise ValueError("At least one target is required")
        return v


class TargetEstimate(BaseModel):
    """
    Empirical estimate for a count-based target.

    For min_degree_ge the single bin counts trials with min degree >= k.
    For the two distribution targets the bins are the values in `support`
    and `tail_count` collects trials above the last support value.
    """
    target: Target
    support: List[int]
    counts: List[int]
    tail_count: int = 0
    estimates: List[float]
    tail_estimate: float = 0.0
    standard_errors: List[float]


class EdgeDensityEstimate(BaseModel):
    edge_total: int
    edge_square_total: int
    pair_count: int  # n(n-1)/2
    mean: float
    standard_error: float


class TrialSummary(BaseModel):
    params: ModelParams
    trials: int
    base_seed: int
    trial_offset: int = 0
    estimates: List[TargetEstimate] = []
    edge_density: Optional[EdgeDensityEstimate] = None
    wall_time: float = 0.0

    def estimate_for(self, target: Target) -> TargetEstimate:
        for est in self.estimates:
            if est.target == target:
                return est
        raise KeyError(target.label)

    def counters(self) -> dict:
        """Integer counters only, the reproducible part of a summary"""
        data = {est.target.label: (est.counts, est.tail_count) for est in self.estimates}
        if self.edge_density is not None:
            data["edge_density"] = (
                self.edge_density.edge_total,
                self.edge_density.edge_square_total,
            )
        return data


class ComparisonRow(BaseModel):
    value: Optional[int] = None  # support value; None for scalar targets
    empirical: float
    analytic: float
    gap: float


class ComparisonEntry(BaseModel):
    target: Target
    rows: List[ComparisonRow]
    empirical_tail: float = 0.0
    analytic_tail: float = 0.0
    total_variation: Optional[float] = None
    poisson_mean: Optional[float] = None


class ComparisonReport(BaseModel):
    params: ModelParams
    trials: int
    entries: List[ComparisonEntry]
    alpha_by_k: List[Tuple[int, float]] = []
    ell_star: Optional[int] = None
    gamma_star: Optional[float] = None


# ============================================================================
# FIGURE SCHEMAS
# ============================================================================

class FigureSpec(BaseModel):
    figure: FigureId
    n: int = Field(..., ge=3)
    P: int = Field(..., ge=1)
    p: float = Field(..., ge=0.0, le=1.0)
    q: int = Field(..., ge=1)
    K_values: List[int]
    k_values: List[int] = []
    h_values: List[int] = []
    max_count: int = Field(20, ge=0)
    trials: int = Field(2000, ge=1)
    base_seed: int = Field(..., ge=0, lt=2 ** 64)
    workers: int = Field(1, ge=1)
    output_dir: Path

    @model_validator(mode="after")
    def check_grids(self):
        if not self.K_values:
            raise ValueError("K grid must not be empty")
        if self.figure in (FigureId.FIG1, FigureId.FIG2) and not self.k_values:
            raise ValueError(f"{self.figure.value} needs a non-empty k grid")
        if self.figure == FigureId.FIG3 and not self.h_values:
            raise ValueError("fig3 needs a non-empty h grid")
        if self.figure == FigureId.FIG3 and len(self.K_values) != 1:
            raise ValueError("fig3 is drawn at a single K")
        if self.figure == FigureId.FIG1 and min(self.k_values) < 1:
            raise ValueError("fig1 k values must be >= 1")
        return self

    @classmethod
    def default(cls, figure: FigureId, **overrides) -> "FigureSpec":
        """Parameter sets of the published figures"""
        presets = {
            FigureId.FIG1: dict(n=2000, P=10000, p=0.8, q=2,
                                K_values=list(range(29, 37)), k_values=[4, 8]),
            FigureId.FIG2: dict(n=3000, P=10000, p=0.5, q=2,
                                K_values=list(range(28, 41, 2)), k_values=list(range(6))),
            FigureId.FIG3: dict(n=3000, P=10000, p=0.5, q=2,
                                K_values=[35], h_values=[0, 1, 2], max_count=20),
        }
        values = dict(presets[figure])
        values.update({key: v for key, v in overrides.items() if v is not None})
        return cls(figure=figure, **values)

    def params_for(self, K: int) -> ModelParams:
        return ModelParams(n=self.n, K=K, P=self.P, p=self.p, q=self.q)
