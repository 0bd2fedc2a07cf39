"""
Pydantic models for configuration objects, exports and API requests/responses
"""

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .config import Settings

CSV_SCHEMA_VERSION = 1


class TaskKind(str, Enum):
    POTRF = "POTRF"
    TRSM = "TRSM"
    SYRK = "SYRK"
    GEMM = "GEMM"
    VIRTUAL_SINK = "VIRTUAL_SINK"


class Algorithm(str, Enum):
    ASAP = "asap"
    GREEDY = "greedy"
    RANDOM = "random"


class NodeExport(BaseModel):
    """One task of the exported DAG"""
    id: int
    kind: TaskKind
    indices: List[int]
    duration: float
    cp: float = Field(..., description="Critical path from this task to the sink, inclusive")


class GraphExport(BaseModel):
    """JSON export of a full task graph"""
    tiles: int
    nodes: List[NodeExport]
    edges: List[Tuple[int, int]]
    total_work: float
    critical_path: float


class EnvConfig(BaseModel):
    """Scheduling instance and observation parameters"""
    model_config = ConfigDict(frozen=True)

    tiles: int = Field(..., ge=1, description="Number of tiles T")
    processors: int = Field(..., ge=1, description="Number of homogeneous processors p")
    window: Optional[int] = Field(1, ge=0, description="Descendant depth w; None means unbounded")
    baseline_makespan: Optional[float] = Field(
        None, gt=0, description="ASAP makespan used to normalize the reward; computed when omitted"
    )
    use_cp_feature: bool = Field(True, description="Include the critical-path column in node features")
    duration_noise: float = Field(0.0, ge=0, description="Std of the log-normal duration factor")
    seed: int = 0


class TrainConfig(BaseModel):
    """A2C hyperparameters"""
    model_config = ConfigDict(frozen=True)

    beta: float = Field(0.02, ge=0, description="Entropy coefficient")
    t_max: int = Field(40, ge=1, description="Rollout segment length")
    gamma: float = Field(1.0, ge=0, le=1, description="Discount factor")
    total_steps: int = Field(10000, ge=0, description="Environment decision steps")
    eval_every: int = Field(250, ge=1)
    learning_rate: float = Field(0.01, gt=0)
    critic_lr_scale: float = Field(0.5, ge=0)
    adam_eps: float = Field(0.1, gt=0)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    hidden_width: int = Field(64, ge=1)
    layers: Optional[int] = Field(None, ge=1, description="GCN layer count; defaults to 1 + window")
    seed: int = 0

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "TrainConfig":
        values = dict(
            beta=settings.entropy_beta,
            t_max=settings.t_max,
            gamma=settings.gamma,
            total_steps=settings.total_steps,
            eval_every=settings.eval_every,
            learning_rate=settings.learning_rate,
            critic_lr_scale=settings.critic_lr_scale,
            adam_eps=settings.adam_eps,
            adam_beta1=settings.adam_beta1,
            adam_beta2=settings.adam_beta2,
            hidden_width=settings.hidden_width,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Assignment(BaseModel):
    """A task placed on a processor"""
    task: int
    label: str
    processor: int
    start: float
    finish: float


class DecisionRecord(BaseModel):
    """One agent decision during an episode"""
    clock: float
    action: str = Field(..., description="Task label or 'pass'")
    task: Optional[int] = None
    available: List[int]
    assignments: List[Optional[int]] = Field(..., description="Task id per processor, None when idle")


class EpisodeTrace(BaseModel):
    """Exported episode: decisions, final schedule and makespan"""
    config: EnvConfig
    decisions: List[DecisionRecord] = Field(default_factory=list)
    schedule: List[Assignment] = Field(default_factory=list)
    makespan: Optional[float] = None


class BenchRecord(BaseModel):
    """Row of the baseline benchmark CSV"""
    algo: Algorithm
    T: int
    p: int
    seed: int
    makespan: float


class TrainLogRecord(BaseModel):
    """Row of the training log CSV"""
    step: int
    loss_pi: Optional[float] = None
    loss_v: Optional[float] = None
    entropy: Optional[float] = None
    eval_makespan: Optional[float] = None
    best_makespan: Optional[float] = None


class DagRequest(BaseModel):
    """Request model for DAG generation"""
    tiles: int = Field(..., ge=1, description="Number of tiles T")
    include_graph: bool = Field(False, description="Whether to include the full JSON export")


class DagResponse(BaseModel):
    """Response model for DAG generation"""
    tiles: int
    nodes: int = Field(..., description="|V| including the virtual sink")
    edges: int
    total_work: float
    critical_path: float
    graph: Optional[GraphExport] = None


class ScheduleRequest(BaseModel):
    """Request model for a baseline schedule"""
    tiles: int = Field(..., ge=1)
    processors: int = Field(..., ge=1, le=1024)
    algorithm: Algorithm = Algorithm.ASAP
    seed: int = 0
    include_schedule: bool = Field(False, description="Whether to include every assignment")


class ScheduleResponse(BaseModel):
    """Response model for a baseline schedule"""
    algorithm: Algorithm
    tiles: int
    processors: int
    seed: int
    makespan: float
    lower_bound: float
    critical_path: float
    total_work: float
    schedule: List[Assignment] = Field(default_factory=list)
    processing_time_ms: Optional[float] = None
