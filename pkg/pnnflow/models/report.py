from datetime import datetime
from typing import List, Optional

from pydantic import BaseModel, Field


class MetricReport(BaseModel):
    """Losses and valid prediction time of one trained model"""

    train_mse: float = Field(ge=0)
    test_mse: Optional[float] = Field(None, ge=0)
    rollout_mse: Optional[float] = Field(None, ge=0)
    grid_mse: Optional[float] = Field(None, ge=0)
    mid_mse: Optional[float] = Field(None, ge=0)
    vpt: Optional[float] = Field(None, ge=0)
    epsilon: Optional[float] = None
    horizon: Optional[float] = None
    rmse_times: List[float] = Field(default_factory=list)
    rmse_series: List[float] = Field(default_factory=list)


class LossPoint(BaseModel):
    iteration: int
    loss: float


class TrainingSummary(BaseModel):
    """What a training run leaves next to its checkpoint"""

    experiment: str
    architecture: str
    iterations: int
    seed: int
    final_loss: float
    wall_seconds: float
    finished_at: datetime = Field(default_factory=datetime.now)


class ComparisonRow(BaseModel):
    """One line of a model comparison table"""

    model: str
    train_mse: float
    test_mse: Optional[float] = None
    rollout_mse: Optional[float] = None
    vpt: Optional[float] = None
