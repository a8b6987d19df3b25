from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class ModelInfo(BaseModel):
    """Checkpoint metadata for API responses"""

    name: str
    architecture: str
    ambient_dim: int
    latent_dim: int
    recurrence: int
    transform: Optional[str] = None
    core: Optional[str] = None
    parameters: int
    h: Optional[float] = None
    system: Optional[str] = None
    training: Dict[str, Any] = Field(default_factory=dict)


class PredictRequest(BaseModel):
    """Rollout request; x0 is one state or a batch of states"""

    x0: List[Any]
    steps: int = Field(1, ge=1, le=100000)
    emit_substeps: bool = False


class PredictResponse(BaseModel):
    name: str
    steps: int
    dt: Optional[float] = None
    states: List[Any]


class EncodeRequest(BaseModel):
    x: List[Any]


class EncodeResponse(BaseModel):
    name: str
    latent: List[Any]
