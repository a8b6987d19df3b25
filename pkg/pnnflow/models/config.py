"""
Experiment configuration schemas.

One JSON document describes a whole experiment. Cross-field dimension
constraints are checked here, before any dataset is allocated.
"""
import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from pnnflow.errors import ConfigError, DataIOError
from pnnflow.systems.catalog import SYSTEMS, get_system
from pnnflow.systems.base import SystemSpec
from pnnflow.systems.integrate import SCHEMES, IntegratorSettings
from pnnflow.systems.render import DEFAULT_VIEWPORT


class SystemConfig(BaseModel):
    """Which benchmark system to simulate"""

    name: str
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def known_system(cls, v: str) -> str:
        if v not in SYSTEMS:
            raise ValueError(f"unknown system '{v}', expected one of {sorted(SYSTEMS)}")
        return v

    def build(self) -> SystemSpec:
        return get_system(self.name, **self.params)


class IntegratorConfig(BaseModel):
    scheme: str = "midpoint6"
    substeps: int = Field(10, ge=1)
    tol: float = Field(1e-13, gt=0)

    @field_validator("scheme")
    @classmethod
    def known_scheme(cls, v: str) -> str:
        if v not in SCHEMES:
            raise ValueError(f"unknown integrator scheme '{v}', expected one of {sorted(SCHEMES)}")
        return v

    def settings(self) -> IntegratorSettings:
        return IntegratorSettings(scheme=self.scheme, substeps=self.substeps, tol=self.tol)


class MovieConfig(BaseModel):
    """Pixel observation settings (two-body only)"""

    width: int = Field(100, ge=1)
    height: int = Field(50, ge=1)
    radius: float = Field(4.0, gt=0)
    viewport: Tuple[float, float, float, float] = DEFAULT_VIEWPORT

    @property
    def pixels(self) -> int:
        return self.width * self.height


class DatasetConfig(BaseModel):
    """Trajectories: ``train_steps`` pairs per trajectory, then ``test_steps`` more"""

    initial_states: Optional[List[List[float]]] = None
    h: float = Field(0.1, gt=0)
    train_steps: int = Field(100, ge=1)
    test_steps: int = Field(0, ge=0)
    # also sample the test continuation at h / fine_factor
    fine_factor: Optional[int] = Field(None, ge=2)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    movie: Optional[MovieConfig] = None


class ModelConfig(BaseModel):
    """Architecture of theta, Phi and the recurrence m.

    ``architecture`` "pnn" wraps the core in a transformation, "sympnet"
    trains a bare SympNet and "vpnn" a bare invertible net.
    """

    architecture: Literal["pnn", "sympnet", "vpnn"] = "pnn"
    transform: Optional[Literal["VP", "NVP", "AE"]] = "NVP"
    partition: Optional[int] = None
    transform_layers: int = Field(3, ge=1)
    transform_sublayers: int = Field(2, ge=1)
    transform_width: int = Field(30, ge=1)
    core: Literal["LA", "G", "E"] = "G"
    core_layers: int = Field(3, ge=1)
    core_sublayers: int = Field(2, ge=1)
    core_width: int = Field(30, ge=1)
    latent: Optional[int] = None
    recurrence: int = Field(1, ge=1)
    activation: Literal["sigmoid", "tanh"] = "sigmoid"


class TrainConfig(BaseModel):
    """Optimizer and evaluation settings"""

    lr: float = Field(1e-3, gt=0)
    iterations: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)
    loss: Optional[Literal["primary", "alternative"]] = None
    lam: float = Field(1.0, ge=0)
    log_interval: int = Field(1000, ge=1)
    epsilon: float = Field(0.02, gt=0)


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    description: str = ""
    system: SystemConfig
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    output_dir: Optional[str] = None

    def build_system(self) -> SystemSpec:
        return self.system.build()

    def ambient_dim(self) -> int:
        if self.dataset.movie is not None:
            return self.dataset.movie.pixels
        return self.build_system().dim

    def latent_dim(self) -> int:
        if self.model.latent is not None:
            return self.model.latent
        if self.model.architecture == "pnn" and self.model.transform == "AE":
            return self.build_system().latent
        return self.ambient_dim()

    def resolved_partition(self) -> int:
        return self.model.partition if self.model.partition is not None else self.ambient_dim() // 2

    def resolved_loss(self) -> str:
        if self.train.loss is not None:
            return self.train.loss
        return "alternative" if self.model.architecture == "pnn" and self.model.transform == "AE" else "primary"

    def resolved_initial_states(self) -> List[np.ndarray]:
        if self.dataset.initial_states is not None:
            return [np.asarray(s, dtype=float) for s in self.dataset.initial_states]
        return self.build_system().default_initial_states()

    @model_validator(mode="after")
    def check_dimensions(self) -> "ExperimentConfig":
        try:
            system = self.build_system()
        except ConfigError as e:
            raise ValueError(e.message)
        m = self.model
        n = self.ambient_dim()
        latent = self.latent_dim()
        if latent % 2 or not 0 < latent <= n:
            raise ValueError(f"latent dimension 2d={latent} must be even and within (0, n={n}]")
        if self.dataset.initial_states is not None:
            for s in self.dataset.initial_states:
                if len(s) != system.dim:
                    raise ValueError(f"initial state {s} does not have the system dimension {system.dim}")
        elif not system.default_initial_states():
            raise ValueError(f"system '{system.name}' has no default initial states; set dataset.initial_states")
        if self.dataset.movie is not None and system.name != "twobody":
            raise ValueError("pixel observations are only available for the twobody system")
        if m.architecture == "vpnn" and m.transform not in ("VP", "NVP"):
            raise ValueError("the vpnn architecture needs a VP or NVP transform")
        if m.transform in ("VP", "NVP") and m.architecture in ("pnn", "vpnn"):
            if not 0 < self.resolved_partition() < n:
                raise ValueError(f"partition must satisfy 0 < partition < n={n}")
        if m.architecture == "pnn":
            if m.transform is None:
                raise ValueError("a pnn model needs a transform (VP, NVP or AE)")
            if m.transform == "AE":
                if latent >= n:
                    raise ValueError(f"an autoencoder needs latent 2d={latent} below n={n}")
                if m.core == "E":
                    raise ValueError("an autoencoder pnn needs an LA or G core")
                if m.transform_layers > 1 and m.transform_width < latent:
                    raise ValueError(f"autoencoder width {m.transform_width} must be at least 2d={latent}")
            elif latent < n and m.core != "E":
                raise ValueError(f"latent 2d={latent} below n={n} requires an E core")
        elif m.recurrence != 1:
            raise ValueError("recurrence m > 1 is only meaningful for pnn models")
        if m.architecture == "sympnet":
            if m.core in ("LA", "G") and latent != n:
                raise ValueError(f"an {m.core}-SympNet acts on n=2d; got n={n}, 2d={latent}")
        if m.core == "E" and m.architecture != "vpnn" and latent >= n:
            raise ValueError(f"an E core needs 2d={latent} below n={n}")
        if self.resolved_loss() == "alternative" and not (m.architecture == "pnn" and m.transform == "AE"):
            raise ValueError("the alternative loss needs an autoencoder pnn")
        if self.resolved_loss() == "primary" and m.architecture == "pnn" and m.transform == "AE":
            raise ValueError("an autoencoder pnn is trained with the alternative loss")
        return self


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    """data['a']['b'] = value for key 'a.b', creating levels as needed"""
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def build_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Validate a config dict after applying dotted-key overrides (flags win)"""
    merged = copy.deepcopy(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            set_dotted(merged, key, value)
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}")


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataIOError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    return build_config(data, overrides)
