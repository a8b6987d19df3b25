"""
Poisson neural networks: theta^{-1} o Phi^m o theta.

Two architectures share one model class:
  - invertible theta (VP/NVP coupling net) with a SympNet on the ambient
    space; trained with the plain MSE on predicted states (loss_primary)
  - autoencoder theta with a SympNet on the latent space; trained with the
    latent MSE plus weighted reconstruction (loss_alternative)
A model without theta wraps a bare SympNet or invertible net used directly
as the one-step flow map (the SympNet and VPNN baselines).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from pnnflow.errors import ConfigError, DimensionError, NonFiniteError
from pnnflow.nets.coupling import (
    AutoencoderPair,
    InvertibleNet,
    autoencoder_from_dict,
    autoencoder_to_dict,
    inn_from_dict,
    inn_to_dict,
)
from pnnflow.nets.numcore import Chain, ParamSet, as_batch, as_real
from pnnflow.nets.sympnet import SympNet, sympnet_from_dict, sympnet_to_dict

logger = logging.getLogger(__name__)

Transform = Union[InvertibleNet, AutoencoderPair, None]


@dataclass
class FlowDataset:
    """Snapshot pairs (x_i, y_i) with y_i the state one step h after x_i"""

    inputs: np.ndarray
    targets: np.ndarray
    h: float
    groups: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = as_real(self.inputs)
        self.targets = as_real(self.targets)
        if self.inputs.ndim != 2 or self.inputs.shape != self.targets.shape:
            raise DimensionError(
                f"inputs and targets must be (N, n) arrays of equal shape, got {self.inputs.shape} and {self.targets.shape}"
            )
        if not self.h > 0:
            raise ConfigError(f"time step h must be positive, got {self.h}")
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=int)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[np.ndarray], h: float) -> "FlowDataset":
        """Consecutive states of each trajectory become pairs"""
        xs, ys, groups = [], [], []
        dims = {as_real(t).shape[-1] for t in trajectories}
        if len(dims) != 1:
            raise DimensionError(f"trajectories have mixed dimensions {sorted(dims)}")
        for i, traj in enumerate(trajectories):
            traj = as_real(traj)
            if traj.shape[0] < 2:
                raise DimensionError(f"trajectory {i} has fewer than two states")
            xs.append(traj[:-1])
            ys.append(traj[1:])
            groups.append(np.full(traj.shape[0] - 1, i))
        return cls(np.concatenate(xs), np.concatenate(ys), h, np.concatenate(groups))

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return self.inputs.shape[0]


class PnnModel:
    """theta (invertible net, autoencoder, or none) around a symplectic core Phi"""

    def __init__(self, transform: Transform, core: Chain, recurrence: int = 1):
        if recurrence < 1:
            raise ConfigError(f"recurrence m must be at least 1, got {recurrence}")
        self.transform = transform
        self.core = core
        self.recurrence = recurrence
        self._validate()
        self.params = ParamSet()
        if transform is not None:
            self.params.merge("theta", transform.params)
        self.params.merge("phi", core.params)

    def _validate(self) -> None:
        t, core = self.transform, self.core
        if isinstance(t, AutoencoderPair):
            if not isinstance(core, SympNet) or core.kind == "E":
                raise ConfigError("an autoencoder transformation requires an LA or G SympNet core")
            if core.n != t.latent:
                raise DimensionError(f"core acts on dimension {core.n}, autoencoder latent is {t.latent}")
        elif isinstance(t, InvertibleNet):
            if not isinstance(core, SympNet):
                raise ConfigError("an invertible transformation requires a SympNet core")
            if core.n != t.n:
                raise DimensionError(f"core acts on dimension {core.n}, transformation on {t.n}")
            if core.latent_dim < core.n and core.kind != "E":
                raise ConfigError("latent dimension below the ambient dimension requires an E-SympNet core")
        elif t is not None:
            raise ConfigError(f"unsupported transformation type {type(t).__name__}")

    @classmethod
    def bare(cls, net: Chain) -> "PnnModel":
        """The net itself is the one-step flow map"""
        return cls(None, net, recurrence=1)

    @property
    def architecture(self) -> str:
        if isinstance(self.transform, AutoencoderPair):
            return "pnn-ae"
        if isinstance(self.transform, InvertibleNet):
            return "pnn-inn"
        return "bare-sympnet" if isinstance(self.core, SympNet) else "bare-inn"

    @property
    def ambient_dim(self) -> int:
        if isinstance(self.transform, AutoencoderPair):
            return self.transform.n
        return self.core.dim_in

    @property
    def latent_dim(self) -> int:
        if isinstance(self.transform, AutoencoderPair):
            return self.transform.latent
        if isinstance(self.core, SympNet):
            return self.core.latent_dim
        return self.core.dim_in

    def zero_grad(self) -> None:
        self.params.zero_grad()

    # theta / theta^{-1} on batches
    def encode_batch(self, x: np.ndarray) -> np.ndarray:
        t = self.transform
        if t is None:
            return x
        if isinstance(t, AutoencoderPair):
            return t.encoder.forward(x)
        return t.forward(x)

    def decode_batch(self, z: np.ndarray) -> np.ndarray:
        t = self.transform
        if t is None:
            return z
        if isinstance(t, AutoencoderPair):
            return t.decoder.forward(z)
        return t.inverse_batch(z)

    def _encode_backward(self, x: np.ndarray, g: np.ndarray) -> None:
        t = self.transform
        if t is None:
            return
        if isinstance(t, AutoencoderPair):
            t.encoder.backward(x, g)
        else:
            t.backward(x, g)

    def _decode_backward(self, z: np.ndarray, g: np.ndarray) -> np.ndarray:
        t = self.transform
        if t is None:
            return g
        if isinstance(t, AutoencoderPair):
            return t.decoder.backward(z, g)
        return t.inverse_backward(z, g)

    def _core_power(self, z: np.ndarray, times: int) -> List[np.ndarray]:
        """[z, Phi(z), ..., Phi^times(z)]"""
        states = [z]
        for _ in range(times):
            states.append(self.core.forward(states[-1]))
        return states

    def _core_power_backward(self, states: List[np.ndarray], g: np.ndarray) -> np.ndarray:
        for z in reversed(states[:-1]):
            g = self.core.backward(z, g)
        return g

    def step_batch(self, x: np.ndarray) -> np.ndarray:
        """theta^{-1} o Phi^m o theta: the map fitted to one observed step"""
        return self.decode_batch(self._core_power(self.encode_batch(x), self.recurrence)[-1])

    def latent(self, x) -> np.ndarray:
        batch, single = as_batch(x, self.ambient_dim)
        z = self.encode_batch(batch)
        return z[0] if single else z


def _check_pairs(model: PnnModel, data: FlowDataset) -> None:
    if data.dim != model.ambient_dim:
        raise DimensionError(f"dataset dimension {data.dim} does not match model dimension {model.ambient_dim}")


def _check_finite(value: float, what: str) -> float:
    if not np.isfinite(value):
        logger.error(f"{what} is not finite: {value}")
        raise NonFiniteError(f"{what} is not finite ({value})")
    return value


def loss_primary(model: PnnModel, data: FlowDataset, grad: bool = True) -> float:
    """(1/(nN)) sum ||theta^{-1} Phi^m theta(x_i) - y_i||^2, gradients accumulated"""
    if isinstance(model.transform, AutoencoderPair):
        raise ConfigError("loss_primary needs an invertible transformation; use loss_alternative for autoencoders")
    _check_pairs(model, data)
    x, y = data.inputs, data.targets
    z0 = model.encode_batch(x)
    states = model._core_power(z0, model.recurrence)
    pred = model.decode_batch(states[-1])
    resid = pred - y
    scale = 1.0 / resid.size
    loss = _check_finite(float(np.sum(resid * resid)) * scale, "primary loss")
    if grad:
        g = 2.0 * scale * resid
        g = model._decode_backward(states[-1], g)
        g = model._core_power_backward(states, g)
        model._encode_backward(x, g)
    return loss


def loss_alternative(model: PnnModel, data: FlowDataset, lam: float = 1.0, grad: bool = True) -> float:
    """L_s + lam * L_a for autoencoder-based models.

    L_s compares Phi^m(theta(x_i)) with theta(y_i) in latent space; L_a is the
    reconstruction error of x_i and y_i through theta^{-1} o theta.
    """
    pair = model.transform
    if not isinstance(pair, AutoencoderPair):
        raise ConfigError("loss_alternative needs an autoencoder transformation")
    if lam < 0:
        raise ConfigError(f"reconstruction weight lambda must be non-negative, got {lam}")
    _check_pairs(model, data)
    x, y = data.inputs, data.targets
    n_pairs = x.shape[0]
    zx = pair.encoder.forward(x)
    zy = pair.encoder.forward(y)
    states = model._core_power(zx, model.recurrence)
    latent_resid = states[-1] - zy
    latent_scale = 1.0 / (pair.latent * n_pairs)
    latent_loss = float(np.sum(latent_resid * latent_resid)) * latent_scale
    rx = pair.decoder.forward(zx) - x
    ry = pair.decoder.forward(zy) - y
    recon_scale = 1.0 / (pair.n * n_pairs)
    recon_loss = (float(np.sum(rx * rx)) + float(np.sum(ry * ry))) * recon_scale
    loss = _check_finite(latent_loss + lam * recon_loss, "alternative loss")
    if grad:
        g_w = 2.0 * latent_scale * latent_resid
        g_zy = -g_w
        g_zx = model._core_power_backward(states, g_w)
        if lam > 0:
            g_zx = g_zx + pair.decoder.backward(zx, 2.0 * lam * recon_scale * rx)
            g_zy = g_zy + pair.decoder.backward(zy, 2.0 * lam * recon_scale * ry)
        pair.encoder.backward(x, g_zx)
        pair.encoder.backward(y, g_zy)
    return loss


def loss_for(model: PnnModel, data: FlowDataset, lam: float = 1.0, grad: bool = True) -> float:
    """Dispatch to the loss matching the model's architecture"""
    if isinstance(model.transform, AutoencoderPair):
        return loss_alternative(model, data, lam, grad=grad)
    return loss_primary(model, data, grad=grad)


def predict(model: PnnModel, x0, k: int, emit_substeps: bool = False) -> np.ndarray:
    """Roll out k observed steps: encode once, apply Phi k*m times, decode.

    Returns shape (k, n) for a single initial state or (k, N, n) for a
    batch. With emit_substeps every latent step is decoded, giving k*m
    states spaced h/m apart; state j*m - 1 is the grid point j.
    """
    if k < 1:
        raise ConfigError(f"number of prediction steps must be at least 1, got {k}")
    batch, single = as_batch(x0, model.ambient_dim, "initial state")
    z = model.encode_batch(batch)
    m = model.recurrence
    out = []
    for step in range(1, k * m + 1):
        z = model.core.forward(z)
        if emit_substeps or step % m == 0:
            out.append(model.decode_batch(z))
    rollout = np.stack(out)
    return rollout[:, 0, :] if single else rollout


def model_to_dict(model: PnnModel) -> dict:
    t = model.transform
    if isinstance(t, AutoencoderPair):
        transform = autoencoder_to_dict(t)
    elif isinstance(t, InvertibleNet):
        transform = inn_to_dict(t)
    else:
        transform = None
    if isinstance(model.core, SympNet):
        core = {"type": "sympnet", **sympnet_to_dict(model.core)}
    else:
        core = {"type": "inn", **inn_to_dict(model.core)}
    return {
        "architecture": model.architecture,
        "ambient_dim": model.ambient_dim,
        "latent_dim": model.latent_dim,
        "recurrence": model.recurrence,
        "transform": transform,
        "core": core,
    }


def model_from_dict(data: dict) -> PnnModel:
    t = data.get("transform")
    if t is None:
        transform = None
    elif t.get("kind") == "AE":
        transform = autoencoder_from_dict(t)
    else:
        transform = inn_from_dict(t)
    core_data = dict(data["core"])
    core_type = core_data.pop("type", "sympnet")
    core = sympnet_from_dict(core_data) if core_type == "sympnet" else inn_from_dict(core_data)
    return PnnModel(transform, core, recurrence=data.get("recurrence", 1))
