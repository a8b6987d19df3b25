"""
Invertible coordinate transformations: additive (volume-preserving) and
affine (non-volume-preserving) coupling nets, plus the autoencoder used when
the transformation only needs to reach a lower-dimensional latent space.

The input splits contiguously as x = (x1, x2) with x1 the first
``partition`` coordinates. An "up" module updates x1 from x2, a "low"
module updates x2 from x1.
"""
import logging
from typing import List

import numpy as np

from pnnflow.errors import ConfigError
from pnnflow.nets.numcore import Chain, Dense, Layer, ParamSet, as_batch, seeded_rng
from pnnflow.nets.sympnet import alternate

logger = logging.getLogger(__name__)

INN_KINDS = ("VP", "NVP")
SCALE_CLAMP = 10.0


class CouplingModule(Layer):
    """Shared partition bookkeeping for coupling modules"""

    kind = "coupling"

    def __init__(self, n: int, partition: int, side: str):
        super().__init__()
        if not 0 < partition < n:
            raise ConfigError(f"partition must satisfy 0 < partition < n, got partition={partition}, n={n}")
        if side not in ("up", "low"):
            raise ConfigError(f"side must be 'up' or 'low', got '{side}'")
        self.n = n
        self.partition = partition
        self.side = side
        self.dim_in = self.dim_out = n

    @property
    def moved_dim(self) -> int:
        return self.partition if self.side == "up" else self.n - self.partition

    @property
    def fixed_dim(self) -> int:
        return self.n - self.moved_dim

    def _split(self, x: np.ndarray):
        x1, x2 = x[:, : self.partition], x[:, self.partition :]
        return (x1, x2) if self.side == "up" else (x2, x1)

    def _join(self, moved: np.ndarray, fixed: np.ndarray) -> np.ndarray:
        return np.concatenate([moved, fixed] if self.side == "up" else [fixed, moved], axis=1)

    def inverse(self, z) -> np.ndarray:
        batch, single = as_batch(z, self.n)
        out = self.inverse_batch(batch)
        return out[0] if single else out

    def inverse_batch(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse_backward(self, z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_det(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(x.shape[0])

    def _subnets(self) -> dict:
        raise NotImplementedError

    def dims(self) -> dict:
        nets = self._subnets()
        first = next(iter(nets.values()))
        return {
            "n": self.n,
            "partition": self.partition,
            "side": self.side,
            "layers": first.layers,
            "width": first.width,
            "activation": first.activation,
        }


class VpCoupling(CouplingModule):
    """Additive coupling: moved <- moved + m(fixed); inverts by subtraction"""

    kind = "vp"

    def __init__(self, n: int, partition: int, side: str, layers: int, width: int, rng=None, activation="sigmoid"):
        super().__init__(n, partition, side)
        rng = rng if rng is not None else seeded_rng(0)
        self.shift = Dense(self.fixed_dim, self.moved_dim, layers, width, rng=rng, zero_last=True, activation=activation)
        self.params.merge("m", self.shift.params)

    def _subnets(self) -> dict:
        return {"m": self.shift}

    def forward(self, x: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(x)
        return self._join(moved + self.shift.forward(fixed), fixed)

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        _, fixed = self._split(x)
        g_moved, g_fixed = self._split(grad_out)
        return self._join(g_moved, g_fixed + self.shift.backward(fixed, g_moved))

    def inverse_batch(self, z: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(z)
        return self._join(moved - self.shift.forward(fixed), fixed)

    def inverse_backward(self, z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        _, fixed = self._split(z)
        g_moved, g_fixed = self._split(grad_out)
        return self._join(g_moved, g_fixed + self.shift.backward(fixed, -g_moved))


class NvpCoupling(CouplingModule):
    """Affine coupling: moved <- moved * exp(s(fixed)) + t(fixed).

    Scale outputs are clamped to [-10, 10] before exponentiation.
    """

    kind = "nvp"

    def __init__(self, n: int, partition: int, side: str, layers: int, width: int, rng=None, activation="sigmoid"):
        super().__init__(n, partition, side)
        rng = rng if rng is not None else seeded_rng(0)
        self.scale = Dense(self.fixed_dim, self.moved_dim, layers, width, rng=rng, zero_last=True, activation=activation)
        self.translate = Dense(self.fixed_dim, self.moved_dim, layers, width, rng=rng, zero_last=True, activation=activation)
        self.params.merge("s", self.scale.params)
        self.params.merge("t", self.translate.params)

    def _subnets(self) -> dict:
        return {"s": self.scale, "t": self.translate}

    def _scale(self, fixed: np.ndarray):
        raw = self.scale.forward(fixed)
        active = (raw > -SCALE_CLAMP) & (raw < SCALE_CLAMP)
        return np.clip(raw, -SCALE_CLAMP, SCALE_CLAMP), active

    def forward(self, x: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(x)
        s, _ = self._scale(fixed)
        return self._join(moved * np.exp(s) + self.translate.forward(fixed), fixed)

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(x)
        g_moved, g_fixed = self._split(grad_out)
        s, active = self._scale(fixed)
        e = np.exp(s)
        ds = g_moved * moved * e * active
        g_fixed = g_fixed + self.scale.backward(fixed, ds) + self.translate.backward(fixed, g_moved)
        return self._join(g_moved * e, g_fixed)

    def inverse_batch(self, z: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(z)
        s, _ = self._scale(fixed)
        return self._join((moved - self.translate.forward(fixed)) * np.exp(-s), fixed)

    def inverse_backward(self, z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(z)
        g_moved, g_fixed = self._split(grad_out)
        s, active = self._scale(fixed)
        e_inv = np.exp(-s)
        x_moved = (moved - self.translate.forward(fixed)) * e_inv
        ds = -g_moved * x_moved * active
        dt = -g_moved * e_inv
        g_fixed = g_fixed + self.scale.backward(fixed, ds) + self.translate.backward(fixed, dt)
        return self._join(g_moved * e_inv, g_fixed)

    def log_det(self, x: np.ndarray) -> np.ndarray:
        _, fixed = self._split(x)
        s, _ = self._scale(fixed)
        return s.sum(axis=1)


class InvertibleNet(Chain):
    """Alternating up/low coupling modules with a closed-form inverse"""

    def __init__(self, kind: str, modules: List[CouplingModule], n: int, partition: int):
        if kind not in INN_KINDS:
            raise ConfigError(f"unknown invertible net kind '{kind}', expected one of {INN_KINDS}")
        super().__init__(modules, n)
        self.kind = kind
        self.n = n
        self.partition = partition

    def inverse(self, z) -> np.ndarray:
        batch, single = as_batch(z, self.n)
        out = self.inverse_batch(batch)
        return out[0] if single else out

    def inverse_batch(self, z: np.ndarray) -> np.ndarray:
        for member in reversed(self.members):
            z = member.inverse_batch(z)
        return z

    def inverse_backward(self, z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        inputs = []
        for member in reversed(self.members):
            inputs.append(z)
            z = member.inverse_batch(z)
        g = grad_out
        for member, z_in in zip(self.members, reversed(inputs)):
            g = member.inverse_backward(z_in, g)
        return g

    def log_det(self, x) -> np.ndarray:
        """log |det D theta(x)| per sample; zero for volume-preserving nets"""
        batch, single = as_batch(x, self.n)
        total = np.zeros(batch.shape[0])
        for member in self.members:
            total += member.log_det(batch)
            batch = member.forward(batch)
        return total[0] if single else total


def build_inn(
    kind: str,
    dim: int,
    partition: int,
    layers: int,
    sublayers: int = 2,
    width: int = 30,
    rng=None,
    activation: str = "sigmoid",
) -> InvertibleNet:
    """``layers`` alternating coupling modules, each subnet a dense net of
    ``sublayers`` layers with the given width."""
    if layers < 1:
        raise ConfigError(f"an invertible net needs at least one layer, got {layers}")
    cls = {"VP": VpCoupling, "NVP": NvpCoupling}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown invertible net kind '{kind}', expected one of {INN_KINDS}")
    rng = rng if rng is not None else seeded_rng(0)
    modules = [cls(dim, partition, alternate(i), sublayers, width, rng=rng, activation=activation) for i in range(layers)]
    net = InvertibleNet(kind, modules, dim, partition)
    logger.debug(f"Built {kind} invertible net: {layers} modules, {net.params.size()} parameters")
    return net


class AutoencoderPair:
    """Encoder R^n -> R^{2d} and decoder R^{2d} -> R^n of equal depth and width.

    decode(encode(x)) is not the identity by construction.
    """

    def __init__(self, n: int, latent: int, layers: int, width: int, rng=None, activation: str = "sigmoid"):
        if latent >= n:
            raise ConfigError(f"autoencoder latent dimension {latent} must be below ambient dimension {n}")
        if layers > 1 and width < latent:
            raise ConfigError(f"autoencoder hidden width {width} must be at least the latent dimension {latent}")
        rng = rng if rng is not None else seeded_rng(0)
        self.n = n
        self.latent = latent
        self.layers = layers
        self.width = width
        self.encoder = Dense(n, latent, layers, width, rng=rng, activation=activation)
        self.decoder = Dense(latent, n, layers, width, rng=rng, activation=activation)
        self.params = ParamSet()
        self.params.merge("encoder", self.encoder.params)
        self.params.merge("decoder", self.decoder.params)

    def encode(self, x) -> np.ndarray:
        return self.encoder(x)

    def decode(self, z) -> np.ndarray:
        return self.decoder(z)

    def zero_grad(self) -> None:
        self.params.zero_grad()


def coupling_to_dict(module: CouplingModule) -> dict:
    return {"type": module.kind, "dims": module.dims(), "params": module.params.to_dict()}


def coupling_from_dict(data: dict) -> CouplingModule:
    cls = {"vp": VpCoupling, "nvp": NvpCoupling}.get(data.get("type"))
    if cls is None:
        raise ConfigError(f"unknown coupling module type '{data.get('type')}'")
    dims = data["dims"]
    module = cls(
        dims["n"], dims["partition"], dims["side"], dims["layers"], dims["width"], activation=dims.get("activation", "sigmoid")
    )
    module.params.load_dict(data["params"])
    return module


def inn_to_dict(net: InvertibleNet) -> dict:
    return {
        "kind": net.kind,
        "n": net.n,
        "partition": net.partition,
        "modules": [coupling_to_dict(m) for m in net.members],
    }


def inn_from_dict(data: dict) -> InvertibleNet:
    modules = [coupling_from_dict(m) for m in data["modules"]]
    return InvertibleNet(data["kind"], modules, data["n"], data["partition"])


def autoencoder_to_dict(pair: AutoencoderPair) -> dict:
    return {
        "kind": "AE",
        "n": pair.n,
        "latent": pair.latent,
        "layers": pair.layers,
        "width": pair.width,
        "activation": pair.encoder.activation,
        "params": pair.params.to_dict(),
    }


def autoencoder_from_dict(data: dict) -> AutoencoderPair:
    pair = AutoencoderPair(
        data["n"], data["latent"], data["layers"], data["width"], activation=data.get("activation", "sigmoid")
    )
    pair.params.load_dict(data["params"])
    return pair
