"""
Symplectic and extended-symplectic networks.

Coordinates are stored as (p_1..p_d, q_1..q_d, c_1..c_{n-2d}). Modules
alternate up/low sides starting with "up".
"""
import logging
from typing import List, Optional

import numpy as np

from pnnflow.errors import ConfigError
from pnnflow.nets.numcore import Chain, Layer, get_activation, glorot_uniform, seeded_rng

logger = logging.getLogger(__name__)

SIDES = ("up", "low")
KINDS = ("LA", "G", "E")


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise ConfigError(f"side must be 'up' or 'low', got '{side}'")
    return side


def alternate(i: int) -> str:
    return SIDES[i % 2]


class LinearModule(Layer):
    """Alternating unit-triangular symplectic factors followed by a bias.

    Each symmetric block is stored as an unconstrained A_i and applied as
    S_i = A_i + A_i^T.
    """

    kind = "linear"

    def __init__(self, d: int, sublayers: int, parity: str = "up", rng=None, init_scale: float = 0.0):
        super().__init__()
        if sublayers < 1:
            raise ConfigError(f"linear module needs at least one sublayer, got {sublayers}")
        self.d = d
        self.sublayers = sublayers
        self.parity = _check_side(parity)
        self.dim_in = self.dim_out = 2 * d
        rng = rng if rng is not None else seeded_rng(0)
        self._mats = []
        for i in range(sublayers):
            a = init_scale * glorot_uniform(rng, d, d) if init_scale else np.zeros((d, d))
            self._mats.append(self.params.add(f"A{i}", a))
        self._bias = self.params.add("b", np.zeros(2 * d))

    def _factor_side(self, i: int) -> str:
        offset = 0 if self.parity == "up" else 1
        return alternate(i + offset)

    def _symmetric(self, i: int) -> np.ndarray:
        a = self._mats[i]
        return a + a.T

    def forward(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        p, q = x[:, :d], x[:, d:]
        for i in range(self.sublayers):
            s = self._symmetric(i)
            if self._factor_side(i) == "up":
                p = p + q @ s
            else:
                q = q + p @ s
        return np.concatenate([p, q], axis=1) + self._bias

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        d = self.d
        p, q = x[:, :d], x[:, d:]
        states = []
        for i in range(self.sublayers):
            states.append((p, q))
            s = self._symmetric(i)
            if self._factor_side(i) == "up":
                p = p + q @ s
            else:
                q = q + p @ s
        self.params["b"].grad += grad_out.sum(axis=0)
        gp, gq = grad_out[:, :d], grad_out[:, d:]
        for i in range(self.sublayers - 1, -1, -1):
            p_i, q_i = states[i]
            s = self._symmetric(i)
            if self._factor_side(i) == "up":
                ds = q_i.T @ gp
                gq = gq + gp @ s
            else:
                ds = p_i.T @ gq
                gp = gp + gq @ s
            self.params[f"A{i}"].grad += ds + ds.T
        return np.concatenate([gp, gq], axis=1)

    def dims(self) -> dict:
        return {"d": self.d, "sublayers": self.sublayers, "parity": self.parity}


class ActivationModule(Layer):
    """up: (p + a*sigma(q), q); low: (p, a*sigma(p) + q)"""

    kind = "activation"

    def __init__(self, d: int, side: str = "up", activation: str = "sigmoid"):
        super().__init__()
        self.d = d
        self.side = _check_side(side)
        self.activation = activation
        self._act, self._act_prime = get_activation(activation)
        self.dim_in = self.dim_out = 2 * d
        self._a = self.params.add("a", np.zeros(d))

    def _split(self, x):
        d = self.d
        p, q = x[:, :d], x[:, d:]
        return (p, q) if self.side == "up" else (q, p)

    def _join(self, moved, fixed):
        return np.concatenate([moved, fixed] if self.side == "up" else [fixed, moved], axis=1)

    def forward(self, x: np.ndarray) -> np.ndarray:
        moved, fixed = self._split(x)
        return self._join(moved + self._a * self._act(fixed), fixed)

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        _, fixed = self._split(x)
        g_moved, g_fixed = self._split(grad_out)
        s = self._act(fixed)
        self.params["a"].grad += (g_moved * s).sum(axis=0)
        g_fixed = g_fixed + g_moved * self._a * self._act_prime(s)
        return self._join(g_moved, g_fixed)

    def dims(self) -> dict:
        return {"d": self.d, "side": self.side, "activation": self.activation}


class ExtendedModule(Layer):
    """Extended gradient module on (p, q, c).

    up: p <- p + K1^T (a * sigma(K1 q + K2 c + b)); q and c are untouched.
    low mirrors the update onto q. With n == 2d this is exactly a
    gradient module.
    """

    kind = "extended"

    def __init__(self, d: int, n: int, width: int, side: str = "up", rng=None, activation: str = "sigmoid"):
        super().__init__()
        if 2 * d > n:
            raise ConfigError(f"latent dimension 2d={2 * d} exceeds ambient dimension n={n}")
        self.d = d
        self.n = n
        self.width = width
        self.side = _check_side(side)
        self.activation = activation
        self._act, self._act_prime = get_activation(activation)
        self.dim_in = self.dim_out = n
        rng = rng if rng is not None else seeded_rng(0)
        self._k1 = self.params.add("K1", glorot_uniform(rng, width, d))
        self._k2 = self.params.add("K2", glorot_uniform(rng, width, n - 2 * d))
        self._a = self.params.add("a", np.zeros(width))
        self._b = self.params.add("b", np.zeros(width))

    def _parts(self, x):
        d = self.d
        p, q, c = x[:, :d], x[:, d : 2 * d], x[:, 2 * d :]
        return (p, q, c) if self.side == "up" else (q, p, c)

    def _assemble(self, moved, fixed, c):
        pq = [moved, fixed] if self.side == "up" else [fixed, moved]
        return np.concatenate(pq + [c], axis=1)

    def _pre_activation(self, fixed, c):
        return fixed @ self._k1.T + c @ self._k2.T + self._b

    def forward(self, x: np.ndarray) -> np.ndarray:
        moved, fixed, c = self._parts(x)
        s = self._act(self._pre_activation(fixed, c))
        return self._assemble(moved + (self._a * s) @ self._k1, fixed, c)

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        moved, fixed, c = self._parts(x)
        g_moved, g_fixed, g_c = self._parts(grad_out)
        s = self._act(self._pre_activation(fixed, c))
        r = g_moved @ self._k1.T
        dz = self._a * r * self._act_prime(s)
        self.params["a"].grad += (r * s).sum(axis=0)
        self.params["b"].grad += dz.sum(axis=0)
        self.params["K1"].grad += (self._a * s).T @ g_moved + dz.T @ fixed
        self.params["K2"].grad += dz.T @ c
        return self._assemble(g_moved, g_fixed + dz @ self._k1, g_c + dz @ self._k2)

    def dims(self) -> dict:
        return {"d": self.d, "n": self.n, "width": self.width, "side": self.side, "activation": self.activation}


class GradientModule(ExtendedModule):
    """Gradient module: an extended module without trailing coordinates"""

    kind = "gradient"

    def __init__(self, d: int, width: int, side: str = "up", rng=None, activation: str = "sigmoid"):
        super().__init__(d, 2 * d, width, side=side, rng=rng, activation=activation)
        # alias: a gradient module has a single matrix K
        self.K = self._k1

    def dims(self) -> dict:
        return {"d": self.d, "width": self.width, "side": self.side, "activation": self.activation}


class SympNet(Chain):
    """Composition of symplectic (LA, G) or extended-symplectic (E) modules"""

    def __init__(self, kind: str, modules: List[Layer], d: int, n: int):
        if kind not in KINDS:
            raise ConfigError(f"unknown SympNet kind '{kind}', expected one of {KINDS}")
        if kind in ("LA", "G") and n != 2 * d:
            raise ConfigError(f"{kind}-SympNet acts on dimension 2d; got d={d}, n={n}")
        if 2 * d > n:
            raise ConfigError(f"latent dimension 2d={2 * d} exceeds ambient dimension n={n}")
        super().__init__(modules, n)
        self.kind = kind
        self.d = d
        self.n = n

    @property
    def latent_dim(self) -> int:
        return 2 * self.d


def build_sympnet(
    kind: str,
    dim: int,
    layers: int,
    width: int = 30,
    sublayers: int = 2,
    latent: Optional[int] = None,
    rng=None,
    activation: str = "sigmoid",
) -> SympNet:
    """Build a SympNet using the layer terminology of the architecture table.

    LA: ``layers`` linear modules (each of ``sublayers`` factors) with
    ``layers - 1`` activation modules in between. G/E: ``layers`` gradient
    or extended modules of the given width, alternating up, low, up, ...
    """
    if layers < 1:
        raise ConfigError(f"a SympNet needs at least one layer, got {layers}")
    latent = dim if latent is None else latent
    if latent % 2:
        raise ConfigError(f"latent dimension must be even, got {latent}")
    d = latent // 2
    rng = rng if rng is not None else seeded_rng(0)
    modules: List[Layer] = []
    if kind == "LA":
        for i in range(layers):
            modules.append(LinearModule(d, sublayers, parity="up", rng=rng))
            if i < layers - 1:
                modules.append(ActivationModule(d, side=alternate(i), activation=activation))
    elif kind == "G":
        modules = [GradientModule(d, width, side=alternate(i), rng=rng, activation=activation) for i in range(layers)]
    elif kind == "E":
        modules = [ExtendedModule(d, dim, width, side=alternate(i), rng=rng, activation=activation) for i in range(layers)]
    else:
        raise ConfigError(f"unknown SympNet kind '{kind}', expected one of {KINDS}")
    net = SympNet(kind, modules, d, dim)
    logger.debug(f"Built {kind}-SympNet: {len(modules)} modules, {net.params.size()} parameters")
    return net


def module_to_dict(module: Layer) -> dict:
    return {"type": module.kind, "dims": module.dims(), "params": module.params.to_dict()}


def module_from_dict(data: dict) -> Layer:
    kind = data.get("type")
    dims = data.get("dims", {})
    if kind == "linear":
        module = LinearModule(dims["d"], dims["sublayers"], parity=dims.get("parity", "up"))
    elif kind == "activation":
        module = ActivationModule(dims["d"], side=dims["side"], activation=dims.get("activation", "sigmoid"))
    elif kind == "gradient":
        module = GradientModule(dims["d"], dims["width"], side=dims["side"], activation=dims.get("activation", "sigmoid"))
    elif kind == "extended":
        module = ExtendedModule(
            dims["d"], dims["n"], dims["width"], side=dims["side"], activation=dims.get("activation", "sigmoid")
        )
    else:
        raise ConfigError(f"unknown symplectic module type '{kind}'")
    module.params.load_dict(data["params"])
    return module


def sympnet_to_dict(net: SympNet) -> dict:
    return {
        "kind": net.kind,
        "d": net.d,
        "n": net.n,
        "modules": [module_to_dict(m) for m in net.members],
    }


def sympnet_from_dict(data: dict) -> SympNet:
    modules = [module_from_dict(m) for m in data["modules"]]
    return SympNet(data["kind"], modules, data["d"], data["n"])
