"""
Dense 64-bit arrays, parameter containers and the differentiable-layer contract

Every network piece in pnnflow is a Layer: ``forward(x)`` maps a batch of
row vectors (shape ``(N, dim_in)``) to ``(N, dim_out)`` and
``backward(x, grad_out)`` returns the input cotangent while summing the
parameter gradients into the layer's ParamSet. Layers never cache
activations, so a frozen layer can be evaluated from several threads.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from pnnflow.errors import ConfigError, DimensionError

DTYPE = np.float64


def as_real(x) -> np.ndarray:
    """Convert to a float64 numpy array"""
    return np.asarray(x, dtype=DTYPE)


def as_batch(x, dim: int, name: str = "input") -> Tuple[np.ndarray, bool]:
    """Promote a single vector to a one-row batch and check its width.

    Returns the batch and whether the input was a single vector.
    """
    arr = as_real(x)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"{name}: expected trailing dimension {dim}, got shape {arr.shape}")
    return arr, single


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic function, overflow-free"""
    return expit(as_real(x))


def sigmoid_prime_from_value(s: np.ndarray) -> np.ndarray:
    return s * (1.0 - s)


# name -> (activation, derivative expressed through the activation value)
ACTIVATIONS: Dict[str, Tuple[Callable, Callable]] = {
    "sigmoid": (sigmoid, sigmoid_prime_from_value),
    "tanh": (np.tanh, lambda t: 1.0 - t * t),
}


def get_activation(name: str) -> Tuple[Callable, Callable]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown activation '{name}', expected one of {sorted(ACTIVATIONS)}")


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream (PCG64, 128-bit state)"""
    if seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform on [-r, r] with r = sqrt(6 / (fan_in + fan_out))"""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in))


@dataclass
class Parameter:
    """A learnable array and its gradient accumulator"""

    value: np.ndarray
    grad: np.ndarray


class ParamSet:
    """Named learnable arrays with paired gradient accumulators.

    Merged sets share the underlying arrays, so an optimizer stepping the
    merged set of a network updates every member module in place.
    """

    def __init__(self):
        self._entries: Dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._entries:
            raise ConfigError(f"duplicate parameter name: {name}")
        value = np.array(value, dtype=DTYPE)
        self._entries[name] = Parameter(value=value, grad=np.zeros_like(value))
        return value

    def merge(self, prefix: str, other: "ParamSet") -> None:
        for name, param in other.items():
            full = f"{prefix}.{name}" if prefix else name
            if full in self._entries:
                raise ConfigError(f"duplicate parameter name: {full}")
            self._entries[full] = param

    def __getitem__(self, name: str) -> Parameter:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> List[str]:
        return list(self._entries)

    def zero_grad(self) -> None:
        for param in self._entries.values():
            param.grad.fill(0.0)

    def size(self) -> int:
        """Total number of scalar parameters"""
        return int(sum(p.value.size for p in self._entries.values()))

    def to_dict(self) -> Dict[str, list]:
        return {name: p.value.tolist() for name, p in self._entries.items()}

    def load_dict(self, values: Dict[str, list]) -> None:
        """Copy serialized values into the existing arrays (shapes must match)"""
        missing = set(self._entries) - set(values)
        if missing:
            raise ConfigError(f"missing parameters in checkpoint: {sorted(missing)}")
        for name, param in self._entries.items():
            arr = as_real(values[name])
            if arr.shape != param.value.shape:
                raise DimensionError(
                    f"parameter {name}: expected shape {param.value.shape}, got {arr.shape}"
                )
            param.value[...] = arr

    def randomize(self, rng: np.random.Generator, scale: float = 1.0) -> None:
        """Overwrite every value with N(0, scale^2) draws (used by tests and ablations)"""
        for param in self._entries.values():
            param.value[...] = scale * rng.standard_normal(param.value.shape)


class Layer(ABC):
    """Differentiable map between batches of row vectors"""

    dim_in: int
    dim_out: int

    def __init__(self):
        self.params = ParamSet()

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        """Vector-Jacobian product at x; parameter gradients are accumulated"""

    def __call__(self, x) -> np.ndarray:
        batch, single = as_batch(x, self.dim_in)
        out = self.forward(batch)
        return out[0] if single else out

    def zero_grad(self) -> None:
        self.params.zero_grad()


class Dense(Layer):
    """Fully-connected net: ``layers`` affine maps with sigmoid in between.

    Hidden widths are all ``width``; ``layers=1`` is a single affine map.
    With ``zero_last`` the final affine map starts at zero so the net
    outputs 0 until trained.
    """

    def __init__(
        self,
        dim_in: int,
        dim_out: int,
        layers: int,
        width: int,
        rng: Optional[np.random.Generator] = None,
        zero_last: bool = False,
        activation: str = "sigmoid",
    ):
        super().__init__()
        if layers < 1:
            raise ConfigError(f"a dense net needs at least one layer, got {layers}")
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.layers = layers
        self.width = width
        self.activation = activation
        self._act, self._act_prime = get_activation(activation)
        rng = rng if rng is not None else seeded_rng(0)
        sizes = [dim_in] + [width] * (layers - 1) + [dim_out]
        self._weights: List[np.ndarray] = []
        self._biases: List[np.ndarray] = []
        for i in range(layers):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            if zero_last and i == layers - 1:
                w = np.zeros((fan_out, fan_in))
            else:
                w = glorot_uniform(rng, fan_out, fan_in)
            self._weights.append(self.params.add(f"W{i}", w))
            self._biases.append(self.params.add(f"b{i}", np.zeros(fan_out)))

    def _activations(self, x: np.ndarray) -> List[np.ndarray]:
        acts = [x]
        h = x
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            z = h @ w.T + b
            h = self._act(z) if i < self.layers - 1 else z
            acts.append(h)
        return acts

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self._activations(x)[-1]

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        acts = self._activations(x)
        g = grad_out
        for i in range(self.layers - 1, -1, -1):
            if i < self.layers - 1:
                g = g * self._act_prime(acts[i + 1])
            self.params[f"W{i}"].grad += g.T @ acts[i]
            self.params[f"b{i}"].grad += g.sum(axis=0)
            g = g @ self._weights[i]
        return g

    def describe(self) -> dict:
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "layers": self.layers,
            "width": self.width,
            "activation": self.activation,
        }


class Chain(Layer):
    """Ordered composition of layers sharing one ParamSet"""

    def __init__(self, members: Sequence[Layer], dim: int):
        super().__init__()
        self.members: List[Layer] = list(members)
        self.dim_in = self.dim_out = dim
        for i, member in enumerate(self.members):
            if member.dim_in != dim or member.dim_out != dim:
                raise DimensionError(
                    f"member {i} maps {member.dim_in}->{member.dim_out}, chain dimension is {dim}"
                )
            self.params.merge(str(i), member.params)

    def __len__(self) -> int:
        return len(self.members)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for member in self.members:
            x = member.forward(x)
        return x

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        inputs = []
        for member in self.members:
            inputs.append(x)
            x = member.forward(x)
        g = grad_out
        for member, x_in in zip(reversed(self.members), reversed(inputs)):
            g = member.backward(x_in, g)
        return g


def finite_diff_grad(fn: Callable[[], float], params: ParamSet, step: float = 1e-6) -> Dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function of the parameters.

    Each entry is perturbed in place and restored afterwards.
    """
    if step <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {step}")
    grads = {}
    for name, param in params.items():
        est = np.zeros_like(param.value)
        flat = param.value.reshape(-1)
        flat_est = est.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = fn()
            flat[i] = orig - step
            minus = fn()
            flat[i] = orig
            flat_est[i] = (plus - minus) / (2.0 * step)
        grads[name] = est
    return grads


def finite_diff_vjp(
    layer: Layer, x, cotangent, step: float = 1e-6
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Central-difference estimate of the vector-Jacobian product of a layer.

    Returns the input-cotangent estimate (same shape as x) and one
    gradient estimate per parameter.
    """
    if step <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {step}")
    x = as_real(x)
    cot = as_real(cotangent)

    def objective_at(point: np.ndarray) -> float:
        return float(np.sum(cot * layer(point)))

    gx = np.zeros_like(x)
    flat_x = gx.reshape(-1)
    for i in range(flat_x.size):
        plus = x.copy().reshape(-1)
        minus = x.copy().reshape(-1)
        plus[i] += step
        minus[i] -= step
        flat_x[i] = (objective_at(plus.reshape(x.shape)) - objective_at(minus.reshape(x.shape))) / (2.0 * step)
    grads = finite_diff_grad(lambda: objective_at(x), layer.params, step)
    return gx, grads


def analytic_vjp(layer: Layer, x, cotangent) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Analytic counterpart of finite_diff_vjp, gradients taken from a clean accumulator"""
    batch, single = as_batch(x, layer.dim_in)
    cot, _ = as_batch(cotangent, layer.dim_out, "cotangent")
    layer.zero_grad()
    gx = layer.backward(batch, cot)
    grads = {name: p.grad.copy() for name, p in layer.params.items()}
    layer.zero_grad()
    return (gx[0] if single else gx), grads


def jacobian_fd(fn: Callable[[np.ndarray], np.ndarray], x, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector map at a single point"""
    x = as_real(x)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((as_real(fn(x + e)) - as_real(fn(x - e))) / (2.0 * step))
    return np.stack(cols, axis=-1)


def relative_error(a, b) -> float:
    """max |a - b| relative to max(1, max |b|)"""
    a = as_real(a)
    b = as_real(b)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0
