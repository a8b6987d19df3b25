"""
Benchmark systems: vector fields, structure matrices, Hamiltonians and the
coordinate changes that put each one into canonical form.
"""
from typing import Callable, Dict, List

import numpy as np

from pnnflow.errors import ConfigError, DomainError
from pnnflow.systems.base import CanonicalSystem, SystemSpec


class HarmonicOscillator(CanonicalSystem):
    """H = (p^2 + q^2) / 2"""

    name = "oscillator"
    dim = 2
    latent = 2

    def hamiltonian(self, y: np.ndarray) -> float:
        return 0.5 * float(y @ y)

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        return y.copy()

    def default_initial_states(self) -> List[np.ndarray]:
        return [np.array([1.0, 0.0])]


class Pendulum(CanonicalSystem):
    """H = p^2 / 2 - cos q"""

    name = "pendulum"
    dim = 2
    latent = 2

    def hamiltonian(self, y: np.ndarray) -> float:
        p, q = y
        return 0.5 * p * p - np.cos(q)

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        p, q = y
        return np.array([p, np.sin(q)])

    def default_initial_states(self) -> List[np.ndarray]:
        return [np.array([0.0, 1.0])]


class LotkaVolterra(SystemSpec):
    """u' = u(v - 2), v' = v(1 - u) on the open positive quadrant.

    H = u - ln u + v - 2 ln v with B = [[0, uv], [-uv, 0]]. In (p, q) =
    (ln u, ln v) the flow is canonical with K = p - e^p + 2q - e^q = -H.
    """

    name = "lv"
    dim = 2
    latent = 2
    canonical_orientation = -1.0

    def check_domain(self, y: np.ndarray) -> None:
        if y[0] <= 0 or y[1] <= 0:
            raise DomainError(f"Lotka-Volterra state must have u > 0 and v > 0, got {y.tolist()}")

    def field(self, y: np.ndarray) -> np.ndarray:
        u, v = y
        return np.array([u * (v - 2.0), v * (1.0 - u)])

    def structure(self, y: np.ndarray) -> np.ndarray:
        u, v = y
        return np.array([[0.0, u * v], [-u * v, 0.0]])

    def hamiltonian(self, y: np.ndarray) -> float:
        u, v = y
        return u - np.log(u) + v - 2.0 * np.log(v)

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        u, v = y
        return np.array([1.0 - 1.0 / u, 1.0 - 2.0 / v])

    def to_canonical(self, y: np.ndarray) -> np.ndarray:
        return np.log(y)

    def from_canonical(self, z: np.ndarray) -> np.ndarray:
        return np.exp(z)

    def canonical_hamiltonian(self, z: np.ndarray) -> float:
        p, q = z
        return p - np.exp(p) + 2.0 * q - np.exp(q)

    def canonical_gradient(self, z: np.ndarray) -> np.ndarray:
        p, q = z
        return np.array([1.0 - np.exp(p), 2.0 - np.exp(q)])

    def default_initial_states(self) -> List[np.ndarray]:
        return [np.array([1.0, 0.8]), np.array([1.0, 1.0]), np.array([1.0, 1.2])]


class ExtendedPendulum(SystemSpec):
    """Pendulum lifted to (u, v, r) with r - u^2 - v^2 a Casimir.

    In (p, q, c) = (u, v, r - u^2 - v^2) the Hamiltonian is
    K = p^2/2 - cos q + p c and c stays constant.
    """

    name = "pendulum_ext"
    dim = 3
    latent = 2

    def field(self, y: np.ndarray) -> np.ndarray:
        u, v, r = y
        v_dot = u + r - u * u - v * v
        return np.array([-np.sin(v), v_dot, -2.0 * u * np.sin(v) + 2.0 * v * v_dot])

    def structure(self, y: np.ndarray) -> np.ndarray:
        u, v, _ = y
        return np.array([[0.0, -1.0, -2.0 * v], [1.0, 0.0, 2.0 * u], [2.0 * v, -2.0 * u, 0.0]])

    def hamiltonian(self, y: np.ndarray) -> float:
        u, v, r = y
        return 0.5 * u * u - np.cos(v) + u * r - u ** 3 - u * v * v

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        u, v, r = y
        return np.array([u - 3.0 * u * u - v * v + r, np.sin(v) - 2.0 * u * v, u])

    def to_canonical(self, y: np.ndarray) -> np.ndarray:
        u, v, r = y
        return np.array([u, v, r - u * u - v * v])

    def from_canonical(self, z: np.ndarray) -> np.ndarray:
        p, q, c = z
        return np.array([p, q, c + p * p + q * q])

    def canonical_hamiltonian(self, z: np.ndarray) -> float:
        p, q, c = z
        return 0.5 * p * p - np.cos(q) + p * c

    def canonical_gradient(self, z: np.ndarray) -> np.ndarray:
        p, q, c = z
        return np.array([p + c, np.sin(q), p])

    def default_initial_states(self) -> List[np.ndarray]:
        return [np.array([0.0, 1.0, 1.0]), np.array([0.0, 1.5, 2.35]), np.array([0.0, 2.0, 4.2])]


class ChargedParticle(SystemSpec):
    """Charged particle in a static field, state y = (v, x).

    A(x) = (rho/3) (-x2, x1, 0), so B = curl A = (0, 0, rho) with
    rho = sqrt(x1^2 + x2^2), and electric potential phi = 1 / (100 rho).
    ``spatial=2`` keeps only the planar coordinates.
    """

    def __init__(self, spatial: int = 2, mass: float = 1.0, charge: float = 1.0):
        if spatial not in (2, 3):
            raise ConfigError(f"charged particle supports 2 or 3 spatial dimensions, got {spatial}")
        if mass <= 0:
            raise ConfigError(f"mass must be positive, got {mass}")
        self.k = spatial
        self.mass = mass
        self.charge = charge
        self.name = "lorentz" if spatial == 2 else "lorentz3d"
        self.dim = self.latent = 2 * spatial

    def _split(self, y: np.ndarray):
        return y[: self.k], y[self.k :]

    def _rho(self, x: np.ndarray) -> float:
        rho = float(np.hypot(x[0], x[1]))
        if rho == 0.0:
            raise DomainError("electric potential is singular at x1 = x2 = 0")
        return rho

    def check_domain(self, y: np.ndarray) -> None:
        self._rho(y[self.k :])

    def vector_potential(self, x: np.ndarray) -> np.ndarray:
        rho = self._rho(x)
        a = np.zeros(self.k)
        a[0] = -x[1] * rho / 3.0
        a[1] = x[0] * rho / 3.0
        return a

    def _potential_jacobian(self, x: np.ndarray) -> np.ndarray:
        """dA_i / dx_j"""
        rho = self._rho(x)
        x1, x2 = x[0], x[1]
        da = np.zeros((self.k, self.k))
        da[0, 0] = -x1 * x2 / (3.0 * rho)
        da[0, 1] = -(rho + x2 * x2 / rho) / 3.0
        da[1, 0] = (rho + x1 * x1 / rho) / 3.0
        da[1, 1] = x1 * x2 / (3.0 * rho)
        return da

    def _magnetic_hat(self, x: np.ndarray) -> np.ndarray:
        b3 = self._rho(x)
        hat = np.zeros((self.k, self.k))
        hat[0, 1] = -b3
        hat[1, 0] = b3
        return hat

    def _potential_gradient(self, x: np.ndarray) -> np.ndarray:
        rho = self._rho(x)
        g = np.zeros(self.k)
        g[:2] = -x[:2] / (100.0 * rho ** 3)
        return g

    def field(self, y: np.ndarray) -> np.ndarray:
        v, x = self._split(y)
        ratio = self.charge / self.mass
        v_dot = -ratio * self._magnetic_hat(x) @ v - ratio * self._potential_gradient(x)
        return np.concatenate([v_dot, v])

    def structure(self, y: np.ndarray) -> np.ndarray:
        _, x = self._split(y)
        k, m = self.k, self.mass
        b = np.zeros((2 * k, 2 * k))
        b[:k, :k] = -(self.charge / m ** 2) * self._magnetic_hat(x)
        b[:k, k:] = -np.eye(k) / m
        b[k:, :k] = np.eye(k) / m
        return b

    def hamiltonian(self, y: np.ndarray) -> float:
        v, x = self._split(y)
        return 0.5 * self.mass * float(v @ v) + self.charge / (100.0 * self._rho(x))

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        v, x = self._split(y)
        return np.concatenate([self.mass * v, self.charge * self._potential_gradient(x)])

    def to_canonical(self, y: np.ndarray) -> np.ndarray:
        v, x = self._split(y)
        return np.concatenate([self.mass * v + self.charge * self.vector_potential(x), x])

    def from_canonical(self, z: np.ndarray) -> np.ndarray:
        p, x = self._split(z)
        return np.concatenate([(p - self.charge * self.vector_potential(x)) / self.mass, x])

    def canonical_hamiltonian(self, z: np.ndarray) -> float:
        p, x = self._split(z)
        w = p - self.charge * self.vector_potential(x)
        return float(w @ w) / (2.0 * self.mass) + self.charge / (100.0 * self._rho(x))

    def canonical_gradient(self, z: np.ndarray) -> np.ndarray:
        p, x = self._split(z)
        w = p - self.charge * self.vector_potential(x)
        grad_x = -(self.charge / self.mass) * self._potential_jacobian(x).T @ w + self.charge * self._potential_gradient(x)
        return np.concatenate([w / self.mass, grad_x])

    def default_initial_states(self) -> List[np.ndarray]:
        if self.k == 2:
            return [np.array([1.0, 0.5, 0.5, 1.0])]
        return [np.array([1.0, 0.5, 0.0, 0.5, 1.0, 0.0])]

    def describe(self) -> dict:
        return {**super().describe(), "mass": self.mass, "charge": self.charge}


def _tau(s: np.ndarray) -> np.ndarray:
    """(e^s - 1) / s, equal to 1 at s = 0"""
    out = np.ones_like(s)
    nz = s != 0
    out[nz] = np.expm1(s[nz]) / s[nz]
    return out


def _tau_prime(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    small = np.abs(s) < 0.5
    # series sum_{k>=1} k s^{k-1} / (k+1)!
    t = s[small]
    acc = np.zeros_like(t)
    term = np.full_like(t, 0.5)
    for k in range(1, 18):
        acc += term
        term = term * t * (k + 1) / (k * (k + 2))
    out[small] = acc
    big = ~small
    b = s[big]
    out[big] = (np.exp(b) * (b - 1.0) + 1.0) / (b * b)
    return out


def _sigma(s: np.ndarray) -> np.ndarray:
    """sqrt(ln(1 + s) / s), equal to 1 at s = 0"""
    out = np.ones_like(s)
    nz = s != 0
    out[nz] = np.sqrt(np.log1p(s[nz]) / s[nz])
    return out


class AblowitzLadik(SystemSpec):
    """Integrable discrete nonlinear Schroedinger lattice, y = (u_1..u_N, v_1..v_N).

    Periodic in the lattice index. The structure matrix is
    [[0, -D], [D, 0]] with D = diag(1 + dx^2 (u^2 + v^2)), and the
    symmetric rescaling (p, q) = sigma(s) (u, v), s = dx^2 (u^2 + v^2),
    makes it canonical.
    """

    name = "al"

    def __init__(self, sites: int = 20):
        if sites < 3:
            raise ConfigError(f"Ablowitz-Ladik lattice needs at least 3 sites, got {sites}")
        self.sites = sites
        self.dx = 1.0 / sites
        self.dim = self.latent = 2 * sites

    def _split(self, y: np.ndarray):
        return y[: self.sites], y[self.sites :]

    def check_domain(self, y: np.ndarray) -> None:
        if not np.all(np.isfinite(y)):
            raise DomainError("Ablowitz-Ladik state must be finite")

    def field(self, y: np.ndarray) -> np.ndarray:
        u, v = self._split(y)
        dx2 = self.dx ** 2
        r = u * u + v * v
        v_next, v_prev = np.roll(v, -1), np.roll(v, 1)
        u_next, u_prev = np.roll(u, -1), np.roll(u, 1)
        u_dot = -(v_next - 2.0 * v + v_prev) / dx2 - r * (v_next + v_prev)
        v_dot = (u_next - 2.0 * u + u_prev) / dx2 + r * (u_next + u_prev)
        return np.concatenate([u_dot, v_dot])

    def structure(self, y: np.ndarray) -> np.ndarray:
        u, v = self._split(y)
        n = self.sites
        diag = np.diag(1.0 + self.dx ** 2 * (u * u + v * v))
        b = np.zeros((2 * n, 2 * n))
        b[:n, n:] = -diag
        b[n:, :n] = diag
        return b

    def hamiltonian(self, y: np.ndarray) -> float:
        u, v = self._split(y)
        dx2 = self.dx ** 2
        coupling = np.sum(u * np.roll(u, 1) + v * np.roll(v, 1)) / dx2
        return float(coupling - np.sum(np.log1p(dx2 * (u * u + v * v))) / dx2 ** 2)

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        u, v = self._split(y)
        dx2 = self.dx ** 2
        d = 1.0 + dx2 * (u * u + v * v)
        gu = (np.roll(u, -1) + np.roll(u, 1)) / dx2 - 2.0 * u / (dx2 * d)
        gv = (np.roll(v, -1) + np.roll(v, 1)) / dx2 - 2.0 * v / (dx2 * d)
        return np.concatenate([gu, gv])

    def to_canonical(self, y: np.ndarray) -> np.ndarray:
        u, v = self._split(y)
        scale = _sigma(self.dx ** 2 * (u * u + v * v))
        return np.concatenate([u * scale, v * scale])

    def from_canonical(self, z: np.ndarray) -> np.ndarray:
        p, q = self._split(z)
        scale = np.sqrt(_tau(self.dx ** 2 * (p * p + q * q)))
        return np.concatenate([p * scale, q * scale])

    def canonical_hamiltonian(self, z: np.ndarray) -> float:
        p, q = self._split(z)
        dx2 = self.dx ** 2
        g = np.sqrt(_tau(dx2 * (p * p + q * q)))
        pair = p * np.roll(p, 1) + q * np.roll(q, 1)
        return float(np.sum(g * np.roll(g, 1) * pair) / dx2 - np.sum(p * p + q * q) / dx2)

    def canonical_gradient(self, z: np.ndarray) -> np.ndarray:
        p, q = self._split(z)
        dx2 = self.dx ** 2
        t = dx2 * (p * p + q * q)
        g = np.sqrt(_tau(t))
        g_prime = _tau_prime(t) / (2.0 * g)
        g_prev, g_next = np.roll(g, 1), np.roll(g, -1)
        pair = p * np.roll(p, 1) + q * np.roll(q, 1)
        spread = g_prime * (g_prev * pair + g_next * np.roll(pair, -1))
        kp = g * (g_prev * np.roll(p, 1) + g_next * np.roll(p, -1)) / dx2 + 2.0 * p * spread - 2.0 * p / dx2
        kq = g * (g_prev * np.roll(q, 1) + g_next * np.roll(q, -1)) / dx2 + 2.0 * q * spread - 2.0 * q / dx2
        return np.concatenate([kp, kq])

    def default_initial_states(self) -> List[np.ndarray]:
        x = np.arange(self.sites) * self.dx
        return [np.concatenate([2.0 + 0.2 * np.cos(2.0 * np.pi * x), np.zeros(self.sites)])]

    def describe(self) -> dict:
        return {**super().describe(), "sites": self.sites}


class TwoBody(CanonicalSystem):
    """Planar gravitational two-body problem, z = (p1, p2, q1, q2)"""

    name = "twobody"
    dim = 8
    latent = 8

    def __init__(self, m1: float = 1.0, m2: float = 1.0, gravity: float = 1.0):
        if m1 <= 0 or m2 <= 0:
            raise ConfigError(f"masses must be positive, got {m1}, {m2}")
        self.m1 = m1
        self.m2 = m2
        self.gravity = gravity

    def check_domain(self, y: np.ndarray) -> None:
        if np.array_equal(y[4:6], y[6:8]):
            raise DomainError("two-body state has coincident positions")

    def _separation(self, y: np.ndarray):
        delta = y[4:6] - y[6:8]
        dist = float(np.hypot(delta[0], delta[1]))
        if dist == 0.0:
            raise DomainError("two-body state has coincident positions")
        return delta, dist

    def hamiltonian(self, y: np.ndarray) -> float:
        _, dist = self._separation(y)
        kinetic = float(y[0:2] @ y[0:2]) / (2 * self.m1) + float(y[2:4] @ y[2:4]) / (2 * self.m2)
        return kinetic - self.gravity * self.m1 * self.m2 / dist

    def grad_hamiltonian(self, y: np.ndarray) -> np.ndarray:
        delta, dist = self._separation(y)
        pull = self.gravity * self.m1 * self.m2 * delta / dist ** 3
        return np.concatenate([y[0:2] / self.m1, y[2:4] / self.m2, pull, -pull])

    def positions(self, states: np.ndarray) -> np.ndarray:
        """(T, 2 bodies, 2 coordinates) from a state trajectory"""
        states = np.atleast_2d(states)
        return states[:, 4:8].reshape(-1, 2, 2)

    def default_initial_states(self) -> List[np.ndarray]:
        return [np.array([0.0, -0.4, 0.0, 0.4, -1.0, 0.0, 1.0, 0.0])]

    def describe(self) -> dict:
        return {**super().describe(), "m1": self.m1, "m2": self.m2, "gravity": self.gravity}


SYSTEMS: Dict[str, Callable[..., SystemSpec]] = {
    "oscillator": HarmonicOscillator,
    "pendulum": Pendulum,
    "lv": LotkaVolterra,
    "pendulum_ext": ExtendedPendulum,
    "lorentz": lambda **kw: ChargedParticle(spatial=2, **kw),
    "lorentz3d": lambda **kw: ChargedParticle(spatial=3, **kw),
    "al": AblowitzLadik,
    "twobody": TwoBody,
}


def get_system(name: str, **params) -> SystemSpec:
    """Instantiate a catalog entry by name"""
    factory = SYSTEMS.get(name)
    if factory is None:
        raise ConfigError(f"unknown system '{name}', expected one of {sorted(SYSTEMS)}")
    try:
        return factory(**params)
    except TypeError as e:
        raise ConfigError(f"invalid parameters for system '{name}': {e}")
