"""
Benchmark system contract and the Poisson-bracket condition checker
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional

import numpy as np

from pnnflow.errors import DimensionError
from pnnflow.nets.numcore import as_real


def canonical_structure(n: int, latent: int) -> np.ndarray:
    """B0 = [[J^{-1}, 0], [0, 0]] with J^{-1} = [[0, -I], [I, 0]] on (p, q, c)"""
    d = latent // 2
    b = np.zeros((n, n))
    b[:d, d : 2 * d] = -np.eye(d)
    b[d : 2 * d, :d] = np.eye(d)
    return b


class SystemSpec(ABC):
    """A Poisson (or plain autonomous) system y' = f(y) = B(y) grad H(y).

    Subclasses with a canonical transformation map y to z = (p, q, c) where
    the flow is p' = -K_q, q' = K_p, c' = 0.
    """

    name: str = "system"
    dim: int
    latent: int
    has_canonical: bool = True
    # K(to_canonical(y)) == canonical_orientation * H(y)
    canonical_orientation: float = 1.0

    def check_domain(self, y: np.ndarray) -> None:
        """Raise DomainError when y is outside the admissible domain"""

    def _state(self, y) -> np.ndarray:
        y = as_real(y)
        if y.shape != (self.dim,):
            raise DimensionError(f"{self.name}: expected a state of dimension {self.dim}, got shape {y.shape}")
        self.check_domain(y)
        return y

    @abstractmethod
    def field(self, y: np.ndarray) -> np.ndarray:
        ...

    def structure(self, y: np.ndarray) -> Optional[np.ndarray]:
        return None

    def hamiltonian(self, y: np.ndarray) -> Optional[float]:
        return None

    def grad_hamiltonian(self, y: np.ndarray) -> Optional[np.ndarray]:
        return None

    def to_canonical(self, y: np.ndarray) -> np.ndarray:
        return y

    def from_canonical(self, z: np.ndarray) -> np.ndarray:
        return z

    def canonical_hamiltonian(self, z: np.ndarray) -> float:
        return self.hamiltonian(z)

    def canonical_gradient(self, z: np.ndarray) -> np.ndarray:
        return self.grad_hamiltonian(z)

    def canonical_field(self, z: np.ndarray) -> np.ndarray:
        g = self.canonical_gradient(z)
        d = self.latent // 2
        out = np.zeros_like(g)
        out[:d] = -g[d : 2 * d]
        out[d : 2 * d] = g[:d]
        return out

    def default_initial_states(self) -> List[np.ndarray]:
        return []

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "latent": self.latent}


class CanonicalSystem(SystemSpec):
    """Hamiltonian system already in canonical coordinates (B = J^{-1})"""

    def structure(self, y: np.ndarray) -> np.ndarray:
        return canonical_structure(self.dim, self.latent)

    def field(self, y: np.ndarray) -> np.ndarray:
        return self.canonical_field(y)


def eval_field(system: SystemSpec, y) -> np.ndarray:
    return system.field(system._state(y))


def to_canonical(system: SystemSpec, y) -> np.ndarray:
    return system.to_canonical(system._state(y))


def from_canonical(system: SystemSpec, z) -> np.ndarray:
    z = as_real(z)
    if z.shape != (system.dim,):
        raise DimensionError(f"{system.name}: expected canonical state of dimension {system.dim}, got {z.shape}")
    return system.from_canonical(z)


@dataclass
class BracketReport:
    """Worst-case residuals of the Poisson-bracket conditions"""

    skew_residual: float
    jacobi_residual: float
    points: int

    def passes(self, tol: float) -> bool:
        return self.skew_residual <= tol and self.jacobi_residual <= tol


def check_poisson_bracket(
    structure: Callable[[np.ndarray], np.ndarray], points: Iterable, step: float = 1e-5
) -> BracketReport:
    """Skew-symmetry and Jacobi-identity residuals of B(y) at the given points.

    Derivatives of B come from central differences with the given step.
    """
    skew = 0.0
    jacobi = 0.0
    count = 0
    for y in points:
        y = as_real(y)
        b = as_real(structure(y))
        n = y.size
        skew = max(skew, float(np.max(np.abs(b + b.T))))
        db = np.empty((n, n, n))
        for l in range(n):
            e = np.zeros(n)
            e[l] = step
            db[l] = (as_real(structure(y + e)) - as_real(structure(y - e))) / (2.0 * step)
        cyclic = (
            np.einsum("lij,lk->ijk", db, b)
            + np.einsum("ljk,li->ijk", db, b)
            + np.einsum("lki,lj->ijk", db, b)
        )
        jacobi = max(jacobi, float(np.max(np.abs(cyclic))))
        count += 1
    return BracketReport(skew_residual=skew, jacobi_residual=jacobi, points=count)
