"""
Symplectic data generation.

States are mapped to canonical coordinates, advanced with the implicit
midpoint rule (optionally composed to order 4 or 6 by triple jumps) at
internal substeps, and mapped back at every multiple of h.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from pnnflow.errors import ConfigError, IntegratorError
from pnnflow.nets.numcore import as_real, jacobian_fd
from pnnflow.systems.base import SystemSpec

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]

# scheme name -> order
SCHEMES = {"midpoint": 2, "midpoint4": 4, "midpoint6": 6}


def composition_weights(order: int) -> List[float]:
    """Step fractions of the triple-jump composition of the midpoint rule"""
    weights = [1.0]
    for k in range(1, order // 2):
        g1 = 1.0 / (2.0 - 2.0 ** (1.0 / (2 * k + 1)))
        g2 = 1.0 - 2.0 * g1
        weights = [w * g for g in (g1, g2, g1) for w in weights]
    return weights


@dataclass
class IntegratorSettings:
    scheme: str = "midpoint6"
    substeps: int = 10
    tol: float = 1e-13
    max_fixed_point: int = 60
    max_newton: int = 40

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown integrator scheme '{self.scheme}', expected one of {sorted(SCHEMES)}")
        if self.substeps < 1:
            raise ConfigError(f"substeps must be at least 1, got {self.substeps}")
        if not self.tol > 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tol}")

    @property
    def order(self) -> int:
        return SCHEMES[self.scheme]

    def describe(self) -> dict:
        return {"scheme": self.scheme, "order": self.order, "substeps": self.substeps, "tol": self.tol}


def _converged(increment: float, w: np.ndarray, tol: float) -> bool:
    return increment <= tol * max(1.0, float(np.max(np.abs(w))))


def midpoint_step(field: Field, z: np.ndarray, h: float, settings: IntegratorSettings) -> np.ndarray:
    """One implicit midpoint step w = z + h f((z + w) / 2).

    Fixed-point iteration first; if it stops contracting the stage is
    solved by Newton's method with a finite-difference Jacobian.
    """
    w = z + h * field(z)
    previous = np.inf
    for it in range(settings.max_fixed_point):
        w_new = z + h * field(0.5 * (z + w))
        if not np.all(np.isfinite(w_new)):
            break
        increment = float(np.max(np.abs(w_new - w)))
        w = w_new
        if _converged(increment, w, settings.tol):
            return w
        if it > 2 and increment > 0.9 * previous:
            break
        previous = increment

    w = z + h * field(z)
    n = z.size
    jac = None
    for it in range(settings.max_newton):
        mid = 0.5 * (z + w)
        if jac is None or it % 4 == 0:
            step = 1e-7 * max(1.0, float(np.max(np.abs(mid))))
            jac = np.eye(n) - 0.5 * h * jacobian_fd(field, mid, step)
        residual = w - z - h * field(mid)
        try:
            delta = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            break
        w = w - delta
        if not np.all(np.isfinite(w)):
            break
        if _converged(float(np.max(np.abs(delta))), w, settings.tol):
            return w
    raise IntegratorError(f"implicit midpoint stage did not converge (h={h:g})")


def integrate(field: Field, z0, h: float, steps: int, settings: Optional[IntegratorSettings] = None) -> np.ndarray:
    """States at t = 0, h, ..., steps*h as an array of shape (steps + 1, n)"""
    settings = settings or IntegratorSettings()
    if not h > 0:
        raise ConfigError(f"time step h must be positive, got {h}")
    if steps < 0:
        raise ConfigError(f"number of steps must be non-negative, got {steps}")
    z = as_real(z0).copy()
    out = np.empty((steps + 1, z.size))
    out[0] = z
    stage_steps = [w * h / settings.substeps for w in composition_weights(settings.order)]
    for k in range(steps):
        try:
            for _ in range(settings.substeps):
                for hs in stage_steps:
                    z = midpoint_step(field, z, hs, settings)
        except IntegratorError as e:
            logger.error(f"Integrator failed at step {k + 1}: {e.message}")
            raise IntegratorError(f"{e.message} at step {k + 1}", step=k + 1)
        out[k + 1] = z
    return out


def generate_trajectory(
    system: SystemSpec, y0, h: float, steps: int, settings: Optional[IntegratorSettings] = None
) -> np.ndarray:
    """Ground-truth trajectory of shape (steps + 1, n) in the system's own coordinates"""
    settings = settings or IntegratorSettings()
    y0 = system._state(y0)
    if system.has_canonical:
        zs = integrate(system.canonical_field, system.to_canonical(y0), h, steps, settings)
        traj = np.stack([system.from_canonical(z) for z in zs])
    else:
        traj = integrate(system.field, y0, h, steps, settings)
    logger.debug(f"Generated {system.name} trajectory: {steps} steps at h={h}, scheme {settings.scheme}")
    return traj


def reference_trajectory(
    system: SystemSpec, y0, h: float, steps: int, rtol: float = 1e-12, atol: float = 1e-12
) -> np.ndarray:
    """High-accuracy non-symplectic solution of y' = f(y) (DOP853), for checks only"""
    y0 = system._state(y0)
    times = h * np.arange(steps + 1)
    sol = solve_ivp(
        lambda t, y: system.field(y), (0.0, times[-1]), y0, method="DOP853", t_eval=times, rtol=rtol, atol=atol
    )
    if not sol.success:
        raise IntegratorError(f"reference solver failed: {sol.message}")
    return sol.y.T


def generate_dataset(
    system: SystemSpec,
    initial_states: Sequence,
    h: float,
    steps: int,
    settings: Optional[IntegratorSettings] = None,
    workers: Optional[int] = None,
) -> List[np.ndarray]:
    """One trajectory per initial state, integrated concurrently, in input order"""
    if not initial_states:
        raise ConfigError("at least one initial state is required")
    settings = settings or IntegratorSettings()
    workers = workers or min(4, len(initial_states))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        trajectories = list(executor.map(lambda y0: generate_trajectory(system, y0, h, steps, settings), initial_states))
    logger.info(f"Generated {len(trajectories)} {system.name} trajectories of {steps + 1} states")
    return trajectories
