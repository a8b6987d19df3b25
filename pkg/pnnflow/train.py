"""
Adam optimizer, full-batch training loop and evaluation metrics
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from pnnflow.errors import ConfigError, DimensionError, NonFiniteError
from pnnflow.models.config import TrainConfig
from pnnflow.models.report import LossPoint, MetricReport
from pnnflow.nets.numcore import ParamSet, as_real
from pnnflow.nets.pnn import FlowDataset, PnnModel, loss_for, predict

logger = logging.getLogger(__name__)


class Adam:
    """Bias-corrected Adam over a ParamSet; moment buffers keyed by parameter name"""

    def __init__(self, params: ParamSet, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not lr > 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(p.value) for name, p in params.items()}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(p.value) for name, p in params.items()}

    def step(self) -> None:
        """Apply one update from the accumulated gradients, then zero them"""
        for name, p in self.params.items():
            if not np.all(np.isfinite(p.grad)):
                logger.error(f"Non-finite gradient in parameter {name} at Adam step {self.t + 1}")
                raise NonFiniteError(f"non-finite gradient in parameter '{name}'", iteration=self.t + 1)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.params.zero_grad()


def _pair(a, b):
    a = as_real(a)
    b = as_real(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def rmse(a, b) -> float:
    return float(np.sqrt(mse(a, b)))


def rmse_series(pred, truth) -> np.ndarray:
    """Per-step RMSE, averaging over every axis but the first"""
    pred, truth = _pair(pred, truth)
    diff = (pred - truth).reshape(pred.shape[0], -1)
    return np.sqrt(np.mean(diff * diff, axis=1))


def vpt(times: Sequence[float], errors: Sequence[float], epsilon: float) -> float:
    """Largest t such that every error up to t stays within epsilon; 0 if the first already exceeds it"""
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    times = as_real(times)
    errors = as_real(errors)
    if times.size == 0 or times.shape != errors.shape:
        raise DimensionError("vpt needs non-empty time and error series of equal length")
    if np.any(np.diff(times) <= 0):
        raise ConfigError("vpt times must be strictly increasing")
    exceed = np.nonzero(errors > epsilon)[0]
    if exceed.size == 0:
        return float(times[-1])
    first = int(exceed[0])
    return 0.0 if first == 0 else float(times[first - 1])


@dataclass
class TrainResult:
    model: PnnModel
    losses: List[LossPoint] = field(default_factory=list)
    final_loss: float = float("nan")
    iterations: int = 0
    seconds: float = 0.0


def train(model: PnnModel, data: FlowDataset, cfg: TrainConfig) -> TrainResult:
    """cfg.iterations full-batch loss / gradient / Adam cycles"""
    lam = cfg.lam
    optimizer = Adam(model.params, lr=cfg.lr)
    model.zero_grad()
    losses: List[LossPoint] = []
    start = time.perf_counter()
    logger.info(
        f"Training {model.architecture} ({model.params.size()} parameters) on {len(data)} pairs for {cfg.iterations} iterations"
    )
    loss = float("nan")
    for it in range(1, cfg.iterations + 1):
        try:
            loss = loss_for(model, data, lam=lam, grad=True)
            optimizer.step()
        except NonFiniteError as e:
            raise NonFiniteError(f"{e.message} at iteration {it}", iteration=it)
        if it == 1 or it % cfg.log_interval == 0 or it == cfg.iterations:
            losses.append(LossPoint(iteration=it, loss=loss))
            logger.info(f"iter {it}: loss {loss:.6e}")
    final = loss_for(model, data, lam=lam, grad=False)
    seconds = time.perf_counter() - start
    logger.info(f"Training finished in {seconds:.1f}s, final loss {final:.6e}")
    return TrainResult(model=model, losses=losses, final_loss=final, iterations=cfg.iterations, seconds=seconds)


def one_step_mse(model: PnnModel, data: FlowDataset) -> float:
    """MSE of theta^{-1} Phi^m theta(x_i) against y_i in observed coordinates"""
    return mse(model.step_batch(data.inputs), data.targets)


def _stack_trajectories(trajectories) -> np.ndarray:
    """(N, T, n) from one (T, n) array or a list of equal-length trajectories"""
    if isinstance(trajectories, np.ndarray) and trajectories.ndim == 2:
        return trajectories[None]
    stacked = as_real(np.stack([as_real(t) for t in trajectories]))
    if stacked.ndim != 3 or stacked.shape[1] < 2:
        raise DimensionError(f"test trajectories must be (T >= 2, n) arrays of equal length, got {stacked.shape}")
    return stacked


def evaluate(
    model: PnnModel,
    train_data: FlowDataset,
    test=None,
    epsilon: float = 0.02,
    fine_test=None,
) -> MetricReport:
    """Metrics of a trained model.

    ``test`` holds ground-truth continuations that start where the
    training data ends, sampled at h; long rollouts start from their first
    states. ``fine_test`` holds the same continuations sampled at h/m and
    yields the grid / in-between errors of substep predictions.
    """
    h = train_data.h
    report = {"train_mse": one_step_mse(model, train_data), "epsilon": epsilon}
    if test is not None:
        truth = _stack_trajectories(test)
        steps = truth.shape[1] - 1
        pairs = FlowDataset(truth[:, :-1].reshape(-1, truth.shape[2]), truth[:, 1:].reshape(-1, truth.shape[2]), h)
        rollout = predict(model, truth[:, 0], steps)
        expected = np.swapaxes(truth[:, 1:], 0, 1)
        series = rmse_series(rollout, expected)
        times = h * np.arange(1, steps + 1)
        report.update(
            test_mse=one_step_mse(model, pairs),
            rollout_mse=mse(rollout, expected),
            vpt=vpt(times, series, epsilon),
            horizon=float(times[-1]),
            rmse_times=times.tolist(),
            rmse_series=series.tolist(),
        )
    if fine_test is not None:
        report.update(substep_errors(model, fine_test))
    return MetricReport(**report)


def substep_errors(model: PnnModel, fine_test) -> dict:
    """Grid and in-between MSE of a rollout that decodes every latent step"""
    truth = _stack_trajectories(fine_test)
    m = model.recurrence
    if m < 2:
        raise ConfigError("in-between frames need a model with recurrence m >= 2")
    k = (truth.shape[1] - 1) // m
    if k < 1:
        raise DimensionError(f"fine test trajectories need at least {m + 1} states")
    pred = predict(model, truth[:, 0], k, emit_substeps=True)
    expected = np.swapaxes(truth[:, 1 : k * m + 1], 0, 1)
    on_grid = (np.arange(1, k * m + 1) % m) == 0
    return {"grid_mse": mse(pred[on_grid], expected[on_grid]), "mid_mse": mse(pred[~on_grid], expected[~on_grid])}
