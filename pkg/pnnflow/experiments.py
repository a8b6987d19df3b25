"""
Experiment pipelines behind the CLI verbs: dataset generation, training,
prediction and evaluation, plus the bundled recipes.
"""
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pnnflow import __version__
from pnnflow.errors import ConfigError, DataIOError, DimensionError
from pnnflow.models.checkpoint import CHECKPOINT_SUFFIX, Checkpoint, load_checkpoint, save_checkpoint
from pnnflow.models.config import ExperimentConfig, build_config, load_config
from pnnflow.models.report import ComparisonRow, MetricReport, TrainingSummary
from pnnflow.nets.coupling import AutoencoderPair, build_inn
from pnnflow.nets.numcore import as_real, seeded_rng
from pnnflow.nets.pnn import FlowDataset, PnnModel, predict
from pnnflow.nets.sympnet import build_sympnet
from pnnflow.settings import get_settings
from pnnflow.systems.integrate import generate_dataset, generate_trajectory
from pnnflow.systems.render import flatten_movie, render_two_body, unflatten_movie
from pnnflow.train import evaluate, train
from pnnflow.utils import io

logger = logging.getLogger(__name__)

RECIPES_DIR = Path(__file__).parent / "recipes"
MANIFEST_NAME = "manifest.json"
SPLITS = ("train", "test", "fine")

# recipe used when only a system name is given
SYSTEM_RECIPES = {
    "lv": "lv_pnn",
    "pendulum_ext": "pendulum_ext",
    "lorentz": "lorentz_vp",
    "al": "al_n20",
    "twobody": "twobody",
}


def list_recipes() -> List[str]:
    return sorted(p.stem for p in RECIPES_DIR.glob("*.json"))


def recipe_path(name: str) -> Path:
    path = RECIPES_DIR / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown recipe '{name}', available: {', '.join(list_recipes())}")
    return path


def resolve_config(
    config: Optional[str] = None,
    system: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Config file path or recipe name, else the default recipe for a system"""
    overrides = dict(overrides or {})
    if config:
        path = Path(config)
        if path.suffix == ".json" or path.exists():
            cfg = load_config(path, overrides)
        else:
            cfg = load_config(recipe_path(config), overrides)
    elif system:
        recipe = SYSTEM_RECIPES.get(system)
        if recipe is not None:
            cfg = load_config(recipe_path(recipe), overrides)
        else:
            overrides.setdefault("name", system)
            cfg = build_config({"system": {"name": system}}, overrides)
    else:
        raise ConfigError("either a config file / recipe or a system name is required")
    if system and cfg.system.name != system:
        raise ConfigError(f"config describes system '{cfg.system.name}', not '{system}'")
    return cfg


def output_dir_for(cfg: ExperimentConfig, out: Optional[Path] = None) -> Path:
    """flag > config > settings output root"""
    if out is not None:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return get_settings().output_dir(cfg.name)


@dataclass
class DatasetBundle:
    """Trajectory splits of one experiment in observed coordinates.

    ``train`` trajectories hold train_steps + 1 states; ``test`` ones
    continue from the last training state at step h; ``fine`` ones do the
    same at h / fine_factor. Pixel datasets carry flattened frames.
    """

    h: float
    train: List[np.ndarray]
    test: List[np.ndarray] = field(default_factory=list)
    fine: List[np.ndarray] = field(default_factory=list)
    fine_factor: Optional[int] = None
    frame_shape: Optional[Tuple[int, int]] = None
    # underlying states of pixel datasets, per split
    states: Dict[str, List[np.ndarray]] = field(default_factory=dict)
    manifest: Dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.train[0].shape[1]

    def flow_dataset(self) -> FlowDataset:
        return FlowDataset.from_trajectories(self.train, self.h)

    def split(self, name: str) -> List[np.ndarray]:
        return getattr(self, name)


def _render_split(states: List[np.ndarray], cfg: ExperimentConfig, dt: float) -> List[np.ndarray]:
    system = cfg.build_system()
    movie_cfg = cfg.dataset.movie
    out = []
    for traj in states:
        movie = render_two_body(
            system.positions(traj),
            width=movie_cfg.width,
            height=movie_cfg.height,
            radius=movie_cfg.radius,
            viewport=movie_cfg.viewport,
            dt=dt,
            states=traj,
        )
        out.append(flatten_movie(movie))
    return out


def build_dataset(cfg: ExperimentConfig, workers: Optional[int] = None) -> DatasetBundle:
    """Integrate every initial state and split the trajectories"""
    system = cfg.build_system()
    ds = cfg.dataset
    settings = ds.integrator.settings()
    total = ds.train_steps + ds.test_steps
    full = generate_dataset(system, cfg.resolved_initial_states(), ds.h, total, settings, workers=workers)
    train_states = [t[: ds.train_steps + 1] for t in full]
    test_states = [t[ds.train_steps :] for t in full] if ds.test_steps else []
    fine_states = []
    if ds.fine_factor and ds.test_steps:
        fine_states = [
            generate_trajectory(system, t[ds.train_steps], ds.h / ds.fine_factor, ds.test_steps * ds.fine_factor, settings)
            for t in full
        ]
    bundle = DatasetBundle(h=ds.h, train=train_states, test=test_states, fine=fine_states, fine_factor=ds.fine_factor)
    if ds.movie is not None:
        bundle.train = _render_split(train_states, cfg, ds.h)
        bundle.test = _render_split(test_states, cfg, ds.h)
        bundle.fine = _render_split(fine_states, cfg, ds.h / ds.fine_factor) if fine_states else []
        bundle.frame_shape = (ds.movie.height, ds.movie.width)
        bundle.states = {"train": train_states, "test": test_states, "fine": fine_states}
    return bundle


def write_dataset(bundle: DatasetBundle, cfg: ExperimentConfig, directory: Path, fmt: str = "csv") -> Path:
    """Trajectory files (or PGM frames) plus a manifest JSON"""
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown trajectory format '{fmt}', expected csv or jsonl")
    directory = Path(directory)
    entries = []
    t_split = bundle.h * cfg.dataset.train_steps
    for i in range(len(bundle.train)):
        entry = {}
        for split in SPLITS:
            trajs = bundle.split(split)
            if not trajs:
                continue
            dt = bundle.h / bundle.fine_factor if split == "fine" else bundle.h
            t0 = 0.0 if split == "train" else t_split
            stem = f"traj_{i:03d}_{split}"
            if bundle.frame_shape is not None:
                frames = unflatten_movie(trajs[i], *bundle.frame_shape)
                entry[split] = {"frames": io.write_frames(directory / "frames", frames, stem, dt), "dt": dt, "t0": t0}
                io.write_trajectory(directory / f"{stem}_states.{fmt}", bundle.states[split][i], dt, t0)
                entry[split]["states"] = f"{stem}_states.{fmt}"
            else:
                name = f"{stem}.{fmt}"
                io.write_trajectory(directory / name, trajs[i], dt, t0)
                entry[split] = {"file": name, "dt": dt, "t0": t0}
        entries.append(entry)
    manifest = {
        "pnnflow_version": __version__,
        "experiment": cfg.name,
        "system": cfg.build_system().describe(),
        "h": bundle.h,
        "train_steps": cfg.dataset.train_steps,
        "test_steps": cfg.dataset.test_steps,
        "fine_factor": bundle.fine_factor,
        "integrator": cfg.dataset.integrator.settings().describe(),
        "seed": cfg.train.seed,
        "format": fmt,
        "frame_shape": list(bundle.frame_shape) if bundle.frame_shape else None,
        "trajectories": entries,
        "config": cfg.model_dump(mode="json"),
        "created_at": datetime.now().isoformat(),
    }
    path = io.write_json(directory / MANIFEST_NAME, manifest)
    logger.info(f"Wrote dataset with {len(entries)} trajectories to {directory}")
    return path


def read_dataset(directory: Path) -> DatasetBundle:
    directory = Path(directory)
    manifest = io.read_json(directory / MANIFEST_NAME)
    frame_shape = tuple(manifest["frame_shape"]) if manifest.get("frame_shape") else None
    splits: Dict[str, List[np.ndarray]] = {s: [] for s in SPLITS}
    for entry in manifest["trajectories"]:
        for split, info in entry.items():
            if frame_shape is not None:
                frames = io.read_frames(directory / "frames", info["frames"])
                splits[split].append(frames.reshape(frames.shape[0], -1))
            else:
                _, states = io.read_trajectory(directory / info["file"])
                splits[split].append(states)
    if not splits["train"]:
        raise DataIOError(f"dataset {directory} has no training trajectories")
    return DatasetBundle(
        h=manifest["h"],
        train=splits["train"],
        test=splits["test"],
        fine=splits["fine"],
        fine_factor=manifest.get("fine_factor"),
        frame_shape=frame_shape,
        manifest=manifest,
    )


def run_gen(cfg: ExperimentConfig, out: Optional[Path] = None, fmt: str = "csv") -> Path:
    directory = output_dir_for(cfg, out) / "data"
    return write_dataset(build_dataset(cfg), cfg, directory, fmt)


def build_model(cfg: ExperimentConfig) -> PnnModel:
    """Freshly initialised model for a validated config"""
    m = cfg.model
    rng = seeded_rng(cfg.train.seed)
    n = cfg.ambient_dim()
    latent = cfg.latent_dim()
    inn_args = dict(
        partition=cfg.resolved_partition(),
        layers=m.transform_layers,
        sublayers=m.transform_sublayers,
        width=m.transform_width,
        rng=rng,
        activation=m.activation,
    )
    if m.architecture == "vpnn":
        return PnnModel.bare(build_inn(m.transform, n, **inn_args))
    if m.architecture == "sympnet":
        core = build_sympnet(
            m.core, n, m.core_layers, m.core_width, m.core_sublayers, latent=latent, rng=rng, activation=m.activation
        )
        return PnnModel.bare(core)
    if m.transform == "AE":
        transform = AutoencoderPair(n, latent, m.transform_layers, m.transform_width, rng=rng, activation=m.activation)
        core = build_sympnet(m.core, latent, m.core_layers, m.core_width, m.core_sublayers, rng=rng, activation=m.activation)
    else:
        transform = build_inn(m.transform, n, **inn_args)
        core = build_sympnet(
            m.core, n, m.core_layers, m.core_width, m.core_sublayers, latent=latent, rng=rng, activation=m.activation
        )
    return PnnModel(transform, core, recurrence=m.recurrence)


def _model_label(cfg: ExperimentConfig) -> str:
    m = cfg.model
    if m.architecture == "pnn":
        return f"{m.transform}-PNN"
    if m.architecture == "vpnn":
        return "VPNN" if m.transform == "VP" else f"{m.transform}NN"
    return f"{m.core}-SympNet"


@dataclass
class TrainOutcome:
    checkpoint: Path
    report: MetricReport
    metrics_path: Path
    loss_path: Path
    final_loss: float


def _evaluate_bundle(model: PnnModel, bundle: DatasetBundle, epsilon: float) -> MetricReport:
    fine = bundle.fine if bundle.fine and model.recurrence > 1 and bundle.fine_factor == model.recurrence else None
    return evaluate(model, bundle.flow_dataset(), test=bundle.test or None, epsilon=epsilon, fine_test=fine)


def run_train(cfg: ExperimentConfig, dataset: Optional[Path] = None, out: Optional[Path] = None) -> TrainOutcome:
    bundle = read_dataset(dataset) if dataset else build_dataset(cfg)
    if bundle.dim != cfg.ambient_dim():
        raise DimensionError(f"dataset dimension {bundle.dim} does not match model dimension {cfg.ambient_dim()}")
    model = build_model(cfg)
    result = train(model, bundle.flow_dataset(), cfg.train)
    report = _evaluate_bundle(model, bundle, cfg.train.epsilon)
    directory = output_dir_for(cfg, out)
    summary = TrainingSummary(
        experiment=cfg.name,
        architecture=_model_label(cfg),
        iterations=result.iterations,
        seed=cfg.train.seed,
        final_loss=result.final_loss,
        wall_seconds=result.seconds,
    )
    checkpoint = Checkpoint(
        model=model,
        h=bundle.h,
        system=cfg.system.name,
        config=cfg.model_dump(mode="json"),
        summary=summary.model_dump(mode="json"),
        report=report.model_dump(mode="json"),
    )
    ckpt_path = save_checkpoint(directory / f"{cfg.name}{CHECKPOINT_SUFFIX}", checkpoint)
    metrics_path = io.write_json(directory / "metrics.json", report.model_dump(mode="json"))
    loss_path = io.write_loss_csv(directory / "loss.csv", result.losses)
    logger.info(f"Training MSE {report.train_mse:.3e}; test MSE {report.test_mse}; VPT {report.vpt}")
    return TrainOutcome(ckpt_path, report, metrics_path, loss_path, result.final_loss)


def _bundle_for_checkpoint(ckpt: Checkpoint, dataset: Optional[Path]) -> DatasetBundle:
    if dataset:
        return read_dataset(dataset)
    if not ckpt.config:
        raise ConfigError("checkpoint carries no config; pass a dataset directory")
    return build_dataset(build_config(ckpt.config))


def rollout_dt(ckpt: Checkpoint, emit_substeps: bool) -> Optional[float]:
    if ckpt.h is None:
        return None
    return ckpt.h / ckpt.model.recurrence if emit_substeps else ckpt.h


def run_predict(
    checkpoint: Path,
    steps: int,
    x0: Optional[Sequence[float]] = None,
    dataset: Optional[Path] = None,
    emit_substeps: bool = False,
    out: Optional[Path] = None,
) -> List[Path]:
    """Roll out from x0, or from the last state of every training trajectory"""
    ckpt = load_checkpoint(checkpoint)
    frame_shape = None
    t0 = 0.0
    if x0 is not None:
        starts = [as_real(x0)]
    else:
        bundle = _bundle_for_checkpoint(ckpt, dataset)
        starts = [t[-1] for t in bundle.train]
        frame_shape = bundle.frame_shape
        t0 = bundle.h * (bundle.train[0].shape[0] - 1)
    dt = rollout_dt(ckpt, emit_substeps) or 1.0
    directory = Path(out) if out else Path(checkpoint).parent / "predictions"
    written = []
    for i, start in enumerate(starts):
        rollout = predict(ckpt.model, start, steps, emit_substeps=emit_substeps)
        path = io.write_trajectory(directory / f"rollout_{i:03d}.csv", np.vstack([start, rollout]), dt, t0)
        written.append(path)
        if frame_shape is not None:
            frames = np.clip(unflatten_movie(rollout, *frame_shape), 0.0, 1.0)
            io.write_frames(directory / "frames", frames, f"rollout_{i:03d}", dt)
    logger.info(f"Wrote {len(written)} rollouts of {steps} steps to {directory}")
    return written


def run_eval(checkpoint: Path, dataset: Optional[Path] = None, epsilon: Optional[float] = None) -> MetricReport:
    ckpt = load_checkpoint(checkpoint)
    bundle = _bundle_for_checkpoint(ckpt, dataset)
    if bundle.dim != ckpt.model.ambient_dim:
        raise DimensionError(f"dataset dimension {bundle.dim} does not match checkpoint dimension {ckpt.model.ambient_dim}")
    if epsilon is None:
        epsilon = (ckpt.config or {}).get("train", {}).get("epsilon", 0.02)
    return _evaluate_bundle(ckpt.model, bundle, epsilon)


def compare(checkpoints: Sequence[Path], dataset: Optional[Path] = None, epsilon: Optional[float] = None) -> List[ComparisonRow]:
    """One table row per checkpoint, all evaluated on the same data"""
    rows = []
    for path in checkpoints:
        ckpt = load_checkpoint(path)
        report = run_eval(path, dataset, epsilon)
        label = ckpt.summary.get("architecture") or ckpt.name
        rows.append(
            ComparisonRow(
                model=label,
                train_mse=report.train_mse,
                test_mse=report.test_mse,
                rollout_mse=report.rollout_mse,
                vpt=report.vpt,
            )
        )
    return rows


def format_table(rows: Sequence[ComparisonRow]) -> str:
    def cell(value) -> str:
        return "-" if value is None else f"{value:.3e}"

    lines = [f"{'model':<14} {'train MSE':>11} {'test MSE':>11} {'rollout MSE':>12} {'VPT':>8}"]
    for r in rows:
        vpt_cell = "-" if r.vpt is None else f"{r.vpt:.2f}"
        lines.append(f"{r.model:<14} {cell(r.train_mse):>11} {cell(r.test_mse):>11} {cell(r.rollout_mse):>12} {vpt_cell:>8}")
    return "\n".join(lines)
