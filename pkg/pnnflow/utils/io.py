"""
Readers and writers for trajectories, frames, manifests and loss curves
"""
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Tuple

import numpy as np
from PIL import Image

from pnnflow.errors import DataIOError, DimensionError
from pnnflow.nets.numcore import as_real

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _ensure_parent(path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"cannot create directory {path.parent}: {e}")
    return path


def write_trajectory_csv(path: Path, states, h: float, t0: float = 0.0) -> Path:
    """CSV with header ``t,y1..yn``; floats round-trip exactly"""
    states = as_real(states)
    if states.ndim != 2:
        raise DimensionError(f"trajectory must be a (T, n) array, got {states.shape}")
    path = _ensure_parent(path)
    times = t0 + h * np.arange(states.shape[0])
    header = ",".join(["t"] + [f"y{i + 1}" for i in range(states.shape[1])])
    try:
        np.savetxt(path, np.column_stack([times, states]), delimiter=",", header=header, comments="", fmt=FLOAT_FORMAT)
    except OSError as e:
        raise DataIOError(f"could not write {path}: {e}")
    return path


def read_trajectory_csv(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """(times, states) from a trajectory CSV"""
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"trajectory file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise DataIOError(f"trajectory file {path} is malformed: {e}")
    return data[:, 0], data[:, 1:]


def write_trajectory_jsonl(path: Path, states, h: float, t0: float = 0.0) -> Path:
    states = as_real(states)
    path = _ensure_parent(path)
    try:
        with path.open("w") as f:
            for k, y in enumerate(states):
                f.write(json.dumps({"t": t0 + h * k, "y": y.tolist()}) + "\n")
    except OSError as e:
        raise DataIOError(f"could not write {path}: {e}")
    return path


def read_trajectory_jsonl(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"trajectory file not found: {path}")
    try:
        rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    except json.JSONDecodeError as e:
        raise DataIOError(f"trajectory file {path} is malformed: {e}")
    return np.array([r["t"] for r in rows]), np.array([r["y"] for r in rows], dtype=float)


def write_trajectory(path: Path, states, h: float, t0: float = 0.0) -> Path:
    """Dispatch on suffix: .csv or .jsonl"""
    if Path(path).suffix == ".jsonl":
        return write_trajectory_jsonl(path, states, h, t0)
    return write_trajectory_csv(path, states, h, t0)


def read_trajectory(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    if Path(path).suffix == ".jsonl":
        return read_trajectory_jsonl(path)
    return read_trajectory_csv(path)


def frame_to_bytes(frame) -> np.ndarray:
    """[0, 1] floats to 8-bit grey levels"""
    return np.clip(np.rint(as_real(frame) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path: Path, frame) -> Path:
    """Binary PGM (P5, maxval 255)"""
    path = _ensure_parent(path)
    try:
        Image.fromarray(frame_to_bytes(frame)).save(path, format="PPM")
    except OSError as e:
        raise DataIOError(f"could not write {path}: {e}")
    return path


def read_pgm(path: Path) -> np.ndarray:
    """Frame values scaled back to [0, 1]"""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=float) / 255.0
    except FileNotFoundError:
        raise DataIOError(f"frame not found: {path}")
    except OSError as e:
        raise DataIOError(f"frame {path} is unreadable: {e}")


def write_frames(directory: Path, frames, prefix: str, dt: float) -> List[str]:
    """One PGM per frame; returns the file names in order"""
    directory = Path(directory)
    names = []
    for k, frame in enumerate(frames):
        name = f"{prefix}_{k:05d}.pgm"
        write_pgm(directory / name, frame)
        names.append(name)
    logger.debug(f"Wrote {len(names)} {prefix} frames to {directory} (dt={dt})")
    return names


def read_frames(directory: Path, names: Iterable[str]) -> np.ndarray:
    return np.stack([read_pgm(Path(directory) / n) for n in names])


def write_json(path: Path, payload: Any) -> Path:
    path = _ensure_parent(path)
    try:
        path.write_text(json.dumps(payload, indent=2, default=str))
    except OSError as e:
        raise DataIOError(f"could not write {path}: {e}")
    return path


def read_json(path: Path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataIOError(f"file not found: {path}")
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"{path} is not readable JSON: {e}")


def write_loss_csv(path: Path, losses) -> Path:
    """CSV ``iter,loss`` from LossPoint records"""
    path = _ensure_parent(path)
    try:
        with path.open("w") as f:
            f.write("iter,loss\n")
            for point in losses:
                f.write(f"{point.iteration},{point.loss:.17g}\n")
    except OSError as e:
        raise DataIOError(f"could not write {path}: {e}")
    return path
