"""
JSON checkpoints: model parameters plus the config and metrics that produced them
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from pnnflow.errors import ConfigError, DataIOError, DimensionError
from pnnflow.nets.pnn import PnnModel, model_from_dict, model_to_dict

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pnnflow-checkpoint"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".ckpt.json"


@dataclass
class Checkpoint:
    model: PnnModel
    h: Optional[float] = None
    system: Optional[str] = None
    config: Optional[Dict[str, Any]] = None
    summary: Dict[str, Any] = field(default_factory=dict)
    report: Dict[str, Any] = field(default_factory=dict)
    path: Optional[Path] = None

    @property
    def name(self) -> str:
        if self.path is None:
            return "unsaved"
        return checkpoint_name(self.path)


def checkpoint_name(path: Path) -> str:
    name = Path(path).name
    return name[: -len(CHECKPOINT_SUFFIX)] if name.endswith(CHECKPOINT_SUFFIX) else Path(path).stem


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "h": checkpoint.h,
        "system": checkpoint.system,
        "config": checkpoint.config,
        "summary": checkpoint.summary,
        "report": checkpoint.report,
        "model": model_to_dict(checkpoint.model),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, default=str))
    except OSError as e:
        raise DataIOError(f"could not write checkpoint {path}: {e}")
    checkpoint.path = path
    logger.info(f"Saved checkpoint {path} ({checkpoint.model.params.size()} parameters)")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataIOError(f"checkpoint not found: {path}")
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"checkpoint {path} is unreadable: {e}")
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataIOError(f"{path} is not a pnnflow checkpoint")
    try:
        model = model_from_dict(payload["model"])
    except (KeyError, TypeError) as e:
        raise DataIOError(f"checkpoint {path} is missing model data: {e}")
    except (ConfigError, DimensionError) as e:
        raise DataIOError(f"checkpoint {path} describes an invalid model: {e.message}")
    return Checkpoint(
        model=model,
        h=payload.get("h"),
        system=payload.get("system"),
        config=payload.get("config"),
        summary=payload.get("summary") or {},
        report=payload.get("report") or {},
        path=path,
    )


def list_checkpoints(root: Path) -> List[Path]:
    """Checkpoint files below root, sorted by name"""
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(root.rglob(f"*{CHECKPOINT_SUFFIX}"), key=lambda p: checkpoint_name(p))
