import logging
from pathlib import Path
from typing import List

import numpy as np
from fastapi import APIRouter, HTTPException

from pnnflow.errors import PnnError
from pnnflow.experiments import rollout_dt
from pnnflow.models.checkpoint import Checkpoint, checkpoint_name, list_checkpoints, load_checkpoint
from pnnflow.models.schemas import EncodeRequest, EncodeResponse, ModelInfo, PredictRequest, PredictResponse
from pnnflow.nets.coupling import AutoencoderPair, InvertibleNet
from pnnflow.nets.pnn import predict
from pnnflow.settings import get_settings
from pnnflow.utils.cache import checkpoint_cache

logger = logging.getLogger(__name__)

router = APIRouter()


def _find_checkpoint(name: str) -> Path:
    for path in list_checkpoints(get_settings().checkpoint_dir):
        if checkpoint_name(path) == name:
            return path
    raise HTTPException(status_code=404, detail=f"Model '{name}' not found")


def _load(name: str) -> Checkpoint:
    """Checkpoint from the cache; reloaded when the file changes on disk"""
    path = _find_checkpoint(name)
    try:
        return checkpoint_cache.get_or_load(f"ckpt:{path}", lambda: load_checkpoint(path), path.stat().st_mtime)
    except PnnError as e:
        logger.error(f"Failed to load checkpoint {path}: {e.message}")
        raise HTTPException(status_code=e.http_status, detail=e.message)


def _info(ckpt: Checkpoint) -> ModelInfo:
    model = ckpt.model
    t = model.transform
    if isinstance(t, AutoencoderPair):
        transform = "AE"
    elif isinstance(t, InvertibleNet):
        transform = t.kind
    else:
        transform = None
    return ModelInfo(
        name=ckpt.name,
        architecture=ckpt.summary.get("architecture") or model.architecture,
        ambient_dim=model.ambient_dim,
        latent_dim=model.latent_dim,
        recurrence=model.recurrence,
        transform=transform,
        core=getattr(model.core, "kind", None),
        parameters=model.params.size(),
        h=ckpt.h,
        system=ckpt.system,
        training=ckpt.summary,
    )


@router.get("/models", response_model=List[ModelInfo])
def get_all_models():
    """List every checkpoint under the checkpoint directory"""
    infos = []
    for path in list_checkpoints(get_settings().checkpoint_dir):
        try:
            infos.append(_info(_load(checkpoint_name(path))))
        except HTTPException as e:
            logger.warning(f"Skipping {path}: {e.detail}")
    return infos


@router.get("/models/{name}", response_model=ModelInfo)
def get_model(name: str):
    """Get one model's metadata"""
    return _info(_load(name))


@router.post("/models/{name}/predict", response_model=PredictResponse)
def predict_rollout(name: str, request: PredictRequest):
    """Roll the model forward from one state or a batch of states"""
    ckpt = _load(name)
    try:
        x0 = np.asarray(request.x0, dtype=float)
        states = predict(ckpt.model, x0, request.steps, emit_substeps=request.emit_substeps)
    except PnnError as e:
        raise HTTPException(status_code=e.http_status, detail=e.message)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=f"Invalid initial state: {e}")
    return PredictResponse(
        name=name,
        steps=request.steps,
        dt=rollout_dt(ckpt, request.emit_substeps),
        states=states.tolist(),
    )


@router.post("/models/{name}/encode", response_model=EncodeResponse)
def encode_states(name: str, request: EncodeRequest):
    """Latent coordinates theta(x)"""
    ckpt = _load(name)
    try:
        z = ckpt.model.latent(np.asarray(request.x, dtype=float))
    except PnnError as e:
        raise HTTPException(status_code=e.http_status, detail=e.message)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=f"Invalid state: {e}")
    return EncodeResponse(name=name, latent=z.tolist())


@router.get("/cache/stats")
def get_cache_stats():
    """Checkpoint cache statistics"""
    return checkpoint_cache.stats()


@router.delete("/cache")
def clear_cache():
    """Drop every cached checkpoint"""
    checkpoint_cache.clear()
    return {"message": "Cache cleared"}
