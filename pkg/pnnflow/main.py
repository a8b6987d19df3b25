import logging
from contextlib import asynccontextmanager

from dotenv import load_dotenv
from fastapi import FastAPI

from pnnflow import __version__
from pnnflow.models.checkpoint import list_checkpoints
from pnnflow.routers import api
from pnnflow.settings import get_settings
from pnnflow.utils.cache import checkpoint_cache

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    settings = get_settings()
    checkpoint_cache.ttl_seconds = settings.cache_ttl_seconds
    found = list_checkpoints(settings.checkpoint_dir)
    logger.info(f"Serving {len(found)} checkpoints from {settings.checkpoint_dir}")
    yield
    checkpoint_cache.clear()


app = FastAPI(
    title="pnnflow",
    description="Inference service for trained Poisson neural networks",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(api.router, prefix="/api/v1")


@app.get("/health")
def health_check():
    return {"status": "healthy"}


@app.get("/status")
def status():
    """Checkpoint directory and cache statistics"""
    settings = get_settings()
    return {
        "checkpoint_dir": str(settings.checkpoint_dir),
        "checkpoints": len(list_checkpoints(settings.checkpoint_dir)),
        "cache": checkpoint_cache.stats(),
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
