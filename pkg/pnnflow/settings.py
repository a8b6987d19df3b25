"""
Environment-driven settings and logging setup
"""
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file if not already loaded
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_path(name: str, default: str) -> Path:
    return Path(os.getenv(name, default))


@dataclass
class Settings:
    """Runtime settings read from the environment"""

    output_root: Path = field(default_factory=lambda: _env_path("PNNFLOW_OUTPUT_ROOT", "runs"))
    checkpoint_dir: Path = field(default_factory=lambda: _env_path("PNNFLOW_CHECKPOINT_DIR", "runs/checkpoints"))
    log_level: str = field(default_factory=lambda: os.getenv("PNNFLOW_LOG_LEVEL", "INFO").upper())
    cache_ttl_seconds: int = field(default_factory=lambda: int(os.getenv("PNNFLOW_CACHE_TTL", "300")))

    def output_dir(self, name: str) -> Path:
        """Directory for one experiment under the output root"""
        return self.output_root / name


def get_settings() -> Settings:
    """Fresh settings snapshot (re-reads the environment)"""
    return Settings()


def configure_logging(level: str = None) -> None:
    """Install a single stream handler on the root logger"""
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT, force=True)
