"""
Pixel observations of the two-body problem: bright discs on a black frame
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from pnnflow.errors import DimensionError, RenderError
from pnnflow.nets.numcore import as_real

logger = logging.getLogger(__name__)

# (x_min, x_max, y_min, y_max) in world coordinates
DEFAULT_VIEWPORT = (-2.0, 2.0, -1.0, 1.0)


@dataclass
class PixelMovie:
    """Frames of shape (T, height, width) with values in [0, 1]"""

    frames: np.ndarray
    dt: float
    states: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = as_real(self.frames)
        if self.frames.ndim != 3:
            raise DimensionError(f"frames must have shape (T, height, width), got {self.frames.shape}")
        if self.states is not None and len(self.states) != len(self.frames):
            raise DimensionError(f"{len(self.frames)} frames but {len(self.states)} states")

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __len__(self) -> int:
        return self.frames.shape[0]


def _to_pixels(xy: np.ndarray, width: int, height: int, viewport) -> np.ndarray:
    x_min, x_max, y_min, y_max = viewport
    px = (xy[..., 0] - x_min) / (x_max - x_min) * width
    py = (y_max - xy[..., 1]) / (y_max - y_min) * height
    return np.stack([px, py], axis=-1)


def render_two_body(
    positions,
    width: int = 100,
    height: int = 50,
    radius: float = 4.0,
    viewport: Tuple[float, float, float, float] = DEFAULT_VIEWPORT,
    dt: float = 1.0,
    states: Optional[np.ndarray] = None,
) -> PixelMovie:
    """Draw every body as an antialiased disc of value 1.0.

    ``positions`` has shape (T, bodies, 2) in world coordinates. A body
    whose disc leaves the frame raises RenderError.
    """
    pos = as_real(positions)
    if pos.ndim != 3 or pos.shape[2] != 2:
        raise DimensionError(f"positions must have shape (T, bodies, 2), got {pos.shape}")
    if width < 1 or height < 1 or radius <= 0:
        raise RenderError(f"invalid frame geometry {width}x{height}, radius {radius}")
    centers = _to_pixels(pos, width, height, viewport)
    outside = (
        (centers[..., 0] - radius < 0)
        | (centers[..., 0] + radius > width)
        | (centers[..., 1] - radius < 0)
        | (centers[..., 1] + radius > height)
    )
    if np.any(outside):
        frame_idx = int(np.argwhere(outside)[0][0])
        raise RenderError(f"a body leaves the viewport in frame {frame_idx}")
    cols = np.arange(width) + 0.5
    rows = np.arange(height) + 0.5
    frames = np.zeros((pos.shape[0], height, width))
    for t in range(pos.shape[0]):
        for cx, cy in centers[t]:
            dist = np.hypot(cols[None, :] - cx, rows[:, None] - cy)
            frames[t] = np.maximum(frames[t], np.clip(radius + 0.5 - dist, 0.0, 1.0))
    logger.debug(f"Rendered {pos.shape[0]} frames of {width}x{height} with {pos.shape[1]} bodies")
    meta = {"width": width, "height": height, "radius": radius, "viewport": list(viewport)}
    return PixelMovie(frames=frames, dt=dt, states=states, meta=meta)


def flatten_movie(movie: PixelMovie) -> np.ndarray:
    """(T, height * width) samples, one row per frame"""
    return movie.frames.reshape(len(movie), -1)


def unflatten_movie(samples, height: int, width: int) -> np.ndarray:
    samples = as_real(samples)
    if samples.shape[-1] != height * width:
        raise DimensionError(f"samples of width {samples.shape[-1]} do not form {height}x{width} frames")
    return samples.reshape(samples.shape[:-1] + (height, width))
