"""
Exception hierarchy shared by the library, the CLI and the HTTP service.

Every error carries the process exit code used by the CLI and the HTTP
status used by the API router.
"""
from typing import Optional


class PnnError(Exception):
    """Base class for all pnnflow errors"""

    exit_code = 1
    http_status = 500

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(PnnError):
    """Invalid or inconsistent configuration"""

    exit_code = 2
    http_status = 422


class DimensionError(PnnError, ValueError):
    """Array shape does not match what a layer, model or metric expects"""

    exit_code = 2
    http_status = 422


class RenderError(PnnError):
    """A body left the viewport of the pixel renderer"""

    exit_code = 2
    http_status = 422


class DomainError(PnnError, ValueError):
    """State outside the admissible domain of a system"""

    exit_code = 2
    http_status = 422


class NumericError(PnnError):
    """Numerical failure: non-finite values or a diverging solver"""

    exit_code = 3
    http_status = 500


class NonFiniteError(NumericError):
    """Non-finite loss or gradient during training"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration


class IntegratorError(NumericError):
    """Implicit stage solve failed to converge"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class DataIOError(PnnError):
    """Missing or unreadable dataset / checkpoint file"""

    exit_code = 4
    http_status = 404
