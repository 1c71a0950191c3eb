"""Memory-bandwidth regulation simulator: BwLock, MemGuard and an experiment harness."""

__version__ = "0.1.0"

from .engine import Engine, EngineConfig, ExternalLock, simulate  # noqa: E402,F401
from .memory import ContentionModel, allocate  # noqa: E402,F401
from .regulator import RegulatorConfig, lines_per_period  # noqa: E402,F401
