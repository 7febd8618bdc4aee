"""Process-wide defaults, read from the environment (and a local .env file)."""
import os
from dataclasses import dataclass
from dotenv import load_dotenv
from src.utils.logger import get_logger

load_dotenv()

logger = get_logger(__name__)


def _env_float(key: str, default: float) -> float:
    raw = os.getenv(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric {key}={raw!r}, using {default}")
        return default


def _env_int(key: str, default: int) -> int:
    raw = os.getenv(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {key}={raw!r}, using {default}")
        return default


@dataclass(frozen=True)
class Settings:
    threads: int
    z_threshold: float
    drift_limit: float
    output_dir: str


settings = Settings(
    threads=max(1, _env_int("GMC_THREADS", 1)),
    z_threshold=_env_float("GMC_Z_THRESHOLD", 3.0),
    drift_limit=_env_float("GMC_DRIFT_LIMIT", 1e-4),
    output_dir=os.getenv("GMC_OUTPUT_DIR", "output"),
)

logger.debug(f"Settings loaded: {settings}")
