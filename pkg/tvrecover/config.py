import os
import logging
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv

from tvrecover.errors import InvalidInputError

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RecoveryConfig:
    def __init__(self,
                 output_root: Optional[Union[str, Path]] = None,
                 log_level: Optional[str] = None,
                 default_n: Optional[int] = None,
                 seed: Optional[int] = None):
        """
        Initialize toolkit configuration.

        Explicit arguments win over environment variables, which win over
        the built-in defaults.
        """
        self.output_root = Path(output_root or os.getenv("RECOVER_OUTPUT_ROOT", "runs"))

        self.log_level = (log_level or os.getenv("RECOVER_LOG_LEVEL", "INFO")).upper()
        if self.log_level not in _LOG_LEVELS:
            raise InvalidInputError(f"RECOVER_LOG_LEVEL must be one of {_LOG_LEVELS}, got {self.log_level!r}")

        self.default_n = self._int_setting("RECOVER_DEFAULT_N", default_n, 64)
        if self.default_n < 2:
            raise InvalidInputError(f"RECOVER_DEFAULT_N must be at least 2, got {self.default_n}")

        self.seed = self._int_setting("RECOVER_SEED", seed, 0)
        if self.seed < 0:
            raise InvalidInputError(f"RECOVER_SEED must be non-negative, got {self.seed}")

    @staticmethod
    def _int_setting(name: str, explicit: Optional[int], default: int) -> int:
        if explicit is not None:
            return int(explicit)
        raw = os.getenv(name)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError as e:
            raise InvalidInputError(f"{name} must be an integer, got {raw!r}") from e

    def resolve_output(self, directory: Union[str, Path]) -> Path:
        """
        Resolve an output directory against the configured output root.

        Args:
            directory: Absolute path, or path relative to the output root

        Returns:
            Path: The resolved directory (not created)
        """
        path = Path(directory)
        if path.is_absolute():
            return path
        return self.output_root / path

    def to_dict(self):
        return {
            "output_root": str(self.output_root),
            "log_level": self.log_level,
            "default_n": self.default_n,
            "seed": self.seed,
        }
