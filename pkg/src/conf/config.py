from typing import Any
import os
from pathlib import Path
from pydantic import ConfigDict, field_validator
from pydantic_settings import BaseSettings

path = Path(__file__)
ROOT_DIR = path.parent.absolute()
config_path = os.path.join(ROOT_DIR, "../../.env")


class Settings(BaseSettings):
    # ideal certificates
    CERT_TOL: float = 1e-9
    RANK_RCOND: float = 1e-10
    CHOP_TOL: float = 1e-13
    K_CAP: int = 20

    # system files
    MAX_DEGREE: int = 64

    # perturbation bound
    F_COND_LIMIT: float = 1e8
    C_GRID_PER_AXIS: int = 32

    # multistart Newton
    GRID_PER_AXIS: int = 16
    RANDOM_STARTS: int = 64
    SEED: int = 0
    NEWTON_MAX_ITER: int = 100
    ARMIJO_C: float = 1e-4
    ROOT_TOL: float = 1e-10
    MULTIPLE_ROOT_TOL: float = 1e-8
    DEDUP_RADIUS: float = 1e-6
    CLUSTER_RADIUS: float = 1e-4
    SINGULAR_TOL: float = 1e-6
    MAX_DEFLATIONS: int = 3
    DEFLATION_RANK_TOL: float = 1e-6

    # path tracking
    INITIAL_STEP_FRACTION: float = 0.01
    STEP_FLOOR: float = 1e-12
    CORRECTOR_TOL: float = 1e-11
    CORRECTOR_MAX_ITER: int = 20
    COND_LIMIT: float = 1e12
    RESAMPLE_POINTS: int = 101

    # splitting
    PROBE_MAGNITUDES: tuple[float, ...] = (1e-2, 1e-3)
    PROBE_SEEDS: int = 4
    PROBE_RADIUS: float = 0.3
    PROBE_GRID: int = 8
    ASSIGN_RADIUS: float = 1.0
    SEARCH_RETRIES: int = 8
    KOV_SAMPLES: int = 10000

    LOG_LEVEL: str = "INFO"

    @field_validator(
        "CERT_TOL", "RANK_RCOND", "ROOT_TOL", "MULTIPLE_ROOT_TOL", "DEDUP_RADIUS",
        "CLUSTER_RADIUS", "SINGULAR_TOL", "DEFLATION_RANK_TOL", "STEP_FLOOR", "CORRECTOR_TOL", "COND_LIMIT",
        "PROBE_RADIUS", "ASSIGN_RADIUS",
    )
    @classmethod
    def validate_positive(cls, v: Any):
        if v <= 0:
            raise ValueError("Tolerances must be positive")
        return v

    @field_validator("GRID_PER_AXIS", "C_GRID_PER_AXIS", "PROBE_GRID", "K_CAP", "MAX_DEGREE")
    @classmethod
    def validate_count(cls, v: Any):
        if v < 1:
            raise ValueError("Counts must be at least 1")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: Any):
        if v not in ["DEBUG", "INFO", "WARNING", "ERROR"]:
            raise ValueError("LOG_LEVEL must be DEBUG, INFO, WARNING or ERROR")
        return v

    model_config = ConfigDict(
        extra="ignore", env_file=config_path, env_file_encoding="utf-8" # noqa
    )


config = Settings()


def with_overrides(cfg: Settings, **updates: Any) -> Settings:
    """
    Validated copy of ``cfg`` with the non-``None`` values of ``updates``.
    """
    updates = {k: v for k, v in updates.items() if v is not None}
    if not updates:
        return cfg
    return Settings.model_validate({**cfg.model_dump(), **updates})
