from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Точность решателей
    SOLVER_TOL: float = 1e-12
    DENSE_SOLVER_LIMIT: int = 5000  # выше этого числа неизвестных работает CG
    CG_MAXITER_FACTOR: int = 20  # maxiter = factor * sqrt(unknowns)
    EIGEN_TOL: float = 1e-8
    EIGEN_MAXITER: int = 1000

    # Параллелизм и воспроизводимость
    THREADS: int = Field(default=1, ge=1)
    DETERMINISTIC: bool = False

    # Квадратуры ядра
    NEAR_FIELD_GAUSS_POINTS: int = Field(default=8, ge=4)
    TAIL_ANGLES: int = Field(default=2048, ge=64)
    TAIL_RADIUS_FACTOR: float = Field(default=8.0, gt=1.0)

    # Кэш весов ядра
    WEIGHTS_CACHE_DIR: str = ".cache/weights"
    WEIGHTS_CACHE_VERSION: str = "1"

    # Логирование и вывод
    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = "lab.log"
    OUTPUT_DIR: str = "out"

    @field_validator("LOG_LEVEL")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        return v.upper()

    @property
    def WEIGHTS_CACHE_ENABLED(self) -> bool:
        return bool(self.WEIGHTS_CACHE_DIR)

    @property
    def WEIGHTS_CACHE_PATH(self) -> Optional[Path]:
        if not self.WEIGHTS_CACHE_ENABLED:
            return None
        return Path(self.WEIGHTS_CACHE_DIR)

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


settings = Settings()
