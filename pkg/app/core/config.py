from pydantic_settings import BaseSettings
from typing import List

class Settings(BaseSettings):
    PROJECT_NAME: str = "LRP Tariff API"
    API_V1_STR: str = "/api/v1"
    DEBUG: bool = False
    ALLOWED_ORIGINS: List[str] = ["*"]
    STORAGE_DIR: str = "./results"

    # Customer optimizer (Lagrangian bisection)
    BISECTION_MAX_ITER: int = 200
    BISECTION_LAMBDA_TOL: float = 1e-12  # $/kWh
    ENERGY_TOL: float = 1e-9  # kWh, scaled by max(1, |X|)

    # Dense simplex
    LP_TOL: float = 1e-9
    LP_MAX_ITER: int = 20000

    # Optimal-alpha defaults
    DEFAULT_ALPHA_SEED: float = 1e-13  # $/kWh^2
    DEFAULT_THETA: float = 10.0  # $/kWh^2

    # Feeder
    V_MIN_PU: float = 0.95
    BUILDING_POWER_FACTOR: float = 0.9
    VIOLATION_TOL_PU: float = 1e-9

    # Scenario runner; 1 keeps days sequential
    MAX_WORKERS: int = 1

    class Config:
        case_sensitive = True
        env_file = ".env"
        env_file_encoding = "utf-8"

settings = Settings()
