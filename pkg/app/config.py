from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Reproducibility
    DEFAULT_SEED: int = 0

    # Finite-difference gradient checks
    GRADCHECK_STEP: float = 1e-5
    GRADCHECK_RTOL: float = 1e-4
    GRADCHECK_FLOOR: float = 1e-3

    # File format versions
    FLOPS_SCHEMA_VERSION: int = 1
    CHECKPOINT_FORMAT_VERSION: int = 1
    PROFILE_SCHEMA_VERSION: int = 1

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore"
    }

settings = Settings()
