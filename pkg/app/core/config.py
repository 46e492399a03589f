"""
Application configuration settings.

Manages environment variables, service settings and detector defaults
using Pydantic.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Union, List
from pydantic import field_validator

class Settings(BaseSettings):
    """Application settings."""

    # Application settings
    APP_NAME: str = "Clone Detector API"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Server settings
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # File handling settings
    MAX_FILE_SIZE: int = 20 * 1024 * 1024  # 20MB
    ALLOWED_EXTENSIONS: List[str] = [".png", ".bmp", ".jpg", ".jpeg"]

    # CORS settings
    CORS_ORIGINS: Union[str, List[str]] = ["*"]  # Override in production

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON_FORMAT: bool = True

    # Detector defaults (128x128 calibration)
    BLOCK_SIZE: int = 8
    S12: float = 2.0
    S34: float = 0.01
    WINDOW: int = 1
    TH1: int = 10
    TH1_METRIC: str = "chebyshev"
    TH2: int = 100
    SCALE_TH2: bool = True
    SE_SIZE: int = 3
    COARSE_STEPS: str = "8:0.2,12:0.2,16:0.2,16:1,24:1,16:1:50,24:1:50"
    COARSE_WINDOW: int = 10
    THREADS: int = 1
    METHOD: str = "dct"

    @field_validator('CORS_ORIGINS')
    @classmethod
    def parse_cors_origins(cls, v):
        if isinstance(v, str):
            if v == "*":
                return ["*"]
            # Split comma-separated values
            return [origin.strip() for origin in v.split(",")]
        return v

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)

# Global settings instance
settings = Settings()
