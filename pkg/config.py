from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="ROSEN_", extra="ignore")

    # Arithmetic settings
    precision: int = Field(default=128, ge=64)

    # Simulation settings
    seed: int = 20240101
    shards: int = Field(default=8, ge=1)
    walkers: int = Field(default=1024, ge=1)
    burn_in: int = Field(default=1000, ge=0)

    # Histogram settings
    histogram_grid: int = Field(default=200, ge=1)
    oversampling: int = Field(default=16, ge=1)
    equidistribution_sigma: float = 4.0

    # Output settings
    export_dir: str = "exports"

    # Logging settings
    log_file: str = "rosen.log"
    log_level: str = "INFO"


settings = Settings()
