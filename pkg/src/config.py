import yaml
import os
from pathlib import Path
from typing import Any, Dict
from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

PROJECT_ROOT = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    """Process-level knobs, read from COT_LAB_* environment variables or .env."""

    model_config = SettingsConfigDict(env_prefix="COT_LAB_", env_file=".env", extra="ignore")

    # Parallelism cap for per-cell LP fan-out
    threads: int = 1

    # Scaled residual tolerance used by certificate checks
    tolerance: float = 1e-9

    log_level: str = "INFO"

    # simplex (certified tableau engine) or highs (scipy oracle)
    solver_backend: str = "simplex"

    # tqdm bars on stderr for long fan-outs
    progress: bool = True


def load_config() -> Dict[str, Any]:
    """Load configuration from config.yaml"""
    config_path = Path("config.yaml")
    if not config_path.exists():
        config_path = PROJECT_ROOT / "config.yaml"
    if config_path.exists():
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}

        # Replace environment variables
        def replace_env_vars(obj):
            if isinstance(obj, dict):
                return {k: replace_env_vars(v) for k, v in obj.items()}
            elif isinstance(obj, list):
                return [replace_env_vars(item) for item in obj]
            elif isinstance(obj, str) and obj.startswith("${") and obj.endswith("}"):
                env_var = obj[2:-1]
                return os.getenv(env_var, "")
            return obj

        return replace_env_vars(config)

    return {}


def config_value(section: str, key: str, default: Any) -> Any:
    """Look up ``config[section][key]``, falling back when absent or blank."""
    value = config.get(section, {}).get(key, default)
    if value in ("", None):
        return default
    return type(default)(value) if default is not None else value


settings = Settings()
config = load_config()
