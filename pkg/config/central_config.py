"""
quadflow - Centralized Configuration Manager

This module provides centralized configuration for the interpolation engine.
Every hyperparameter of the pipeline (splatting, filtering, flow estimation,
feature tracking) lives here with its default, and can be overridden through
environment variables, .env files or command-line flags.
"""

import os
from pathlib import Path
from typing import Dict, Optional, Any, List
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
import logging

logger = logging.getLogger(__name__)


class ConfigurationError(Exception):
    """Raised when configuration loading or validation fails"""
    pass


class QuadFlowConfig(BaseSettings):
    """
    Centralized configuration for the interpolation engine.

    Configuration hierarchy (highest to lowest priority):
    1. Command-line flags (applied with ``with_overrides``)
    2. Environment variables (``QUADFLOW_`` prefix)
    3. Environment-specific .env file (.env.development, .env.production)
    4. Master .env file (project root)
    5. Default values
    """

    model_config = SettingsConfigDict(
        env_prefix="QUADFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # =============================================================================
    # Environment Configuration
    # =============================================================================
    environment: str = Field(default="development", description="Runtime environment")

    # =============================================================================
    # Motion Model & Flow Source
    # =============================================================================
    model: str = Field(default="quadratic", description="Motion model: quadratic or linear")
    flows: str = Field(
        default="estimate",
        description="'estimate' for the built-in estimator, or a .flo path template with {src} and {dst}",
    )

    # =============================================================================
    # Flow Reversal
    # =============================================================================
    reversal: str = Field(default="splat", description="Backward flow: splat or naive (per-pixel blend)")
    sigma: float = Field(default=1.0, description="Gaussian standard deviation of splat weights (px)")
    radius: int = Field(default=1, description="Chebyshev splat radius around a landing point (px)")

    # =============================================================================
    # Flow Filtering
    # =============================================================================
    filtering: str = Field(default="medoid", description="Backward flow cleanup: medoid or off")
    filter_radius: int = Field(default=2, description="Medoid filter support radius k_f (px)")
    filter_threshold: float = Field(default=2.0, description="Outlier threshold tau (px)")

    # =============================================================================
    # Horn-Schunck Estimator
    # =============================================================================
    hs_levels: int = Field(default=3, description="Pyramid levels")
    hs_alpha: float = Field(default=10.0, description="Smoothness weight on 8-bit intensities")
    hs_iterations: int = Field(default=100, description="Jacobi iterations per level")

    # =============================================================================
    # Feature Tracking & Corners
    # =============================================================================
    lk_levels: int = Field(default=3, description="Lucas-Kanade pyramid levels")
    lk_window: int = Field(default=21, description="Lucas-Kanade window size (px)")
    lk_iterations: int = Field(default=30, description="Lucas-Kanade iteration cap")
    lk_epsilon: float = Field(default=0.01, description="Lucas-Kanade convergence threshold (px)")
    corner_max_points: int = Field(default=500, description="Maximum corners per frame")
    corner_quality: float = Field(default=0.01, description="Corner score relative to the strongest")
    corner_min_distance: float = Field(default=8.0, description="Non-max suppression distance (px)")

    # =============================================================================
    # Synthetic Scenes
    # =============================================================================
    supersample: int = Field(default=4, description="Default antialias supersampling factor")

    # =============================================================================
    # Runtime & Observability
    # =============================================================================
    threads: int = Field(default=1, description="Worker threads for independent t-values")
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(default="console", description="Log format: console or json")

    # =============================================================================
    # Computed Properties
    # =============================================================================
    @property
    def uses_estimator(self) -> bool:
        """True when flows come from the built-in estimator"""
        return self.flows == "estimate"

    @property
    def lk_max_level(self) -> int:
        """Zero-based top pyramid level as OpenCV counts it"""
        return self.lk_levels - 1

    # =============================================================================
    # Validators
    # =============================================================================
    @field_validator('environment')
    @classmethod
    def validate_environment(cls, v):
        allowed = ['development', 'testing', 'production']
        if v not in allowed:
            raise ValueError(f'Environment must be one of {allowed}')
        return v

    @field_validator('model')
    @classmethod
    def validate_model(cls, v):
        allowed = ['quadratic', 'linear']
        if v.lower() not in allowed:
            raise ValueError(f'Model must be one of {allowed}')
        return v.lower()

    @field_validator('reversal')
    @classmethod
    def validate_reversal(cls, v):
        allowed = ['splat', 'naive']
        if v.lower() not in allowed:
            raise ValueError(f'Reversal must be one of {allowed}')
        return v.lower()

    @field_validator('filtering')
    @classmethod
    def validate_filtering(cls, v):
        allowed = ['medoid', 'off']
        if v.lower() not in allowed:
            raise ValueError(f'Filtering must be one of {allowed}')
        return v.lower()

    @field_validator('flows')
    @classmethod
    def validate_flows(cls, v):
        if v != "estimate" and ("{src}" not in v or "{dst}" not in v):
            raise ValueError("Flow template must contain both {src} and {dst} placeholders")
        return v

    @field_validator('sigma', 'hs_alpha', 'lk_epsilon')
    @classmethod
    def validate_positive_float(cls, v):
        if not v > 0:
            raise ValueError('Value must be positive')
        return v

    @field_validator('radius', 'hs_levels', 'hs_iterations', 'lk_levels', 'lk_iterations',
                     'supersample', 'threads')
    @classmethod
    def validate_positive_int(cls, v):
        if v < 1:
            raise ValueError('Value must be at least 1')
        return v

    @field_validator('filter_radius')
    @classmethod
    def validate_filter_radius(cls, v):
        if not 1 <= v <= 10:
            raise ValueError('Filter radius must be between 1 and 10')
        return v

    @field_validator('filter_threshold', 'corner_min_distance')
    @classmethod
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError('Value must be non-negative')
        return v

    @field_validator('corner_quality')
    @classmethod
    def validate_corner_quality(cls, v):
        if not 0.0 < v <= 1.0:
            raise ValueError('Corner quality must be in (0, 1]')
        return v

    @field_validator('lk_window')
    @classmethod
    def validate_lk_window(cls, v):
        if v < 3 or v % 2 == 0:
            raise ValueError('Lucas-Kanade window must be an odd size of at least 3')
        return v

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v):
        allowed = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in allowed:
            raise ValueError(f'Log level must be one of {allowed}')
        return v.upper()

    @field_validator('log_format')
    @classmethod
    def validate_log_format(cls, v):
        allowed = ['console', 'json']
        if v.lower() not in allowed:
            raise ValueError(f'Log format must be one of {allowed}')
        return v.lower()

    def stage_settings(self, stage: str) -> Dict[str, Any]:
        """Get the keyword arguments one pipeline stage consumes"""
        stage_configs = {
            'flow': {
                'levels': self.hs_levels,
                'alpha': self.hs_alpha,
                'iterations': self.hs_iterations,
            },
            'reversal': {
                'sigma': self.sigma,
                'radius': self.radius,
            },
            'filter': {
                'k_f': self.filter_radius,
                'tau': self.filter_threshold,
            },
            'corners': {
                'max_points': self.corner_max_points,
                'quality': self.corner_quality,
                'min_distance': self.corner_min_distance,
            },
            'tracking': {
                'levels': self.lk_levels,
                'window': self.lk_window,
                'iterations': self.lk_iterations,
                'epsilon': self.lk_epsilon,
            },
        }

        if stage not in stage_configs:
            raise ConfigurationError(f"Unknown stage: {stage}. Available: {list(stage_configs)}")
        return stage_configs[stage]

    def with_overrides(self, **overrides: Any) -> "QuadFlowConfig":
        """
        Return a validated copy with the given (non-None) fields replaced.

        Raises:
            ConfigurationError: If an override fails validation
        """
        updates = {k: v for k, v in overrides.items() if v is not None}
        if not updates:
            return self
        try:
            return QuadFlowConfig.model_validate({**self.model_dump(), **updates})
        except ValueError as e:
            raise ConfigurationError(str(e)) from e


class ConfigurationManager:
    """
    Manages configuration loading with environment-specific overrides.
    """

    def __init__(self, project_root: Optional[Path] = None):
        self.project_root = project_root or self._find_project_root()
        self._config: Optional[QuadFlowConfig] = None

    def _find_project_root(self) -> Path:
        """Find the project root directory"""
        current = Path(__file__).parent
        while current.parent != current:
            if (current / "requirements.txt").exists() or (current / ".git").exists():
                return current
            current = current.parent
        return Path.cwd()

    def env_files(self) -> List[str]:
        """
        Potential .env files, lowest priority first (pydantic-settings lets
        later files win).
        """
        files = []

        master_env = self.project_root / ".env"
        if master_env.exists():
            files.append(str(master_env))

        environment = os.getenv('QUADFLOW_ENVIRONMENT', 'development')
        env_specific = self.project_root / f".env.{environment}"
        if env_specific.exists():
            files.append(str(env_specific))

        return files

    def load_config(self) -> QuadFlowConfig:
        """
        Load configuration with hierarchical override support.

        Raises:
            ConfigurationError: If the environment or .env files hold invalid values
        """
        if self._config is not None:
            return self._config

        env_files = self.env_files()
        try:
            self._config = QuadFlowConfig(_env_file=env_files or None)
        except ValueError as e:
            logger.error(f"Failed to load configuration: {e}")
            raise ConfigurationError(f"Invalid configuration: {e}") from e

        logger.debug(f"Configuration loaded from {len(env_files)} env file(s)")
        return self._config

    def reload_config(self) -> QuadFlowConfig:
        """Reload configuration from files"""
        self._config = None
        return self.load_config()


# Global configuration manager instance
_config_manager = ConfigurationManager()


def get_config() -> QuadFlowConfig:
    """Get the global configuration instance"""
    return _config_manager.load_config()


def reload_config() -> QuadFlowConfig:
    """Reload the global configuration"""
    return _config_manager.reload_config()
