"""
quadflow Configuration Package

Centralized, validated settings for the interpolation engine.
"""

from .central_config import (
    QuadFlowConfig,
    ConfigurationManager,
    get_config,
    reload_config,
    ConfigurationError
)

from .config_validator import (
    ValidationResult,
    ConfigValidator,
    validate_configuration
)


# Public API
__all__ = [
    # Core configuration
    'QuadFlowConfig',
    'ConfigurationManager',
    'get_config',
    'reload_config',
    'ConfigurationError',

    # Validation
    'ValidationResult',
    'ConfigValidator',
    'validate_configuration'
]
