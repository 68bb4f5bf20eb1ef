#!/usr/bin/env python3
"""
Configuration Validation

Cross-field checks of the interpolation settings. Field-level constraints are
enforced by the settings model itself; this module flags combinations that are
individually legal but contradictory or wasteful.
"""

import os
import sys
from typing import List, Optional
from dataclasses import dataclass, field

from .central_config import QuadFlowConfig, ConfigurationManager, ConfigurationError


# Landing points farther than this many sigmas from a pixel carry negligible weight
_SPLAT_SIGMA_SPAN = 4.0


@dataclass
class ValidationResult:
    """Result of configuration validation"""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __str__(self) -> str:
        """Human-readable validation summary"""
        status = "VALID" if self.is_valid else "INVALID"
        lines = [f"Configuration Validation: {status}"]

        if self.errors:
            lines.append(f"\nERRORS ({len(self.errors)}):")
            for error in self.errors:
                lines.append(f"  - {error}")

        if self.warnings:
            lines.append(f"\nWARNINGS ({len(self.warnings)}):")
            for warning in self.warnings:
                lines.append(f"  - {warning}")

        return "\n".join(lines)


class ConfigValidator:
    """Cross-field validator for interpolation settings"""

    def __init__(self, config: QuadFlowConfig):
        self.config = config

    def validate_all(self) -> ValidationResult:
        """Run every check and collect the findings"""
        errors: List[str] = []
        warnings: List[str] = []

        warnings.extend(self._analyze_splat_reach())
        warnings.extend(self._analyze_splat_footprint())
        warnings.extend(self._analyze_filter_support())
        warnings.extend(self._analyze_tracking())
        warnings.extend(self._analyze_threads())

        return ValidationResult(is_valid=not errors, errors=errors, warnings=warnings)

    def _analyze_splat_reach(self) -> List[str]:
        warnings = []
        if self.config.sigma * _SPLAT_SIGMA_SPAN < 0.5 and self.config.radius == 1:
            # exp(-d^2/sigma^2) falls below the hole threshold within half a pixel
            warnings.append(
                f"sigma={self.config.sigma} leaves most non-integer landing points as holes"
            )
        return warnings

    def _analyze_splat_footprint(self) -> List[str]:
        warnings = []
        if self.config.radius > _SPLAT_SIGMA_SPAN * self.config.sigma:
            warnings.append(
                f"radius={self.config.radius} reaches beyond {_SPLAT_SIGMA_SPAN:g} sigma; "
                "outer splat weights are negligible"
            )
        return warnings

    def _analyze_filter_support(self) -> List[str]:
        warnings = []
        if self.config.filter_threshold == 0:
            warnings.append("filter_threshold=0 replaces every pixel that differs from its medoid")
        if self.config.filter_radius > 5:
            warnings.append(
                f"filter_radius={self.config.filter_radius} is wide for a fixed medoid filter; "
                "motion boundaries will erode"
            )
        return warnings

    def _analyze_tracking(self) -> List[str]:
        warnings = []
        if self.config.corner_min_distance * 2 < self.config.lk_window / 4:
            warnings.append(
                "corner_min_distance is small relative to the tracking window; "
                "neighbouring tracks will share most of their support"
            )
        return warnings

    def _analyze_threads(self) -> List[str]:
        warnings = []
        cpus = os.cpu_count() or 1
        if self.config.threads > cpus:
            warnings.append(f"threads={self.config.threads} exceeds the {cpus} available CPUs")
        return warnings


def validate_configuration(config: Optional[QuadFlowConfig] = None) -> ValidationResult:
    """Convenience function to validate configuration"""
    if config is None:
        try:
            config = ConfigurationManager().load_config()
        except ConfigurationError as e:
            return ValidationResult(is_valid=False, errors=[str(e)])
    return ConfigValidator(config).validate_all()


if __name__ == "__main__":
    result = validate_configuration()
    print(result)
    sys.exit(0 if result.is_valid else 1)
