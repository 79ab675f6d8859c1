"""
Exception hierarchy shared by the simulator, the trainers and the CLI.
The CLI maps these onto exit codes (2 for configuration/input problems,
3 for non-finite training).
"""

from typing import Any, Dict, Optional


class SpectrumError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SpectrumError):
    """Invalid or unsupported configuration (scenario, modulation order, config file)."""


class ContractViolation(SpectrumError):
    """A caller broke an operation pre-condition."""


class CapabilityError(SpectrumError):
    """The request exceeds what an operation can do (e.g. 2^N enumeration too large)."""


class CheckpointError(SpectrumError):
    """Checkpoint could not be read or does not match the configuration."""


class NonFiniteLossError(SpectrumError):
    """Training produced a NaN/inf loss."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"
