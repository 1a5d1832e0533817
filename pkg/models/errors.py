from __future__ import annotations

from typing import Optional


class HighwayLMError(Exception):
    """Base error. `source` names the module that raised it."""

    def __init__(self, source: str, message: str):
        super().__init__(message)
        self.source = source
        self.message = message

    def __str__(self) -> str:
        return f'{self.source}: {self.message}'


class ContractViolation(HighwayLMError, ValueError):
    """Bad shapes, ids, wiring, configuration or data."""


class NumericalFailure(HighwayLMError, ArithmeticError):
    """NaN/Inf showed up where finite numbers are required."""

    def __init__(self, source: str, message: str, tensor: Optional[str] = None):
        super().__init__(source, message)
        self.tensor = tensor
