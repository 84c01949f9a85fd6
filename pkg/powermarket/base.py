import inspect
import math
from functools import wraps
from typing import Any, Callable, List, Optional


class PowerMarketError(Exception):
    """Base exception class for simulator errors."""
    pass


class ConfigError(PowerMarketError):
    """Raised when a scenario or component configuration is invalid."""
    pass


class DataError(PowerMarketError):
    """Raised when input data (traces, prices, inferences) is malformed."""
    def __init__(self, message: str, details: Optional[List[Any]] = None):
        super().__init__(message)
        self.details = details or []


class DomainError(PowerMarketError):
    """Raised when a function is evaluated outside its domain."""
    pass


class FetchError(PowerMarketError):
    """Raised when downloading a price export fails."""
    def __init__(self, message: str, status_code: Optional[int] = None, response_body: Optional[str] = None):
        super().__init__(message)
        self.status_code = status_code
        self.response_body = response_body


class RateLimitError(FetchError):
    """Raised when the export server keeps rate limiting us."""
    pass


class SimulationError(PowerMarketError):
    """Raised when a module fails inside the tick loop."""
    def __init__(self, message: str, tick: int, timestamp: int):
        super().__init__(f"tick {tick} (t={timestamp}): {message}")
        self.tick = tick
        self.timestamp = timestamp


def _bound_arguments(func: Callable, args, kwargs) -> dict:
    bound = inspect.signature(func).bind(*args, **kwargs)
    bound.apply_defaults()
    return bound.arguments


def validate_fraction(*names: str):
    """Decorator to check that the named arguments lie in [0, 1]."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            arguments = _bound_arguments(func, args, kwargs)
            for name in names:
                value = arguments[name]
                if not isinstance(value, (int, float)) or math.isnan(value):
                    raise DomainError(f"{name} must be a number, got {value!r}")
                if value < 0.0 or value > 1.0:
                    raise DomainError(f"{name} must lie in [0, 1], got {value}")
            return func(*args, **kwargs)
        return wrapper
    return decorator


def validate_non_negative(*names: str):
    """Decorator to check that the named arguments are >= 0."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            arguments = _bound_arguments(func, args, kwargs)
            for name in names:
                value = arguments[name]
                if value is None:
                    continue
                if math.isnan(value) or value < 0:
                    raise DomainError(f"{name} must be non-negative, got {value}")
            return func(*args, **kwargs)
        return wrapper
    return decorator
