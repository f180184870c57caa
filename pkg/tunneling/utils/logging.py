import time
from functools import wraps
from typing import Any, Callable, TypeVar

import structlog

logger = structlog.get_logger()

F = TypeVar("F", bound=Callable[..., Any])


def log_computation(logger: Any = logger) -> Callable[[F], F]:
    """
    Decorator to log a numerical operation with structured logging.
    """

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapped_func(*args: Any, **kwargs: Any) -> Any:
            log = logger.bind(
                operation=func.__name__,
                module=func.__module__,
            )

            started = time.perf_counter()
            try:
                log.debug("computation_started")
                result = func(*args, **kwargs)
                log.info(
                    "computation_completed",
                    elapsed=round(time.perf_counter() - started, 6),
                )
                return result
            except Exception as e:
                log.error(
                    "computation_error",
                    error=str(e),
                    error_type=type(e).__name__,
                    details=getattr(e, "details", None),
                )
                raise

        return wrapped_func  # type: ignore[return-value]

    return decorator


def log_pipeline(logger: Any = logger) -> Callable[[F], F]:
    """
    Decorator to log an experiment pipeline; the run is the first argument.
    """

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapped_func(run: Any, *args: Any, **kwargs: Any) -> Any:
            log = logger.bind(
                pipeline=func.__name__,
                run_id=getattr(run, "run_id", None),
            )

            try:
                log.info("pipeline_started")
                result = func(run, *args, **kwargs)
                log.info("pipeline_completed")
                return result
            except Exception as e:
                log.error(
                    "pipeline_error",
                    error=str(e),
                    error_type=type(e).__name__,
                )
                raise

        return wrapped_func  # type: ignore[return-value]

    return decorator
