"""Structured logging configuration using structlog."""

import logging
import sys
from typing import Any, Dict, Optional, TextIO

import structlog
from structlog.types import Processor


def configure_logging(
    log_level: str = "INFO",
    json_logs: bool = False,
    stream: Optional[TextIO] = None,
) -> None:
    """
    Configure structured logging for the toolkit.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        json_logs: Whether to output logs in JSON format
        stream: Output stream (defaults to stderr so stdout stays machine-readable)
    """
    logging.basicConfig(
        format="%(message)s",
        stream=stream or sys.stderr,
        level=getattr(logging, log_level.upper()),
        force=True,
    )

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
    ]

    if json_logs:
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a structured logger instance.

    Args:
        name: Logger name (typically __name__ of the module)

    Returns:
        Configured structlog logger
    """
    return structlog.get_logger(name)


def log_training_step(
    logger: structlog.stdlib.BoundLogger,
    step: int,
    loss: float,
    seconds: float,
    **kwargs: Any
) -> None:
    """
    Log one optimizer step.

    Args:
        logger: Structlog logger instance
        step: Step index (0-based)
        loss: Loss value of the step
        seconds: Wall time since training started
        **kwargs: Additional context
    """
    logger.info(
        "training_step",
        step=step,
        loss=loss,
        seconds=round(seconds, 3),
        **kwargs
    )


def log_checkpoint(
    logger: structlog.stdlib.BoundLogger,
    path: str,
    step: int,
    **kwargs: Any
) -> None:
    """
    Log a written checkpoint.

    Args:
        logger: Structlog logger instance
        path: Checkpoint path
        step: Number of completed steps stored in the checkpoint
        **kwargs: Additional context
    """
    logger.info("checkpoint_written", path=path, step=step, **kwargs)


def log_error(
    logger: structlog.stdlib.BoundLogger,
    error: Exception,
    context: Dict[str, Any],
) -> None:
    """
    Log an error with full context.

    Args:
        logger: Structlog logger instance
        error: Exception that occurred
        context: Additional context about the error
    """
    logger.error(
        "error_occurred",
        error_type=type(error).__name__,
        error_message=str(error),
        **context,
        exc_info=True
    )
