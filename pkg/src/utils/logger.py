import logging
import logging.handlers
from typing import Any, Mapping, Optional
from src.config.settings import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, EXIT_VIOLATIONS, LOG_DIR

# Ensure log directory exists
LOG_DIR.mkdir(parents=True, exist_ok=True)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(name: str, log_file: str, level=logging.INFO) -> logging.Logger:
    """Setup a logger with a weekly rotating file handler and a console handler"""

    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Re-import must not stack handlers
    if getattr(logger, '_wfsec_configured', False):
        return logger

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    # File handler, rotated weekly on Monday
    file_handler = logging.handlers.TimedRotatingFileHandler(
        log_file,
        when='W0',
        backupCount=4,
        encoding='utf-8'
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(level)

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(logging.WARNING)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    logger.propagate = False
    logger._wfsec_configured = True

    return logger


# Initialize loggers
error_logger = setup_logger('error', LOG_DIR / 'error.log', logging.ERROR)
user_logger = setup_logger('user', LOG_DIR / 'user.log', logging.INFO)
app_logger = setup_logger('app', LOG_DIR / 'app.log', logging.INFO)


def get_logger(name: str) -> logging.Logger:
    """Get a logger by name"""
    return logging.getLogger(name)


EXIT_NAMES = {
    EXIT_OK: 'ok',
    EXIT_ERROR: 'error',
    EXIT_VIOLATIONS: 'violations',
    EXIT_PARTIAL: 'partial',
}


def log_command(command: str, options: Optional[Mapping[str, Any]] = None):
    """One user.log line per invocation, unset options left out"""
    shown = ' '.join(f"{key}={value}" for key, value in sorted((options or {}).items())
                     if value is not None and value is not False)
    user_logger.info(f"command {command}: {shown}" if shown else f"command {command}")


def log_command_error(command: str, error: Exception):
    error_logger.error(f"command {command} failed: {type(error).__name__}: {error}", exc_info=True)


def log_command_status(command: str, status: int):
    app_logger.info(f"command {command} finished with exit status {status} "
                    f"({EXIT_NAMES.get(status, 'unknown')})")
