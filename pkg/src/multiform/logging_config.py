import logging
import os
import time
import uuid
from contextlib import contextmanager
from functools import wraps
from logging.handlers import RotatingFileHandler

from multiform.config import load_config

LOG_FORMAT = '[%(levelname)s] [%(asctime)s] %(name)s - %(message)s [%(filename)s:%(lineno)d]'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def generate_operation_id():
    """
    Generate a unique operation ID using UUID4.

    Returns:
        str: A unique operation ID in string format
    """
    return str(uuid.uuid4())


def setup_logging(logger_name, log_file=None):
    """
    Setup logging configuration.

    Handlers are attached only the first time a logger name is configured.

    Args:
        logger_name (str): Name of the logger
        log_file (str, optional): Custom log file path

    Returns:
        logging.Logger: Configured logger instance
    """
    config = load_config()
    logger = logging.getLogger(logger_name)
    logger.setLevel(getattr(logging, config.log_level))
    if logger.handlers:
        return logger

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if log_file is None:
        os.makedirs(config.log_dir, exist_ok=True)
        log_file = os.path.join(config.log_dir, "multiform.log")
    else:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)

    file_handler = RotatingFileHandler(log_file, maxBytes=10 * 1024 * 1024, backupCount=5)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger


def log_execution_time(logger):
    """Decorator to log function execution time"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                logger.debug(
                    "Function '%s' executed in %.4f seconds",
                    func.__name__, time.perf_counter() - start_time
                )
                return result
            except Exception as e:
                logger.error(
                    "Function '%s' failed after %.4f seconds - Error: %s",
                    func.__name__, time.perf_counter() - start_time, str(e),
                    exc_info=True
                )
                raise
        return wrapper
    return decorator


@contextmanager
def log_context(logger, operation, **context):
    """Context manager for operation logging with context"""
    op_id = context.pop('operation_id', None) or generate_operation_id()
    logger.info("Starting %s [OperationID: %s]", operation, op_id)
    if context:
        logger.debug("Context: %s [OperationID: %s]", context, op_id)

    try:
        yield op_id
        logger.info("Completed %s [OperationID: %s]", operation, op_id)
    except Exception as e:
        logger.error(
            "Failed %s [OperationID: %s] - Error: %s",
            operation, op_id, str(e)
        )
        raise
