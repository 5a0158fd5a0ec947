import inspect
import os
import sys
from pathlib import Path

from loguru import logger

LOG_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "logs")
LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}"

_stderr_sink_id = None


def add_file_handler(name=None, log_dir=LOG_DIR):
    """
    Add a rotating file sink to the shared logger.
    If no name is provided, the name of the calling script will be used.

    Args:
        name (str, optional): The name of the log file, default to None
        log_dir (str, optional): The directory to save the log file, default to LOG_DIR

    Returns:
        int: The loguru sink id, usable with logger.remove()
    """
    if name is None:
        frame = inspect.stack()[1]
        name = Path(frame.filename).stem

    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, f"{name}.log")
    return logger.add(log_file, rotation="10 MB")


def set_verbosity(level="INFO"):
    """
    Replace the stderr sink with one filtered at `level`.

    Args:
        level (str): loguru level name, e.g. "DEBUG", "INFO", "WARNING"
    """
    global _stderr_sink_id
    if _stderr_sink_id is None:
        # Drop loguru's default handler (id 0) the first time through
        try:
            logger.remove(0)
        except ValueError:
            pass
    else:
        logger.remove(_stderr_sink_id)
    _stderr_sink_id = logger.add(sys.stderr, level=level, format=LOG_FORMAT)
