# logger_setup.py

import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional

from settings import ENABLE_DEBUG_LOGGING, LOG_BACKUP_COUNT, LOG_FILE_NAME, LOG_MAX_BYTES

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
# Loggers that emit one line per slot or per update.
CHATTY_LOGGERS = ("env", "rl.agents")


def _console(formatter: logging.Formatter) -> logging.Handler:
    handler = logging.StreamHandler()
    handler.setFormatter(formatter)
    return handler


def setup_logging(log_dir: str, debug: bool = False) -> Optional[str]:
    """Route the root logger to <log_dir>/hmappo.log and the console.

    Returns an error message when the log file cannot be opened; console
    logging still works in that case.
    """
    verbose = ENABLE_DEBUG_LOGGING or debug
    formatter = logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    for name in CHATTY_LOGGERS:
        logging.getLogger(name).setLevel(logging.DEBUG if verbose else logging.INFO)

    root.addHandler(_console(formatter))
    log_file = os.path.join(log_dir, LOG_FILE_NAME)
    try:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(log_file, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUP_COUNT,
                                           encoding='utf-8')
    except OSError as e:
        return f"Could not create log file {log_file} ({e}); logging to the console only for this run."

    file_handler.setFormatter(formatter)
    root.addHandler(file_handler)
    root.info("Logging to %s at level %s", log_file, logging.getLevelName(root.level))
    return None
