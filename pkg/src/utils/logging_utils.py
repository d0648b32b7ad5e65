"""
Root logger setup driven by config/settings.py.
"""

import logging

from config.settings import LOG_FILE, LOG_FORMAT, LOG_LEVEL


def configure_logging(level: str = None, log_file: str = None):
    """Configure the root logger once per process; later calls only adjust the level."""
    level = (level or LOG_LEVEL).upper()
    handlers = [logging.StreamHandler()]
    log_file = LOG_FILE if log_file is None else log_file
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers)
    logging.getLogger().setLevel(level)
