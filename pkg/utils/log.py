"""
Logging setup - rich-formatted records for the twingauge logger tree
"""

import logging

from rich.logging import RichHandler

LOGGER_NAME = "twingauge"


def setup_logging(verbose: bool = False) -> logging.Logger:
    """
    Attach a RichHandler to the package logger

    Library modules log through ``logging.getLogger(__name__)``; their
    records propagate to the ``core``, ``plugins`` and ``utils`` loggers,
    which are routed here as well.

    Args:
        verbose: Emit DEBUG records instead of WARNING and above

    Returns:
        The configured package logger
    """
    level = logging.DEBUG if verbose else logging.WARNING
    handler = RichHandler(show_path=False, markup=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))

    root = logging.getLogger(LOGGER_NAME)
    for name in (LOGGER_NAME, "core", "plugins", "utils"):
        logger = logging.getLogger(name)
        logger.setLevel(level)
        if not any(isinstance(h, RichHandler) for h in logger.handlers):
            logger.addHandler(handler)
        logger.propagate = False

    return root
