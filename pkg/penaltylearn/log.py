import sys
from typing import Callable

from loguru import logger

import penaltylearn.const

loggers: dict[Callable, int] = {}


def register_sink(cb: Callable, level: str = "DEBUG") -> None:
    global loggers
    if cb in loggers:
        return
    loggers[cb] = logger.add(cb, level=level, format="[{level}] {message}")


def unregister_sink(cb: Callable) -> None:
    global loggers
    logger.remove(loggers.pop(cb))


def setup_stderr(debug: bool = False) -> None:
    """Replace loguru's default handler with a single standard-error sink

    Args:
        debug (bool, optional): also show debug records. Defaults to False.
    """
    logger.remove()
    loggers.clear()
    loggers[sys.stderr.write] = logger.add(
        sys.stderr,
        level="DEBUG" if debug else "INFO",
        format=penaltylearn.const.LOG_DEFAULT_FORMAT,
    )
    return


def error(msg: str) -> None:
    logger.opt(depth=1).error(msg)


def warn(msg: str) -> None:
    logger.opt(depth=1).warning(msg)


def info(msg: str) -> None:
    logger.opt(depth=1).info(msg)


def ok(msg: str) -> None:
    logger.opt(depth=1).success(msg)


def dbg(msg: str) -> None:
    if penaltylearn.const.DEBUG:
        logger.opt(depth=1).debug(msg)


def exception(msg: str) -> None:
    """Error record of the exception being handled, with its traceback in debug mode"""
    logger.opt(depth=1, exception=penaltylearn.const.DEBUG).error(msg)
