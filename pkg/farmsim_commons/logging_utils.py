import logging
import os
import time
import traceback
from contextlib import contextmanager
from typing import Iterator

LOG_FORMAT = "%(asctime)s [%(levelname)s]  %(message)s"


class DefaultAttributesFilter(logging.Filter):
    def __init__(self, attributes: dict) -> None:
        super().__init__()
        self._default_attrs = attributes

    def filter(self, record: logging.LogRecord) -> bool:
        for k, v in self._default_attrs.items():
            if not hasattr(record, k):
                setattr(record, k, v)
        return True


def resolve_level(verbosity: int = 0) -> int:
    """-v gives DEBUG, FARMSIM_LOGLEVEL overrides the INFO default otherwise."""
    if verbosity > 0:
        return logging.DEBUG
    name = os.environ.get("FARMSIM_LOGLEVEL", "INFO").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def setup_script_logging(component_name: str, logfile: str | None = None, verbosity: int = 0) -> None:
    level = resolve_level(verbosity)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.root.setLevel(level)
    logging.root.addFilter(DefaultAttributesFilter({"event.source": component_name}))

    if logfile is not None:
        fh = logging.FileHandler(logfile)
        fh.setLevel(level)
        fh.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.root.addHandler(fh)

    add_ecs_logging(level)


def add_ecs_logging(level: int = logging.INFO) -> None:
    ecs_logfile = os.environ.get("FARMSIM_ECS_LOGFILE", None)
    if ecs_logfile:
        import ecs_logging

        fh = logging.FileHandler(ecs_logfile)
        fh.setLevel(level)
        fh.setFormatter(ecs_logging.StdlibFormatter())
        logging.root.addHandler(fh)


def log_exception(logger: logging.Logger, e: BaseException, errormessage: str = "{}: {}") -> None:
    """
    Log an error with its stacktrace.
    :param logger:
    :param e:
    :param errormessage: Format string with 2 parameters: exception class name and exception message (if given)
    """
    msg = errormessage.format(e.__class__.__name__, e.args[0] if len(e.args) >= 1 else "")
    logger.error(msg)
    logger.debug("".join(traceback.format_exception(type(e), e, e.__traceback__)))


@contextmanager
def log_duration(logger: logging.Logger, message: str, level: int = logging.INFO) -> Iterator[None]:
    """
    Log the wall time of the enclosed block.
    :param message: Format string with 1 parameter (execution time in seconds as float)
    """
    t = time.time()
    yield
    logger.log(level, message.format(time.time() - t))
