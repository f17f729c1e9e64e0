import logging
import sys

LOG_FORMAT = '%(asctime)s level=%(levelname)s logger=%(name)s event=%(message)s'


class StderrHandler(logging.StreamHandler):
    """Writes to whatever `sys.stderr` is when a record is emitted."""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def configure_logging(level: str = 'INFO') -> None:
    """Send key=value formatted records from the package logger to stderr."""
    root = logging.getLogger('instantiation_net')
    root.setLevel(level.upper())
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    handler = StderrHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.propagate = False
