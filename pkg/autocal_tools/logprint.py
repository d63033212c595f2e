import os
import logging
from datetime import datetime
from rich.console import Console
from rich.logging import RichHandler

_default_logger = None


class LogPrint:
    def __init__(self, filename=None, log_dir=None, verbose=True):
        """
        Console printing with rich plus an optional plain log file.

        Args:
            filename (str): Log file. Takes precedence over log_dir.
            log_dir (str): If given (and no filename), logs go to log_dir/%y%m%d_%H%M.txt.
            verbose (bool): If False nothing is printed to the console, the file still gets everything.
        """
        if filename is None and log_dir is not None:
            now = datetime.now()
            filename = os.path.join(log_dir, f"{now.strftime('%y%m%d_%H%M')}.txt")
        if filename is not None and len(os.path.dirname(filename)) > 0:
            os.makedirs(os.path.dirname(filename), exist_ok=True)

        self.filename = filename
        self.verbose = verbose

        self.console = Console(quiet=not verbose)
        # one logger per instance, otherwise handlers pile up on the module logger
        self.logger = logging.getLogger(f"{__name__}.{id(self)}")
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        rich_handler = RichHandler(rich_tracebacks=True, console=self.console)
        rich_handler.setFormatter(logging.Formatter('%(message)s'))
        self.logger.addHandler(rich_handler)

        if self.filename is not None:
            file_handler = logging.FileHandler(self.filename, mode='w')
            file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
            self.logger.addHandler(file_handler)

    def _log_to_file(self, level, message):
        console_handlers = [h for h in self.logger.handlers if isinstance(h, RichHandler)]
        for h in console_handlers:
            self.logger.removeHandler(h)

        self.logger.log(level, message)

        for h in console_handlers:
            self.logger.addHandler(h)

    def print(self, message, color=None):
        if color:
            self.console.print(message, style=f"bold {color}")
        else:
            self.console.print(message)
        self._log_to_file(logging.INFO, message)

    def warning(self, message):
        self.console.print(message, style="bold yellow")
        self._log_to_file(logging.WARNING, message)

    def error(self, message):
        self.console.print(message, style="bold red")
        self._log_to_file(logging.ERROR, message)

    def close(self):
        for h in list(self.logger.handlers):
            h.close()
            self.logger.removeHandler(h)


def default_logger():
    """Shared quiet logger used when a caller does not pass one."""
    global _default_logger
    if _default_logger is None:
        _default_logger = LogPrint(verbose=False)
    return _default_logger


if __name__ == "__main__":
    logger = LogPrint(log_dir="logs")
    logger.print("white")
    logger.print("red", "red")
    logger.warning("careful")
