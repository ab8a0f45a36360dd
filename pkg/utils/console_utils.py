"""
Console utilities for stepflow-lab
Logging setup, progress reporting and the one-line run summary
"""
import json
import logging
import sys
from typing import Any, Callable, Dict, Optional, TextIO

from utils.file_utils import FileUtils

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ConsoleUtils:
    """Utility class for console output"""

    @staticmethod
    def configure_logging(verbose: bool = False, stream: Optional[TextIO] = None):
        """
        Configure the root logger once; logs go to stderr

        Args:
            verbose: DEBUG instead of WARNING
            stream: Alternative stream (default sys.stderr)
        """
        level = logging.DEBUG if verbose else logging.WARNING
        root = logging.getLogger()
        root.setLevel(level)
        for handler in list(root.handlers):
            if getattr(handler, "_stepflow", False):
                root.removeHandler(handler)
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._stepflow = True
        root.addHandler(handler)

    @staticmethod
    def progress_logger(name: str = "stepflow") -> Callable[[str, int], None]:
        """Progress callback(message, percentage) that logs at INFO"""
        logger = logging.getLogger(name)

        def progress_callback(message: str, percentage: int):
            logger.info("[%3d%%] %s", percentage, message)
        return progress_callback

    @staticmethod
    def summary_line(summary: Dict[str, Any]) -> str:
        """Compact JSON with sorted keys"""
        return json.dumps(FileUtils.jsonable(summary), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def print_summary(summary: Dict[str, Any], stream: Optional[TextIO] = None):
        """Print the one-line JSON summary to stdout"""
        print(ConsoleUtils.summary_line(summary), file=stream or sys.stdout)
