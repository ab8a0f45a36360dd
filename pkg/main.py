#!/usr/bin/env python3
"""
stepflow-lab
Main application entry point

A numerical laboratory for the step-flow model of vicinal surfaces and its
continuum limit
"""
import importlib.util
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

LOGGER = logging.getLogger("stepflow")


REQUIRED_MODULES = ("numpy", "scipy", "chardet")


def check_dependencies() -> bool:
    """Check that the numerical stack can be imported"""
    missing = [name for name in REQUIRED_MODULES if importlib.util.find_spec(name) is None]
    if missing:
        sys.stderr.write("Missing required dependencies: " + ", ".join(missing) + "\n"
                         "Install them with: pip install -r requirements.txt\n")
        return False
    return True


def setup_error_handling():
    """Setup global error handling"""
    def handle_exception(exc_type, exc_value, exc_traceback):
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return

        LOGGER.critical("An unexpected error occurred: %s: %s", exc_type.__name__, exc_value,
                        exc_info=(exc_type, exc_value, exc_traceback))

    sys.excepthook = handle_exception


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    # Check dependencies first
    if not check_dependencies():
        return 1

    # Setup error handling
    setup_error_handling()

    from cli.driver import run
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
