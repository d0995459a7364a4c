"""
Entry point: run with:  python -m block_canon <command> ...

LEARNING (Python):
  The __main__.py file makes a package runnable with `python -m <package>`.
  sys.exit(main()) turns the returned integer into the process exit code.
"""

import logging
import sys

from .cli import main

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
    stream=sys.stderr,
)


if __name__ == "__main__":
    sys.exit(main())
