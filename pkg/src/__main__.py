# src/__main__.py

import asyncio
import logging
import sys

from src.app import run

if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(run(sys.argv[1:])))
    except KeyboardInterrupt:
        logging.info("Run interrupted.")
        sys.exit(130)
