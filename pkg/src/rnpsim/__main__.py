"""Entry point for running as module: python -m rnpsim"""

import sys

from rnpsim.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
