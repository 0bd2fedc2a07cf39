#!/usr/bin/env python3
"""
Entry point for the scheduling lab command line

Usage:
    python lab.py gen --tiles 8 --format dot --out results/cholesky_T8.dot
    python lab.py bench --tiles 8 --procs 4 --algo asap
    python lab.py train --tiles 4 --procs 4 --window 1 --seeds 5 --out results/T4_p4
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
