#!/usr/bin/env python3
"""
Directional Rho

Command-line entry point; the same commands are available as ``python -m dirrho``.
"""

import sys

from dirrho.cli import main

if __name__ == '__main__':
    sys.exit(main())
