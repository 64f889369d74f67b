#!/usr/bin/env python3
"""
Command-line experiments for the rate adaptation model.

Usage:
    python experiment.py analyze --scheme olra,olra-es --n-range 1..10
    python experiment.py simulate --scheme clra --n-range 1..4 --seed 7
    python experiment.py compare --p-ack 1,0.7,0.5
"""

import sys

from rateadapt.cli import main

if __name__ == "__main__":
    sys.exit(main())
