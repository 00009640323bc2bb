#!/usr/bin/env python3
"""Monte-Carlo check of the variance-estimator convergence rate
(equivalent to `hetpbo rate-check`)."""

import sys

from hetpbo.cli import main

if __name__ == "__main__":
    sys.exit(main(["rate-check", *sys.argv[1:]]))
