#!/usr/bin/env python3
"""CLI entry point for the certificate laboratory.

This is the command-line interface for the suite runner.
For library usage, import from the `run_suite` module or `carnot_lab.runner`.

Usage:
    python cli.py run <config.toml> [--suite a,b] [--out DIR] [--format json|csv|both]
                      [--seed N] [--jobs N]
    python cli.py sweep <config.toml> --param NAME --values v1,v2,...

Examples:
    python cli.py run configs/abelian-baseline.toml
    python cli.py run configs/heisenberg-default.toml --suite gradient_contraction,evi -v
    python cli.py sweep configs/abelian-baseline.toml --param shape --values 32,64,128
"""
import sys
import os

# Ensure carnot_lab is importable
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from run_suite import main


if __name__ == "__main__":
    sys.exit(main())
