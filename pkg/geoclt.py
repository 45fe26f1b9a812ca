#!/usr/bin/env python3
"""
geoclt - Main entry point.

Runs the command line tool from a source checkout without installing it.
"""

import sys
import os

# Add the current directory to Python path to import the geoclt package
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from geoclt.cli import main

if __name__ == '__main__':
    sys.exit(main())
