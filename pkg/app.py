"""
Window Mean-Payoff Analyzer
Command-line entry point: python app.py analyze --model corpus/two_bscc.mc --objective fixwmp --lmax 2
"""

import os
import sys

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
