"""
Window Mean-Payoff Analyzer
Expected window mean-payoff values for Markov chains and MDPs, in exact arithmetic
"""

__version__ = "1.0.0"
__author__ = "Window Analysis Development Team"
