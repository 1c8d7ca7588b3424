# Configuration package for the Window Mean-Payoff Analyzer
