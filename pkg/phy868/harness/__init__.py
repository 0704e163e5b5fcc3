"""Loopback experiments, metrics, I/Q files and the command line."""
