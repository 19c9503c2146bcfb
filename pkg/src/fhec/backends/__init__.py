"""Execution and emission backends for compiled modules."""
