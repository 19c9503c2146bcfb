"""Exact modular/RNS/negacyclic arithmetic and a toy BGV scheme."""
