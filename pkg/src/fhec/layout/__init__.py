"""Ciphertext packing: layout descriptors, propagation, and kernel lowering."""
