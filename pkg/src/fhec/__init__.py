"""fhec: a compiler from high-level tensor programs to BGV homomorphic encryption.

The package lowers integer tensor programs through a sequence of rewrites --
secrecy tracking, loop normalization, ciphertext packing and layout selection,
polynomial approximation of non-arithmetic ops, ciphertext-maintenance
insertion, and parameter selection -- and can run the result on an exact
plaintext interpreter, on a self-contained RLWE/BGV implementation, or emit it
as OpenFHE-style pseudocode.
"""

__version__ = "0.1.0"
