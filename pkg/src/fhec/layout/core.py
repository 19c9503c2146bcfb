"""Packing algebra: materialize and invert layouts on concrete data.

A Layout maps aligned data indices to (ciphertext-index..., slot)
coordinates. `pack` fills a slot tensor from logical data, `unpack` reads
the logical data back out. Tensors are represented as flat row-major lists.
"""
from __future__ import annotations

import itertools
import math

from ..ir.affine import AffineMap, parse_affine_map
from ..ir.attributes import Alignment, Layout
from ..ir.types import IrError


def _flat_index(index: tuple[int, ...], shape: tuple[int, ...]) -> int:
    flat = 0
    for i, s in zip(index, shape):
        flat = flat * s + i
    return flat


def pack(layout: Layout, data: list, result_shape: tuple[int, ...]) -> list:
    """Fill a slot tensor of `result_shape` from flat row-major `data`.

    Cells no aligned index maps to are zero. Two aligned indices may map to
    the same cell only if they carry the same value (consistent replication).
    """
    align = layout.alignment
    if len(data) != math.prod(align.in_shape):
        raise IrError(
            f"pack: data has {len(data)} elements, layout wants "
            f"{math.prod(align.in_shape)}"
        )
    if len(result_shape) != len(layout.map.exprs):
        raise IrError(
            f"pack: result rank {len(result_shape)} != layout rank "
            f"{len(layout.map.exprs)}"
        )
    out = [0] * math.prod(result_shape)
    filled: dict[int, object] = {}
    for aligned in itertools.product(*(range(s) for s in align.out_shape)):
        data_index = align.resolve(aligned)
        value = 0 if data_index is None else data[_flat_index(data_index, align.in_shape)]
        target = layout.map.eval(aligned)
        for coord, extent in zip(target, result_shape):
            if not 0 <= coord < extent:
                raise IrError(
                    f"pack: layout sends {aligned} to {target}, outside "
                    f"{result_shape}"
                )
        slot = _flat_index(target, result_shape)
        if slot in filled and filled[slot] != value:
            raise IrError(
                f"pack: layout writes conflicting values to cell {target}"
            )
        filled[slot] = value
        out[slot] = value
    return out


def unpack(layout: Layout, packed: list, result_shape: tuple[int, ...]) -> list:
    """Read the logical data back out of a packed slot tensor."""
    align = layout.alignment
    if len(packed) != math.prod(result_shape):
        raise IrError("unpack: packed size does not match result shape")
    data = []
    for index in itertools.product(*(range(s) for s in align.in_shape)):
        # The first replication copy of every data element sits at its own
        # coordinates (resolve(index) == index when index < in_shape).
        target = layout.map.eval(index)
        data.append(packed[_flat_index(target, result_shape)])
    return data


# ---------------------------------------------------------------------------
# standard layout constructors
# ---------------------------------------------------------------------------


def row_major_vector(n: int, num_slots: int) -> Layout:
    """Vector packed row-major with zero-padding to a power of two, then
    replicated cyclically to fill every slot."""
    align = Alignment.make((n,), (num_slots,))
    return Layout(parse_affine_map(f"(d0) -> (d0 mod {num_slots})"), align)


def row_major_matrix(rows: int, cols: int, num_slots: int) -> Layout:
    """Matrix packed row-major into one ciphertext (rows-by-padded-cols)."""
    padded = 1 if cols <= 1 else 1 << (cols - 1).bit_length()
    if rows * padded > num_slots:
        raise IrError(
            f"row-major {rows}x{cols} needs {rows * padded} slots, have {num_slots}"
        )
    align = Alignment((rows, cols), (rows, padded), (0, padded - cols), (1, 1))
    return Layout(
        parse_affine_map(f"(d0, d1) -> ((d0 * {padded} + d1) mod {num_slots})"),
        align,
    )


def replicated_scalar(num_slots: int) -> Layout:
    """Scalar copied into every slot."""
    align = Alignment((1,), (num_slots,), (0,), (num_slots,))
    return Layout(parse_affine_map(f"(d0) -> (d0 mod {num_slots})"), align)


def scalar_at_slot(slot: int) -> Layout:
    """Scalar stored in one specific slot (all other slots are zero)."""
    align = Alignment((1,), (1,), (0,), (1,))
    return Layout(parse_affine_map(f"(d0) -> ({slot})"), align)


def squat_diagonal(n: int, num_slots: int) -> Layout:
    """Square matrix packed by generalized diagonals across n ciphertexts.

    Ciphertext k holds, in every slot s, the entry M[s mod n, (s + k) mod n];
    with the vector replicated row-major this turns a matrix-vector product
    into n rotate-multiply steps (the Halevi-Shoup kernel).
    """
    if num_slots % n != 0:
        raise IrError(f"diagonal layout needs n | slots, got {n}, {num_slots}")
    align = Alignment((n, n), (n, num_slots), (0, 0), (1, num_slots // n))
    return Layout(
        parse_affine_map(
            f"(d0, d1) -> ((d1 - d0) mod {n}, (d1 - ((d1 - d0) mod {n})) mod {num_slots})"
        ),
        align,
    )


def layout_equal_map(a: Layout, b: Layout) -> bool:
    return a == b
