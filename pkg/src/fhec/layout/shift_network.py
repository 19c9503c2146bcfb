"""Shift networks: route slots of a vector according to a permutation.

A permutation over slots is realized with rotations and 0/1 masks.  Each
element must travel ``s_i = (perm(i) - i) mod slots``; the amounts are
decomposed into power-of-two stages.  Elements whose partial routes collide
at an intermediate slot cannot share a network, so a conflict graph is built
and greedily colored (descending degree); each color class becomes one
stage sequence and the class results are added together.

Only cyclic "shift by +k" and pointwise masking are used, so the program
maps directly onto ciphertext rotations and plaintext multiplications.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..ir.types import IrError


@dataclass
class ShiftStage:
    """One step of a route: slots under `move_mask` shift by `+shift`,
    slots under `keep_mask` stay.  The two masks are disjoint."""

    shift: int
    move_mask: list[int]
    keep_mask: list[int]


@dataclass
class ClassRoute:
    """The stage sequence for one color class of the conflict graph."""

    sources: list[int]
    stages: list[ShiftStage] = field(default_factory=list)

    def source_mask(self, slots: int) -> list[int]:
        mask = [0] * slots
        for s in self.sources:
            mask[s] = 1
        return mask


@dataclass
class ShiftNetworkProgram:
    slots: int
    classes: list[ClassRoute]

    @property
    def num_rotations(self) -> int:
        return sum(1 for c in self.classes for st in c.stages if st.shift % self.slots)

    def apply(self, vec: list) -> list:
        """Simulate the program on a concrete vector."""
        if len(vec) != self.slots:
            raise IrError(f"shift network expects {self.slots} slots, got {len(vec)}")
        if not self.classes:
            return list(vec)
        out = [0] * self.slots
        for cls in self.classes:
            x = [v if m else 0 for v, m in zip(vec, cls.source_mask(self.slots))]
            for st in cls.stages:
                moved = _shift([v if m else 0 for v, m in zip(x, st.move_mask)], st.shift)
                x = [mv + (v if k else 0) for mv, v, k in zip(moved, x, st.keep_mask)]
            out = [a + b for a, b in zip(out, x)]
        return out


def _shift(vec: list, amount: int) -> list:
    """Cyclic shift by +amount: element at slot i moves to slot i+amount."""
    n = len(vec)
    amount %= n
    return vec[n - amount:] + vec[: n - amount]


def apply_permutation(perm: list[int], vec: list) -> list:
    """Reference semantics: element at slot i lands at slot perm[i]."""
    out = [0] * len(vec)
    for i, t in enumerate(perm):
        out[t] = vec[i]
    return out


def _check_permutation(perm: list[int], slots: int) -> None:
    if len(perm) != slots or sorted(perm) != list(range(slots)):
        raise IrError(f"shift network needs a bijection on [0, {slots})")


def implement_shift_network(perm: list[int], slots: int) -> ShiftNetworkProgram:
    """Synthesize a verified shift-network program realizing `perm`."""
    _check_permutation(perm, slots)
    if slots & (slots - 1):
        raise IrError(f"shift network needs a power-of-two slot count, got {slots}")
    shifts = [(perm[i] - i) % slots for i in range(slots)]
    if all(s == 0 for s in shifts):
        return ShiftNetworkProgram(slots, [])

    num_bits = slots.bit_length() - 1

    def position(i: int, stage: int) -> int:
        # slot of element i after the first `stage` power-of-two steps
        return (i + (shifts[i] & ((1 << stage) - 1))) % slots

    # conflict graph: elements whose partial routes meet at the same slot
    neighbors: list[set[int]] = [set() for _ in range(slots)]
    for stage in range(1, num_bits):
        buckets: dict[int, list[int]] = {}
        for i in range(slots):
            buckets.setdefault(position(i, stage), []).append(i)
        for group in buckets.values():
            for a in group:
                for b in group:
                    if a != b:
                        neighbors[a].add(b)

    # greedy coloring, highest degree first
    order = sorted(range(slots), key=lambda i: (-len(neighbors[i]), i))
    color = [-1] * slots
    for i in order:
        used = {color[j] for j in neighbors[i] if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    num_classes = max(color) + 1

    classes = []
    for c in range(num_classes):
        members = [i for i in range(slots) if color[i] == c]
        route = ClassRoute(sources=members)
        for bit in range(num_bits):
            movers = [i for i in members if shifts[i] >> bit & 1]
            if not movers:
                continue
            move_mask = [0] * slots
            keep_mask = [0] * slots
            for i in members:
                pos = position(i, bit)
                if shifts[i] >> bit & 1:
                    move_mask[pos] = 1
                else:
                    keep_mask[pos] = 1
            route.stages.append(ShiftStage(1 << bit, move_mask, keep_mask))
        classes.append(route)

    program = ShiftNetworkProgram(slots, classes)
    probe = list(range(1, slots + 1))
    if program.apply(probe) != apply_permutation(perm, probe):
        raise IrError("shift network synthesis failed verification")
    return program
