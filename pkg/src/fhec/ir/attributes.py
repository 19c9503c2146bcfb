"""Structured attribute values: data layouts and static polynomials."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .affine import AffineMap, parse_affine_map
from .types import IrError


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class Alignment:
    """Pads and replicates a data tensor before a layout map applies.

    out_shape[i] == (in_shape[i] + padding[i]) * replication[i]; padding is
    zero-filled and replication repeats the padded block cyclically.
    """

    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    padding: tuple[int, ...]
    replication: tuple[int, ...]

    def __post_init__(self):
        shapes = (self.in_shape, self.out_shape, self.padding, self.replication)
        if len({len(s) for s in shapes}) != 1:
            raise IrError("alignment field ranks disagree")
        for i, (n, out, pad, rep) in enumerate(
            zip(self.in_shape, self.out_shape, self.padding, self.replication)
        ):
            if n <= 0 or out <= 0 or pad < 0 or rep <= 0:
                raise IrError(f"alignment dim {i} has non-positive sizes")
            if (n + pad) * rep != out:
                raise IrError(
                    f"alignment dim {i}: ({n} + {pad}) * {rep} != {out}"
                )

    @staticmethod
    def make(in_shape: tuple[int, ...], out_shape: tuple[int, ...]) -> "Alignment":
        """Derive padding/replication: pad to a power of two, then replicate."""
        padding, replication = [], []
        for i, (n, out) in enumerate(zip(in_shape, out_shape)):
            if out == n:
                padding.append(0)
                replication.append(1)
                continue
            padded = _next_pow2(n)
            if out % padded != 0 or out < padded:
                raise IrError(
                    f"alignment dim {i}: cannot align {n} into {out}"
                )
            padding.append(padded - n)
            replication.append(out // padded)
        return Alignment(tuple(in_shape), tuple(out_shape), tuple(padding), tuple(replication))

    @property
    def is_replicated(self) -> bool:
        return any(r > 1 for r in self.replication)

    def resolve(self, aligned_index: tuple[int, ...]) -> tuple[int, ...] | None:
        """Data index behind an aligned index, or None for a padding slot."""
        data = []
        for i, d in enumerate(aligned_index):
            if not (0 <= d < self.out_shape[i]):
                raise IrError(f"aligned index {d} out of range on dim {i}")
            base = d % (self.in_shape[i] + self.padding[i])
            if base >= self.in_shape[i]:
                return None
            data.append(base)
        return tuple(data)


@dataclass(frozen=True)
class Layout:
    """Placement of a data tensor into (ciphertext-index, slot) space.

    The map consumes aligned indices; its last result is the slot, the
    leading results (if any) index a tensor of ciphertexts.
    """

    map: AffineMap
    alignment: Alignment

    def __post_init__(self):
        if self.map.num_dims != len(self.alignment.in_shape):
            raise IrError(
                f"layout map has {self.map.num_dims} dims but alignment rank "
                f"is {len(self.alignment.in_shape)}"
            )

    @property
    def num_ciphertext_dims(self) -> int:
        return len(self.map.exprs) - 1

    def to_text(self) -> str:
        a = self.alignment
        parts = [f"map = {self.map}", f"align = in = {list(a.in_shape)} out = {list(a.out_shape)}"]
        if any(p != 0 for p in a.padding):
            parts.append(f"pad = {list(a.padding)}")
        if any(r != 1 for r in a.replication):
            parts.append(f"rep = {list(a.replication)}")
        return "layout<" + ", ".join(parts) + ">"


def parse_layout(body: str) -> Layout:
    """Parse the inside of layout<...> (everything between the brackets)."""
    # split on top-level keys; the map itself contains commas, so scan for
    # the known "key =" markers instead of naive splitting.
    keys = ["map", "align", "pad", "rep", "in", "out"]
    marks = []
    depth = 0
    i = 0
    while i < len(body):
        c = body[i]
        if body.startswith("->", i):
            i += 2
            continue
        if c in "(<[":
            depth += 1
        elif c in ")>]":
            depth -= 1
        elif depth == 0:
            for k in keys:
                if body.startswith(k, i) and body[i + len(k):].lstrip().startswith("="):
                    marks.append((k, i))
                    break
        i += 1
    fields: dict[str, str] = {}
    for j, (k, start) in enumerate(marks):
        end = marks[j + 1][1] if j + 1 < len(marks) else len(body)
        text = body[start:end].strip().rstrip(",").strip()
        text = text[len(k):].lstrip()
        if not text.startswith("="):
            raise IrError(f"bad layout field '{k}'")
        fields[k] = text[1:].strip()
    if "map" not in fields or "in" not in fields or "out" not in fields:
        raise IrError("layout needs map and align = in/out fields")

    def int_list(text: str) -> tuple[int, ...]:
        text = text.strip()
        if not (text.startswith("[") and text.endswith("]")):
            raise IrError(f"expected [..] list in layout, got '{text}'")
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(int(x.strip()) for x in inner.split(","))

    amap = parse_affine_map(fields["map"])
    in_shape = int_list(fields["in"])
    out_shape = int_list(fields["out"])
    if "pad" in fields or "rep" in fields:
        pad = int_list(fields["pad"]) if "pad" in fields else (0,) * len(in_shape)
        rep = (
            int_list(fields["rep"])
            if "rep" in fields
            else tuple(o // (n + p) for n, p, o in zip(in_shape, pad, out_shape))
        )
        align = Alignment(in_shape, out_shape, pad, rep)
    else:
        align = Alignment.make(in_shape, out_shape)
    return Layout(amap, align)


@dataclass(frozen=True)
class StaticPolynomial:
    """Fixed-coefficient univariate polynomial with its validity interval."""

    coeffs: tuple[float, ...]
    interval: tuple[float, float]
    basis: str = "monomial"  # or "chebyshev"

    def __post_init__(self):
        if self.basis not in ("monomial", "chebyshev"):
            raise IrError(f"unknown polynomial basis '{self.basis}'")
        if not self.coeffs:
            raise IrError("polynomial needs at least one coefficient")
        if not self.interval[0] < self.interval[1]:
            raise IrError("polynomial interval must satisfy a < b")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        if self.basis == "monomial":
            acc = 0.0
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        a, b = self.interval
        xi = (2.0 * x - (a + b)) / (b - a)
        # Clenshaw recurrence
        b1 = b2 = 0.0
        for c in reversed(self.coeffs[1:]):
            b1, b2 = 2.0 * xi * b1 - b2 + c, b1
        return xi * b1 - b2 + self.coeffs[0]

    def to_text(self) -> str:
        terms = []
        for k, c in enumerate(self.coeffs):
            if k == 0:
                terms.append(repr(float(c)))
            elif k == 1:
                terms.append(f"{float(c)!r} x")
            else:
                terms.append(f"{float(c)!r} x**{k}")
        body = " + ".join(terms)
        prefix = "cheb " if self.basis == "chebyshev" else ""
        lo, hi = self.interval
        return f"poly<{prefix}{body} on [{float(lo)!r}, {float(hi)!r}]>"


def parse_polynomial(body: str) -> StaticPolynomial:
    """Parse the inside of poly<...>."""
    text = body.strip()
    basis = "monomial"
    if text.startswith("cheb "):
        basis = "chebyshev"
        text = text[5:]
    if " on " not in text:
        raise IrError("polynomial attribute needs an 'on [a, b]' interval")
    poly_text, interval_text = text.rsplit(" on ", 1)
    interval_text = interval_text.strip()
    if not (interval_text.startswith("[") and interval_text.endswith("]")):
        raise IrError("bad polynomial interval")
    lo_s, hi_s = interval_text[1:-1].split(",")
    interval = (float(lo_s), float(hi_s))
    coeffs: dict[int, float] = {}
    # split terms on "+" but not the "+" inside exponents like 1e+16
    for raw in re.split(r"(?<![eE])\+", poly_text):
        term = raw.strip()
        if not term:
            continue
        if "x" in term:
            coef_s, _, pow_s = term.partition("x")
            k = int(pow_s.strip().lstrip("*")) if pow_s.strip() else 1
            c = float(coef_s.strip()) if coef_s.strip() else 1.0
        else:
            k, c = 0, float(term)
        if k in coeffs:
            raise IrError(f"duplicate polynomial term x**{k}")
        coeffs[k] = c
    deg = max(coeffs)
    return StaticPolynomial(
        tuple(coeffs.get(k, 0.0) for k in range(deg + 1)), interval, basis
    )


@dataclass(frozen=True)
class ApproxSpec:
    """Requested polynomial-approximation budget for a non-polynomial op."""

    degree: int
    interval: tuple[float, float]

    def __post_init__(self):
        if self.degree < 1:
            raise IrError("approx degree must be at least 1")
        if not self.interval[0] < self.interval[1]:
            raise IrError("approx interval must satisfy a < b")

    def to_text(self) -> str:
        lo, hi = self.interval
        return f"approx<degree = {self.degree}, interval = [{float(lo)!r}, {float(hi)!r}]>"


def parse_approx(body: str) -> ApproxSpec:
    """Parse the inside of approx<...>."""
    fields: dict[str, str] = {}
    depth = 0
    start = 0
    parts = []
    for i, c in enumerate(body):
        if c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append(body[start:i])
            start = i + 1
    parts.append(body[start:])
    for part in parts:
        k, _, v = part.partition("=")
        fields[k.strip()] = v.strip()
    if set(fields) != {"degree", "interval"}:
        raise IrError("approx needs exactly degree and interval fields")
    iv = fields["interval"].strip()
    if not (iv.startswith("[") and iv.endswith("]")):
        raise IrError("bad approx interval")
    lo_s, hi_s = iv[1:-1].split(",")
    return ApproxSpec(int(fields["degree"]), (float(lo_s), float(hi_s)))


def chebyshev_points(interval: tuple[float, float], count: int) -> list[float]:
    a, b = interval
    return [
        (a + b) / 2.0 + (b - a) / 2.0 * math.cos(math.pi * j / (count - 1))
        for j in range(count)
    ]
