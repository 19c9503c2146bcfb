"""Pass registry and pipeline driver.

A pass is a callable `fn(module, **options)` that rewrites the module in
place. Pipelines are comma-separated pass specs; each spec is a name with
optional brace-enclosed options, e.g. ``unroll-loops{factor=4}``.
"""
from __future__ import annotations

import importlib
import re
from typing import Callable

from .types import IrError, IrModule
from .verify import verify_module

PassFn = Callable[..., None]

_PASSES: dict[str, PassFn] = {}

# Modules that register passes on import. Loaded lazily so the ir core has
# no dependency on the rest of the package.
_PASS_MODULES = [
    "fhec.ir.cleanup",
    "fhec.secret",
    "fhec.prep",
    "fhec.layout.propagate",
    "fhec.layout.tensorize",
    "fhec.layout.ciphertext_semantics",
    "fhec.polyapprox.lowering",
    "fhec.mgmt",
    "fhec.relin_opt",
    "fhec.noise.populate_scale",
    "fhec.scheme",
]

_loaded_all = False


def register_pass(name: str) -> Callable[[PassFn], PassFn]:
    def wrap(fn: PassFn) -> PassFn:
        if name in _PASSES:
            raise ValueError(f"duplicate pass registration {name}")
        _PASSES[name] = fn
        return fn

    return wrap


def _ensure_loaded() -> None:
    global _loaded_all
    if _loaded_all:
        return
    _loaded_all = True
    for mod in _PASS_MODULES:
        importlib.import_module(mod)


def available_passes() -> list[str]:
    _ensure_loaded()
    return sorted(_PASSES)


_SPEC_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*(\{(.*)\})?\s*$")


def _coerce(text: str):
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+\.\d*([eE][+-]?\d+)?", text):
        return float(text)
    return text


def parse_pass_spec(spec: str) -> tuple[str, dict]:
    m = _SPEC_RE.match(spec)
    if not m:
        raise IrError(f"bad pass spec {spec!r}")
    name = m.group(1)
    options: dict = {}
    if m.group(3):
        pairs: list[list[str]] = []
        for item in m.group(3).split(","):
            if "=" in item:
                pairs.append(list(item.split("=", 1)))
            elif item.strip():
                # comma inside the previous option's value
                if not pairs:
                    raise IrError(f"bad pass option {item!r} in {spec!r}")
                pairs[-1][1] += "," + item
        for key, value in pairs:
            options[key.strip().replace("-", "_")] = _coerce(value)
    return name, options


def split_pipeline(pipeline: str) -> list[str]:
    """Split a comma-joined pipeline, ignoring commas inside option braces."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(pipeline):
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(pipeline[start:i])
            start = i + 1
    parts.append(pipeline[start:])
    return [p.strip() for p in parts if p.strip()]


def run_pass(module: IrModule, spec: str) -> None:
    _ensure_loaded()
    name, options = parse_pass_spec(spec)
    fn = _PASSES.get(name)
    if fn is None:
        raise IrError(f"unknown pass {name!r}")
    try:
        fn(module, **options)
    except TypeError as exc:
        if "unexpected keyword argument" in str(exc):
            raise IrError(f"pass {name!r}: {exc}") from exc
        raise


def run_pipeline(
    module: IrModule,
    pipeline: str | list[str],
    verify_between: bool = True,
) -> None:
    specs = split_pipeline(pipeline) if isinstance(pipeline, str) else list(pipeline)
    if verify_between:
        verify_module(module)
    for spec in specs:
        run_pass(module, spec)
        if verify_between:
            try:
                verify_module(module)
            except IrError as exc:
                raise IrError(
                    [f"after pass {spec!r}: {d}" for d in exc.diagnostics]
                ) from exc
