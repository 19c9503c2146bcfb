"""Ciphertext-maintenance insertion and bookkeeping.

Homomorphic programs need maintenance operations interleaved with the
arithmetic: relinearization to bring key degrees back down after
ciphertext-ciphertext multiplications, modulus reduction to shed noise
between multiplications, and scale adjustments where BGV plaintext scales
diverge.  This module inserts those ops at the function level (around the
one-op secret regions of a distributed module) and computes the per-value
bookkeeping — level, key degree, scale — that later passes consume.

Conventions:

* ``level`` counts RNS limbs remaining, from the chain length L down; every
  ``mgmt.mod_reduce`` drops one.  Fresh ciphertexts adopt the level their
  first use requires (clients encrypt at that level), so ordinary mixing of
  fresh and reduced values needs no extra ops; only two *derived* values at
  different levels force an alignment ``mod_reduce`` on the shallower side.
* ``key_degree`` is the degree of the ciphertext as a polynomial in the
  secret key: fresh = 1, ct-ct multiplication adds degrees, add/sub takes
  the max, relinearization resets to 1.
* ``scale`` is the BGV plaintext scale mod t; it only moves at mod_reduce
  (by q_i^{-1}) and multiplications (scales multiply), so placeholder
  ``mgmt.adjust_scale`` ops are needed exactly where two add/sub operands
  reach the op through different reduction histories.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .ir import printer
from .ir.passes import register_pass
from .ir.types import (
    Function,
    IrError,
    IrModule,
    Operation,
    SecretType,
    Value,
)

SCHEMES = ("bgv", "bfv")
POLICIES = ("before-mul", "after-mul")

_MUL_OPS = ("arith.mul", "arith.mulf")
_ADD_SUB_OPS = ("arith.add", "arith.addf", "arith.sub", "arith.subf")


# ---------------------------------------------------------------------------
# function-level view of the encrypted dataflow
# ---------------------------------------------------------------------------


@dataclass
class Site:
    """One step of the encrypted computation, seen at function level.

    Either a one-op ``secret.generic`` (then `inner` is its compute op) or a
    bare maintenance/conceal op.  `secret_in` lists the *function-level*
    values feeding the compute op's secret operand positions, in operand
    order (duplicates kept, so ``x * x`` shows two entries).
    """

    op: Operation
    inner: Operation | None
    kind: str
    secret_in: list[Value]

    @property
    def result(self) -> Value:
        return self.op.results[0]

    def is_ct_ct(self, names: tuple[str, ...]) -> bool:
        return self.kind in names and len(self.secret_in) >= 2


def _generic_site(op: Operation) -> Site:
    region = op.regions[0]
    compute = [o for o in region.ops if o.name != "secret.yield"]
    if len(compute) != 1:
        raise IrError(
            "ciphertext-maintenance passes need a distributed module "
            f"(one op per secret region, found {len(compute)}); "
            "run distribute-generic first"
        )
    inner = compute[0]
    if inner.regions:
        raise IrError(
            "ciphertext-maintenance passes cannot handle control flow "
            f"inside secret regions ('{inner.name}'); unroll loops first"
        )
    if len(op.results) != 1:
        raise IrError("secret region with multiple results is not supported")
    secret_in = []
    for v in inner.operands:
        for i, arg in enumerate(region.args):
            if v is arg:
                secret_in.append(op.operands[i])
                break
    return Site(op, inner, inner.name, secret_in)


def function_sites(fn: Function) -> list[Site]:
    """The encrypted-dataflow steps of `fn`, in program order."""
    sites = []
    for op in fn.body.ops:
        if op.name == "secret.generic":
            sites.append(_generic_site(op))
        elif op.name.startswith("mgmt."):
            sites.append(Site(op, None, op.name, [op.operands[0]]))
        elif op.name == "secret.conceal":
            sites.append(Site(op, None, op.name, []))
    return sites


def _secret_values(fn: Function) -> list[Value]:
    vals = [a for a in fn.args if isinstance(a.type, SecretType)]
    for op in fn.body.ops:
        vals.extend(r for r in op.results if isinstance(r.type, SecretType))
    return vals


def _return_op(fn: Function) -> Operation | None:
    for op in fn.body.ops:
        if op.name == "return":
            return op
    return None


# ---------------------------------------------------------------------------
# level bookkeeping: a difference-constraint system over "drops from the top"
# ---------------------------------------------------------------------------


class _DropSolver:
    """Union-find with offsets: drop(a) - drop(b) pinned by each constraint.

    Fresh values float freely until a constraint ties them to something, which
    models encrypt-at-the-level-of-first-use.  A contradiction means two
    derived values meet at a binary op with genuinely different levels.
    """

    def __init__(self) -> None:
        self.parent: dict[int, int] = {}
        self.offset: dict[int, int] = {}  # drop(uid) - drop(parent[uid])

    def find(self, uid: int) -> tuple[int, int]:
        if uid not in self.parent:
            self.parent[uid] = uid
            self.offset[uid] = 0
            return uid, 0
        chain = []
        node = uid
        while self.parent[node] != node:
            chain.append(node)
            node = self.parent[node]
        root = node
        run = 0
        for node in reversed(chain):  # nearest the root first
            run += self.offset[node]
            self.parent[node] = root
            self.offset[node] = run
        return root, (0 if uid == root else self.offset[uid])

    def relate(self, a: int, b: int, delta: int) -> int:
        """Impose drop(a) = drop(b) + delta.

        Returns 0 on success; otherwise the (nonzero) amount by which the
        existing constraint system says drop(a) - drop(b) - delta differs.
        """
        ra, offa = self.find(a)
        rb, offb = self.find(b)
        if ra == rb:
            return offa - offb - delta
        # attach ra under rb: offa + off(ra) = offb + delta
        self.parent[ra] = rb
        self.offset[ra] = offb + delta - offa
        return 0

    def drop_of(self, uid: int) -> tuple[int, int]:
        """(component root, drop relative to component root)."""
        return self.find(uid)


def _component_drops(values: list[Value], solver: _DropSolver) -> dict[int, int]:
    """Absolute drop per value: each component shifted so its minimum is 0."""
    raw: dict[int, tuple[int, int]] = {}
    base: dict[int, int] = {}
    for v in values:
        root, off = solver.drop_of(v.uid)
        raw[v.uid] = (root, off)
        base[root] = min(base.get(root, off), off)
    return {uid: off - base[root] for uid, (root, off) in raw.items()}


# ---------------------------------------------------------------------------
# insertion helpers
# ---------------------------------------------------------------------------


def _insert_after(fn: Function, producer: Operation, name: str) -> Operation:
    """Insert a maintenance op consuming `producer`'s result; rewire users."""
    value = producer.results[0]
    new = Operation(name, operands=[value], results=[Value(value.type)])
    for op in fn.walk():
        for i, v in enumerate(op.operands):
            if v is value:
                op.operands[i] = new.results[0]
    new.operands[0] = value  # the walk rewired every use, including ours
    fn.body.ops.insert(fn.body.ops.index(producer) + 1, new)
    return new


def _insert_on_edge(
    fn: Function, consumer: Operation, value: Value, name: str, count: int = 1
) -> Value:
    """Insert `count` maintenance ops on the value→consumer edge only."""
    at = fn.body.ops.index(consumer)
    cur = value
    for _ in range(count):
        new = Operation(name, operands=[cur], results=[Value(cur.type)])
        fn.body.ops.insert(at, new)
        at += 1
        cur = new.results[0]
    for i, v in enumerate(consumer.operands):
        if v is value:
            consumer.operands[i] = cur
    return cur


def _producer_name(fn: Function, value: Value) -> str | None:
    for op in fn.body.ops:
        if any(r is value for r in op.results):
            return op.name
    return None


# ---------------------------------------------------------------------------
# insert_mgmt
# ---------------------------------------------------------------------------


def insert_mgmt(
    module: IrModule, scheme: str = "bgv", policy: str = "before-mul"
) -> IrModule:
    """Insert relinearize / mod_reduce / adjust_scale ops.

    BGV: relinearize after every ct-ct multiplication; mod_reduce per
    `policy` (``before-mul`` reduces each multiplication operand that has
    already been through a multiplication — so the first multiplication on
    each path is exempt — while ``after-mul`` reduces every product);
    adjust_scale placeholders wherever add/sub operand scales can differ,
    and level-alignment reduces where two derived values meet at different
    levels.  BFV: relinearization only, since there is no modulus chain.

    Deterministic, idempotent on its own output, and a no-op for the
    plaintext backend (maintenance ops are identities there).
    """
    if scheme not in SCHEMES:
        raise IrError(f"unsupported scheme {scheme!r}; expected one of {SCHEMES}")
    if policy not in POLICIES:
        raise IrError(f"unsupported policy {policy!r}; expected one of {POLICIES}")
    for fn in module.functions:
        _insert_relins(fn)
        if scheme == "bgv":
            if policy == "before-mul":
                _reduce_before_muls(fn)
            else:
                _reduce_after_muls(fn)
            _align_levels(fn)
            _place_scale_placeholders(fn)
    return module


def _insert_relins(fn: Function) -> None:
    for site in function_sites(fn):
        if not site.is_ct_ct(_MUL_OPS):
            continue
        users = [
            op.name
            for op in fn.body.ops
            if any(v is site.result for v in op.operands)
        ]
        if "mgmt.relinearize" in users:
            continue
        _insert_after(fn, site.op, "mgmt.relinearize")


def _mul_history(fn: Function) -> dict[int, bool]:
    """Per-value flag: reached through a multiplication not yet reduced."""
    flag: dict[int, bool] = {}
    for site in function_sites(fn):
        if site.kind == "mgmt.mod_reduce":
            out = False
        elif site.is_ct_ct(_MUL_OPS):
            out = True
        else:
            out = any(flag.get(v.uid, False) for v in site.secret_in)
        flag[site.result.uid] = out
    return flag


def _reduce_before_muls(fn: Function) -> None:
    flag = _mul_history(fn)
    for site in function_sites(fn):
        if not site.is_ct_ct(_MUL_OPS):
            continue
        seen: set[int] = set()
        for v in site.secret_in:
            if v.uid in seen or not flag.get(v.uid, False):
                continue
            seen.add(v.uid)
            _insert_on_edge(fn, site.op, v, "mgmt.mod_reduce")


def _reduce_after_muls(fn: Function) -> None:
    for site in function_sites(fn):
        if not site.is_ct_ct(_MUL_OPS):
            continue
        top = site.op
        while True:  # reduce above the relinearize if one follows
            users = [
                op
                for op in fn.body.ops
                if any(v is top.results[0] for v in op.operands)
            ]
            follow = [u for u in users if u.name == "mgmt.relinearize"]
            if not follow:
                break
            top = follow[0]
        users = [
            op.name
            for op in fn.body.ops
            if any(v is top.results[0] for v in op.operands)
        ]
        if "mgmt.mod_reduce" in users:
            continue
        _insert_after(fn, top, "mgmt.mod_reduce")


def _level_constraints(fn: Function, repair: bool) -> _DropSolver:
    """Build the drop system; on operand-level conflicts either insert an
    alignment mod_reduce on the shallower side (`repair`) or raise."""
    solver = _DropSolver()
    for site in function_sites(fn):
        if site.kind == "mgmt.mod_reduce":
            solver.relate(site.result.uid, site.secret_in[0].uid, 1)
            continue
        if not site.secret_in:
            continue
        anchor = site.secret_in[0]
        for v in site.secret_in[1:]:
            if v.uid == anchor.uid:
                continue
            gap = solver.relate(v.uid, anchor.uid, 0)
            if gap == 0:
                continue
            if not repair:
                raise IrError(
                    f"level mismatch at '{site.kind}' in @{fn.name}: "
                    f"operand levels differ by {abs(gap)}"
                )
            # gap = drop(v) - drop(anchor): reduce whichever side is shallower
            shallow = anchor if gap > 0 else v
            new = _insert_on_edge(
                fn, site.op, shallow, "mgmt.mod_reduce", count=abs(gap)
            )
            solver.relate(new.uid, shallow.uid, abs(gap))
        solver.relate(site.result.uid, anchor.uid, 0)
    return solver


def _align_levels(fn: Function) -> None:
    _level_constraints(fn, repair=True)


def _scale_history(fn: Function) -> dict[int, tuple]:
    """Symbolic scale per value: sorted multiset of mod_reduce drop depths.

    Two values with equal histories provably carry the same scale for any
    modulus chain; differing histories may (but need not) differ, so they
    get a placeholder that parameter-aware scale population later resolves.
    """
    solver = _level_constraints(fn, repair=False)
    drops = _component_drops(_secret_values(fn), solver)
    hist: dict[int, tuple] = {}

    def of(v: Value) -> tuple:
        return hist.get(v.uid, ())

    for site in function_sites(fn):
        if site.kind == "mgmt.mod_reduce":
            src = site.secret_in[0]
            hist[site.result.uid] = tuple(sorted(of(src) + (drops[src.uid],)))
        elif site.is_ct_ct(_MUL_OPS):
            merged = ()
            for v in site.secret_in:
                merged = merged + of(v)
            hist[site.result.uid] = tuple(sorted(merged))
        elif site.is_ct_ct(_ADD_SUB_OPS):
            # operands are equalized (placeholders handle any difference)
            hist[site.result.uid] = of(site.secret_in[-1])
        elif site.secret_in:
            hist[site.result.uid] = of(site.secret_in[0])
        else:
            hist[site.result.uid] = ()
    return hist


def _place_scale_placeholders(fn: Function) -> None:
    hist = _scale_history(fn)
    for site in function_sites(fn):
        if not site.is_ct_ct(_ADD_SUB_OPS):
            continue
        a, b = site.secret_in[0], site.secret_in[1]
        if a.uid == b.uid:
            continue
        if "mgmt.adjust_scale" in (
            _producer_name(fn, a),
            _producer_name(fn, b),
        ):
            continue
        if hist.get(a.uid, ()) != hist.get(b.uid, ()):
            _insert_on_edge(fn, site.op, a, "mgmt.adjust_scale")


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------


@dataclass
class MgmtInfo:
    """Per-value maintenance bookkeeping plus per-function summaries."""

    level: dict[int, int] = field(default_factory=dict)
    key_degree: dict[int, int] = field(default_factory=dict)
    scale: dict[int, int] = field(default_factory=dict)
    depth: dict[str, int] = field(default_factory=dict)
    chain_length: dict[str, int] = field(default_factory=dict)

    def level_of(self, v: Value) -> int:
        return self.level[v.uid]

    def key_degree_of(self, v: Value) -> int:
        return self.key_degree[v.uid]

    def scale_of(self, v: Value) -> int:
        return self.scale[v.uid]

    def to_json(self, module: IrModule) -> str:
        doc = {}
        for fn in module.functions:
            names = _printed_names(fn)
            values = {}
            for v in _secret_values(fn):
                if v.uid not in self.level:
                    continue
                values[names.get(v.uid, f"%{v.uid}")] = {
                    "level": self.level[v.uid],
                    "key_degree": self.key_degree[v.uid],
                    "scale": self.scale[v.uid],
                }
            doc[fn.name] = {
                "multiplicative_depth": self.depth.get(fn.name, 0),
                "levels_used": self.chain_length.get(fn.name, 0),
                "values": values,
            }
        return json.dumps(doc, indent=2)


def _printed_names(fn: Function) -> dict[int, str]:
    p = printer._Printer()
    for j, a in enumerate(fn.args):
        p.names[a.uid] = f"%arg{j}"
    p.function(fn)
    return dict(p.names)


def site_degree(kind: str, operand_degrees: list[int]) -> int:
    """Key degree of a site's result from its secret operands' degrees."""
    if kind == "mgmt.relinearize":
        return 1
    if kind in _MUL_OPS and len(operand_degrees) >= 2:
        return sum(operand_degrees)
    return max(operand_degrees, default=1)


def analyze_levels(module: IrModule, params=None) -> MgmtInfo:
    """Compute per-value level / key degree / scale and per-function depth.

    Raises on a genuine level mismatch (two derived values meeting at a
    binary op with different reduction counts); fresh values simply adopt
    the level of their first use.  Scales are concrete only when `params`
    (a modulus chain with a plaintext modulus) is supplied; otherwise 1.
    """
    info = MgmtInfo()
    for fn in module.functions:
        vals = _secret_values(fn)
        solver = _level_constraints(fn, repair=False)
        drops = _component_drops(vals, solver)
        top = max(drops.values(), default=0)
        for v in vals:
            info.level[v.uid] = top - drops[v.uid]
        info.chain_length[fn.name] = top

        degree: dict[int, int] = {v.uid: 1 for v in vals}
        mulcount: dict[int, int] = {v.uid: 0 for v in vals}
        scale: dict[int, int] = {v.uid: 1 for v in vals}
        for site in function_sites(fn):
            degs = [degree.get(v.uid, 1) for v in site.secret_in]
            degree[site.result.uid] = site_degree(site.kind, degs)
            muls = [mulcount.get(v.uid, 0) for v in site.secret_in]
            bump = 1 if site.is_ct_ct(_MUL_OPS) else 0
            mulcount[site.result.uid] = max(muls, default=0) + bump
            scale[site.result.uid] = _site_scale(site, scale, drops, top, params)
        info.key_degree.update(degree)
        info.scale.update(scale)
        info.depth[fn.name] = max(mulcount.values(), default=0)

        # mirror region arguments and inner results onto the outer values
        for op in fn.body.ops:
            if op.name != "secret.generic":
                continue
            for arg, outer in zip(op.regions[0].args, op.operands):
                for table in (info.level, info.key_degree, info.scale):
                    if outer.uid in table:
                        table[arg.uid] = table[outer.uid]
            yielded = op.regions[0].ops[-1]
            for inner_v, outer in zip(yielded.operands, op.results):
                for table in (info.level, info.key_degree, info.scale):
                    if outer.uid in table:
                        table[inner_v.uid] = table[outer.uid]
    return info


def _site_scale(site: Site, scale: dict, drops: dict, top: int, params) -> int:
    src = [scale.get(v.uid, 1) for v in site.secret_in]
    if params is None:
        return 1
    t = params.plain_modulus
    if site.kind == "mgmt.mod_reduce":
        operand = site.secret_in[0]
        chain_level = len(params.moduli) - 1 - drops.get(operand.uid, 0)
        q_i = params.moduli[chain_level]
        return (src[0] * pow(q_i, -1, t)) % t
    if site.kind == "mgmt.adjust_scale":
        factor = site.op.attributes.get("scale")
        return src[0] if factor is None else (src[0] * int(factor)) % t
    if site.is_ct_ct(_MUL_OPS):
        out = 1
        for s in src:
            out = (out * s) % t
        return out
    return src[0] if src else 1


@register_pass("insert-mgmt")
def _insert_mgmt_pass(
    module: IrModule, scheme: str = "bgv", policy: str = "before-mul"
) -> None:
    insert_mgmt(module, scheme=scheme, policy=policy)
