"""Global configuration model: handlers, heaps, stacks, queues, waits.

A Configuration is one immutable snapshot of the whole system.  Handler 0
is the bootstrap handler executing the root body; further handlers are
created by `create separate` and each owns the objects spawned on it.
Steps never mutate a configuration; they build a new one, structurally
sharing everything untouched.

Canonicalization maps a configuration to a flat tuple in which object ids
are relabeled in a deterministic traversal order (handlers by id, frame
locals in declaration order, queue contents in queue order, then heap
reachability order), so that configurations equal up to object-id renaming
collapse to one state during exploration.  Handler ids are deliberately
not relabeled: spawn order is deterministic per trace, and full symmetry
reduction is out of scope.  Reservation ids and request sequence stamps
are bookkeeping for trace-level checks and are excluded from the canonical
form.

Wait edges are always derived from the rest of the configuration:
  LOCK-WAIT      blocked reserver -> current holder of a wanted lock
  QUERY-WAIT     client awaiting a query result -> supplier
  SUBQUEUE-WAIT  idle supplier paused at an open empty head subqueue -> owner
"""

from __future__ import annotations

import marshal
from dataclasses import dataclass, field, replace
from typing import Optional

from scoopbench import cfg as cfgmod
from scoopbench import lang
from scoopbench.cfg import ENTER, EvalFault, UNINIT, CfgModel

LOCK_WAIT = "lock-wait"
QUERY_WAIT = "query-wait"
SUBQUEUE_WAIT = "subqueue-wait"

NO_LOCK = -1


class Ref:
    """Reference value: the id of a heap object."""

    __slots__ = ("oid",)

    def __init__(self, oid: int):
        self.oid = oid

    def __eq__(self, other):
        return isinstance(other, Ref) and other.oid == self.oid

    def __hash__(self):
        return hash(("ref", self.oid))

    def __repr__(self):
        return f"Ref({self.oid})"


@dataclass(frozen=True, slots=True)
class Request:
    kind: str  # 'c' command | 'q' query
    target: int  # object id
    unit: int  # method body unit
    method: str
    args: tuple
    client: int
    rid: int  # reservation the request was logged under
    seq: int  # client-wide logging sequence number


@dataclass(frozen=True, slots=True)
class RQState:
    """Single lock-protected FIFO of requests."""

    fifo: tuple = ()
    lock: int = NO_LOCK  # holding handler id, or NO_LOCK


@dataclass(frozen=True, slots=True)
class Subqueue:
    owner: int
    open: bool
    items: tuple = ()


@dataclass(frozen=True, slots=True)
class QoQState:
    """FIFO of private client subqueues, drained in generation order."""

    subqueues: tuple = ()


EMPTY_RQ = RQState()
EMPTY_QOQ = QoQState()


@dataclass(frozen=True, slots=True)
class Reservation:
    rid: int
    client: int
    targets: tuple  # sorted handler ids
    claimed: tuple  # sorted subset whose lock/subqueue this reservation holds


@dataclass(frozen=True, slots=True)
class Frame:
    unit: int
    pos: int
    locals: tuple
    temps: tuple
    loops: tuple
    self_oid: int = -1
    return_slot: int = -1  # parent temp slot, for local query calls
    origin: Optional[tuple] = None  # (client, kind) when running a logged request


@dataclass(frozen=True, slots=True)
class Handler:
    hid: int
    frames: tuple = ()
    queue: object = EMPTY_RQ
    awaiting: Optional[tuple] = None  # (supplier, temp slot) while blocked on a query
    pending: Optional[tuple] = None  # (client, value) once a query body finished
    reservations: tuple = ()  # open reservations, innermost last
    log_seq: int = 0  # bookkeeping: next request sequence stamp
    _canon: object = field(default=None, init=False, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class HeapObject:
    class_idx: int
    owner: int
    attrs: tuple
    _canon: object = field(default=None, init=False, compare=False, repr=False)


@dataclass(frozen=True)
class Configuration:
    cfg: CfgModel = field(compare=False, repr=False)
    handlers: tuple = ()
    heap: tuple = ()
    next_rid: int = 1  # bookkeeping, excluded from the canonical form
    fault: Optional[tuple] = None  # (handler id, message)


def initial_configuration(m: CfgModel, model="rq") -> Configuration:
    """One bootstrap handler parked at the root's initial state."""
    name = model if isinstance(model, str) else model.name
    queue = EMPTY_RQ if name == "rq" else EMPTY_QOQ
    root = m.units[0]
    frame = Frame(
        unit=0,
        pos=root.initial,
        locals=(UNINIT,) * root.n_locals,
        temps=(None,) * root.n_temps,
        loops=(-1,) * root.n_loops,
    )
    return Configuration(cfg=m, handlers=(Handler(0, (frame,), queue),), heap=())


def queue_empty(q) -> bool:
    if type(q) is RQState:
        return not q.fifo
    return not q.subqueues


def is_terminal(c: Configuration) -> bool:
    """Everything ran to completion: empty stacks, empty queues, no waits."""
    if c.fault is not None:
        return False
    for h in c.handlers:
        if h.frames or h.pending is not None or h.awaiting is not None:
            return False
        if not queue_empty(h.queue):
            return False
    return True


# ---------------------------------------------------------------------------
# Canonical form
# ---------------------------------------------------------------------------
#
# The canonical form is a flat tuple.  Values are encoded as (kind, payload)
# int pairs: 0 int, 1 bool, 2 ref (payload relabeled), 3 null, 4 uninit.


def _emit_value(v, out: list, refs: list):
    if v is None:
        out.append(3)
        out.append(0)
    elif v is True or v is False:
        out.append(1)
        out.append(1 if v else 0)
    elif type(v) is int:
        out.append(0)
        out.append(v)
    elif type(v) is Ref:
        out.append(2)
        refs.append(len(out))
        out.append(v.oid)
    elif v is UNINIT:
        out.append(4)
        out.append(0)
    else:  # pragma: no cover - value domain is closed
        raise TypeError(f"unexpected value {v!r}")


def _emit_request(r: Request, out: list, refs: list):
    out.append(0 if r.kind == "c" else 1)
    out.append(2)  # the target object id is a reference
    refs.append(len(out))
    out.append(r.target)
    out.append(r.unit)
    out.append(r.client)
    out.append(len(r.args))
    for a in r.args:
        _emit_value(a, out, refs)


def _handler_segment(h: Handler) -> tuple:
    cached = h._canon
    if cached is not None:
        return cached
    out: list = []
    refs: list = []
    out.append(len(h.frames))
    for f in h.frames:
        out.append(f.unit)
        out.append(f.pos)
        for v in f.locals:
            _emit_value(v, out, refs)
        for v in f.temps:
            _emit_value(v, out, refs)
        out.extend(f.loops)
        out.append(f.self_oid)
        if f.self_oid >= 0:
            refs.append(len(out) - 1)
        out.append(f.return_slot)
        if f.origin is None:
            out.append(-1)
        else:
            out.append(f.origin[0])
            out.append(0 if f.origin[1] == "c" else 1)
    if h.awaiting is None:
        out.append(-1)
    else:
        out.append(h.awaiting[0])
        out.append(h.awaiting[1])
    if h.pending is None:
        out.append(-1)
    else:
        out.append(h.pending[0])
        _emit_value(h.pending[1], out, refs)
    out.append(len(h.reservations))
    for r in h.reservations:
        out.append(len(r.targets))
        out.extend(r.targets)
        out.append(len(r.claimed))
        out.extend(r.claimed)
    q = h.queue
    if type(q) is RQState:
        out.append(0)
        out.append(q.lock)
        out.append(len(q.fifo))
        for r in q.fifo:
            _emit_request(r, out, refs)
    else:
        out.append(1)
        out.append(len(q.subqueues))
        for sq in q.subqueues:
            out.append(sq.owner)
            out.append(1 if sq.open else 0)
            out.append(len(sq.items))
            for r in sq.items:
                _emit_request(r, out, refs)
    seg = (tuple(out), tuple(refs))
    object.__setattr__(h, "_canon", seg)
    return seg


def _object_segment(o: HeapObject) -> tuple:
    cached = o._canon
    if cached is not None:
        return cached
    out = [o.class_idx, o.owner]
    refs: list = []
    for v in o.attrs:
        _emit_value(v, out, refs)
    seg = (tuple(out), tuple(refs))
    object.__setattr__(o, "_canon", seg)
    return seg


def canonical_form(c: Configuration) -> tuple:
    out: list = [len(c.handlers)]
    refs: list = []
    for h in c.handlers:
        seg, rp = _handler_segment(h)
        base = len(out)
        out.extend(seg)
        for p in rp:
            refs.append(base + p)
    if c.fault is None:
        out.append(-1)
    else:
        out.append(c.fault[0])
        out.append(c.fault[1])

    # discover object ids in traversal order, then walk the heap from them
    relabel: dict = {}
    order: list = []
    for p in refs:
        raw = out[p]
        if raw not in relabel:
            relabel[raw] = len(order)
            order.append(raw)
    heap = c.heap
    heap_out: list = [len(heap)]
    heap_refs: list = []
    qi = 0
    next_garbage = 0
    n_heap = len(heap)
    while True:
        while qi < len(order):
            raw = order[qi]
            qi += 1
            seg, rp = _object_segment(heap[raw])
            base = len(heap_out)
            heap_out.extend(seg)
            for p in rp:
                pos = base + p
                heap_refs.append(pos)
                r2 = heap_out[pos]
                if r2 not in relabel:
                    relabel[r2] = len(order)
                    order.append(r2)
        # unreachable objects are kept (no garbage collection): pick the
        # next one in raw id order and walk whatever it references
        while next_garbage < n_heap and next_garbage in relabel:
            next_garbage += 1
        if next_garbage >= n_heap:
            break
        relabel[next_garbage] = len(order)
        order.append(next_garbage)

    for p in refs:
        out[p] = relabel[out[p]]
    for p in heap_refs:
        heap_out[p] = relabel[heap_out[p]]
    out.extend(heap_out)
    return tuple(out)


def canonical_key(c: Configuration) -> bytes:
    """Byte string identifying the configuration up to object-id renaming."""
    return marshal.dumps(canonical_form(c), 2)


# ---------------------------------------------------------------------------
# Derived relations: wait edges, statuses
# ---------------------------------------------------------------------------


def enter_edge(c: Configuration, h: Handler):
    """The separate-enter edge the handler is parked at, if any."""
    if not h.frames or h.awaiting is not None:
        return None
    pos = h.frames[-1].pos
    edges = c.cfg.out_edges[pos]
    if len(edges) == 1 and edges[0].kind == ENTER:
        return edges[0]
    return None


def block_target_owners(c: Configuration, h: Handler, edge) -> list:
    """Owner handler ids for the block's targets, own handler excluded.

    Raises EvalFault on NULL or uninitialized targets.
    """
    frame = h.frames[-1]
    owners = []
    for slot, name in zip(edge.block_targets, edge.target_names):
        v = frame.locals[slot]
        if v is None:
            raise EvalFault(f"separate block target {name} is NULL")
        if v is UNINIT:
            raise EvalFault(f"separate block target {name} is uninitialized")
        owner = c.heap[v.oid].owner
        if owner != h.hid and owner not in owners:
            owners.append(owner)
    return owners


def holds_lock(h: Handler, target: int) -> bool:
    return any(target in r.claimed for r in h.reservations)


def unavailable_locks(c: Configuration, client: Handler, owners) -> list:
    """(target, holder) pairs for wanted request-queue locks held elsewhere."""
    blockers = []
    for t in owners:
        lock = c.handlers[t].queue.lock
        if lock != NO_LOCK and lock != client.hid:
            blockers.append((t, lock))
    return blockers


def wait_edges(c: Configuration) -> list:
    """Derive all wait edges as (from handler, to handler, kind) triples."""
    edges = []
    rq = type(c.handlers[0].queue) is RQState
    for h in c.handlers:
        if h.awaiting is not None:
            edges.append((h.hid, h.awaiting[0], QUERY_WAIT))
            continue
        if rq:
            e = enter_edge(c, h)
            if e is not None:
                try:
                    owners = block_target_owners(c, h, e)
                except EvalFault:
                    continue
                for t, holder in unavailable_locks(c, h, owners):
                    edges.append((h.hid, holder, LOCK_WAIT))
        else:
            if not h.frames and h.pending is None and h.queue.subqueues:
                head = h.queue.subqueues[0]
                if head.open and not head.items:
                    edges.append((h.hid, head.owner, SUBQUEUE_WAIT))
    return edges


# ---------------------------------------------------------------------------
# Guard evaluation
# ---------------------------------------------------------------------------
#
# Wait conditions are evaluated atomically at the reservation step.  Query
# calls on the block's targets run the query body in pure mode: reads of
# the target object's state are allowed, anything effectful is a fault.


class _PureEval:
    def __init__(self, c: Configuration):
        self.c = c
        self.res = c.cfg.vp.resolution
        self.vp = c.cfg.vp

    def expr(self, e, locals_, self_oid):
        if isinstance(e, lang.IntLit):
            return e.value
        if isinstance(e, lang.BoolLit):
            return e.value
        if isinstance(e, lang.Name):
            kind, idx = self.res[id(e)]
            if kind == "local":
                v = locals_[idx]
                if v is UNINIT:
                    raise EvalFault(f"read of uninitialized local {e.name}")
                return v
            return self.c.heap[self_oid].attrs[idx]
        if isinstance(e, lang.NotOp):
            return not self.expr(e.operand, locals_, self_oid)
        if isinstance(e, lang.BinOp):
            a = self.expr(e.left, locals_, self_oid)
            b = self.expr(e.right, locals_, self_oid)
            if e.op == "+" or e.op == "-":
                v = a - b if e.op == "-" else a + b
                if v < cfgmod.INT64_MIN or v > cfgmod.INT64_MAX:
                    raise EvalFault("arithmetic overflow outside 64-bit signed range")
                return v
            if e.op == "=":
                return a == b
            if e.op == "<":
                return a < b
            if e.op == "<=":
                return a <= b
            if e.op == "and":
                return a and b
            if e.op == "or":
                return a or b
        if isinstance(e, lang.QueryCall):
            _, tslot, _cls, _m, unit_idx = self.res[id(e)]
            target = locals_[tslot]
            if target is None:
                raise EvalFault(f"guard query on NULL target {e.target}")
            if target is UNINIT:
                raise EvalFault(f"guard query on uninitialized {e.target}")
            args = [self.expr(a, locals_, self_oid) for a in e.args]
            return self.run_query(target.oid, unit_idx, args)
        raise TypeError(f"unknown expression {e!r}")

    def run_query(self, oid: int, unit_idx: int, args: list):
        unit = self.vp.units[unit_idx]
        method = unit.method
        locals_ = list(args) + [UNINIT] * (len(unit.locals) - len(args))
        self.stmts(method.body, locals_, oid)
        return self.expr(method.result_expr, locals_, oid)

    def stmts(self, body, locals_, self_oid):
        for s in body:
            if isinstance(s, lang.Assign):
                kind, idx = self.res[id(s)]
                if kind != "local":
                    raise EvalFault("guard query writes an attribute")
                locals_[idx] = self.expr(s.expr, locals_, self_oid)
            elif isinstance(s, lang.If):
                if self.expr(s.cond, locals_, self_oid):
                    self.stmts(s.then_body, locals_, self_oid)
                else:
                    self.stmts(s.else_body, locals_, self_oid)
            elif isinstance(s, lang.Repeat):
                for _ in range(s.count):
                    self.stmts(s.body, locals_, self_oid)
            else:
                raise EvalFault("guard query performs an effectful statement")


def eval_guard(c: Configuration, client: Handler, guard) -> bool:
    """Evaluate a wait condition against the current configuration."""
    frame = client.frames[-1]
    return bool(_PureEval(c).expr(guard, frame.locals, frame.self_oid))


def handler_status(c: Configuration, hid: int) -> str:
    """One of RUNNING, IDLE, DONE, BLOCKED-ON-QUERY, BLOCKED-ON-RESERVE."""
    h = c.handlers[hid]
    if h.awaiting is not None:
        return "BLOCKED-ON-QUERY"
    if not h.frames:
        if hid == 0 and queue_empty(h.queue) and h.pending is None:
            return "DONE"
        return "IDLE"
    e = enter_edge(c, h)
    if e is not None:
        try:
            owners = block_target_owners(c, h, e)
            if type(h.queue) is RQState and unavailable_locks(c, h, owners):
                return "BLOCKED-ON-RESERVE"
            if e.guard is not None and not eval_guard(c, h, e.guard):
                return "BLOCKED-ON-RESERVE"
        except EvalFault:
            return "RUNNING"
    return "RUNNING"


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------


def _fmt_value(c: Configuration, v) -> str:
    if v is None:
        return "NULL"
    if type(v) is Ref:
        return f"o{v.oid}"
    if v is UNINIT:
        return "?"
    return str(v).lower() if isinstance(v, bool) else str(v)


def _fmt_queue(c: Configuration, q) -> str:
    if type(q) is RQState:
        body = ", ".join(f"{r.method}<h{r.client}>" for r in q.fifo)
        lock = "" if q.lock == NO_LOCK else f" lock=h{q.lock}"
        return f"[{body}]{lock}"
    parts = []
    for sq in q.subqueues:
        state = "open" if sq.open else "closed"
        body = ", ".join(r.method for r in sq.items)
        parts.append(f"h{sq.owner}:{state}[{body}]")
    return "[" + " | ".join(parts) + "]"


def dump_configuration_dot(c: Configuration) -> str:
    """Render handlers, heap, queues and wait edges as a DOT digraph."""
    lines = ["digraph configuration {", "  rankdir=LR;", "  node [shape=box];"]
    for h in c.handlers:
        status = handler_status(c, h.hid)
        pos = c.handlers[h.hid].frames[-1].pos if h.frames else "-"
        label = f"h{h.hid}\\n{status}\\nat {pos}\\nqueue {_fmt_queue(c, h.queue)}"
        lines.append(f'  h{h.hid} [label="{label}"];')
    for oid, obj in enumerate(c.heap):
        cname = c.cfg.class_names[obj.class_idx]
        attrs = ", ".join(
            f"{n}={_fmt_value(c, v)}"
            for n, v in zip(c.cfg.class_attr_names[obj.class_idx], obj.attrs)
        )
        lines.append(f'  o{oid} [shape=ellipse, label="o{oid}:{cname}\\n{attrs}"];')
        lines.append(f"  h{obj.owner} -> o{oid} [style=dotted, label=owns];")
    for src, dst, kind in wait_edges(c):
        lines.append(f'  h{src} -> h{dst} [color=red, label="{kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
