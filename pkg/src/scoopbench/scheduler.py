"""The control program: local fixpoints plus nondeterministic sync steps.

Each handler executes local actions (assignments, branches, non-separate
calls, returns, loop bookkeeping) as long as possible; local steps of
distinct handlers touch disjoint state and commute, so the fixpoint is
order-independent.  Exploration then branches over the enabled
synchronization actions: reserving handlers, logging requests, dispatching
queued work, returning query results, closing blocks, and spawning
handlers.  Every successor returned by `successors` is itself already at a
local fixpoint, so the stored states of the explorer are exactly the
fixpoint configurations and the transitions are sync actions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from scoopbench import cfg as cfgmod
from scoopbench import runtime as rt
from scoopbench.cfg import (
    ASSIGN,
    BRANCH_FALSE,
    BRANCH_TRUE,
    COMMAND,
    CREATE_LOCAL,
    CREATE_SEP,
    ENTER,
    EXIT,
    JOIN,
    LOOP_INIT,
    LOOP_STEP,
    QUERY,
    RETURN,
    EvalFault,
    UNINIT,
)
from scoopbench.execmodel import SyncAction, get_model
from scoopbench.runtime import Configuration, Frame, Handler, HeapObject, Ref, Request


@dataclass(frozen=True)
class Successor:
    action: SyncAction
    config: Configuration
    microsteps: int


class _MutFrame:
    __slots__ = ("unit", "pos", "locals", "temps", "loops", "self_oid", "return_slot", "origin")

    def __init__(self, f: Frame):
        self.unit = f.unit
        self.pos = f.pos
        self.locals = list(f.locals)
        self.temps = list(f.temps)
        self.loops = list(f.loops)
        self.self_oid = f.self_oid
        self.return_slot = f.return_slot
        self.origin = f.origin

    def freeze(self) -> Frame:
        return Frame(
            self.unit,
            self.pos,
            tuple(self.locals),
            tuple(self.temps),
            tuple(self.loops),
            self.self_oid,
            self.return_slot,
            self.origin,
        )


def _clear_temps(f: _MutFrame):
    if f.temps:
        f.temps = [None] * len(f.temps)


def _run_handler(cfg, heap: list, h: Handler):
    """Run one handler's local steps to quiescence.

    Returns (new handler, steps, fault message or None).  `heap` is a
    mutable list shared by the caller and updated in place.
    """
    if h.awaiting is not None or not h.frames:
        return h, 0, None
    frames = [_MutFrame(f) for f in h.frames]
    steps = 0
    pending = h.pending
    units = cfg.units
    out_edges = cfg.out_edges
    fault = None
    while frames:
        f = frames[-1]
        unit = units[f.unit]
        if f.pos == unit.final:
            steps += 1
            frames.pop()
            if frames:
                if f.return_slot >= 0:
                    frames[-1].temps[f.return_slot] = f.locals[unit.result_slot]
                continue
            if f.origin is not None and f.origin[1] == "q":
                pending = (f.origin[0], f.locals[unit.result_slot])
            break
        edges = out_edges[f.pos]
        if len(edges) == 2:
            true_edge, false_edge = edges
            if true_edge.expr is None:  # loop test on the frame's counter
                taken = f.loops[true_edge.slot] > 0
            else:
                try:
                    taken = true_edge.expr(f.locals, f.temps, heap, f.self_oid)
                except EvalFault as e:
                    fault = str(e)
                    break
            f.pos = true_edge.dst if taken else false_edge.dst
            _clear_temps(f)
            steps += 1
            continue
        e = edges[0]
        kind = e.kind
        if kind == ASSIGN:
            try:
                v = e.expr(f.locals, f.temps, heap, f.self_oid)
            except EvalFault as ex:
                fault = str(ex)
                break
            where, idx = e.dest
            if where == "local":
                f.locals[idx] = v
            else:
                obj = heap[f.self_oid]
                attrs = list(obj.attrs)
                attrs[idx] = v
                heap[f.self_oid] = HeapObject(obj.class_idx, obj.owner, tuple(attrs))
            f.pos = e.dst
            _clear_temps(f)
            steps += 1
        elif kind == COMMAND or kind == QUERY:
            target = f.locals[e.target_slot]
            if target is None:
                fault = f"call of {e.method} on NULL target"
                break
            if target is UNINIT:
                fault = f"call of {e.method} on uninitialized target"
                break
            if heap[target.oid].owner != h.hid:
                break  # separate call: a sync action takes over
            try:
                args = [fn(f.locals, f.temps, heap, f.self_oid) for fn in e.args]
            except EvalFault as ex:
                fault = str(ex)
                break
            f.pos = e.dst
            callee = units[e.unit_idx]
            nf = _MutFrame(
                Frame(
                    e.unit_idx,
                    callee.initial,
                    tuple(args) + (UNINIT,) * (callee.n_locals - len(args)),
                    (None,) * callee.n_temps,
                    (-1,) * callee.n_loops,
                    target.oid,
                    e.slot if kind == QUERY else -1,
                )
            )
            if kind == COMMAND:
                _clear_temps(f)
            frames.append(nf)
            steps += 1
        elif kind == CREATE_LOCAL:
            oid = len(heap)
            heap.append(HeapObject(e.class_idx, h.hid, cfg.class_attr_defaults[e.class_idx]))
            f.locals[e.slot] = Ref(oid)
            f.pos = e.dst
            _clear_temps(f)
            steps += 1
        elif kind == LOOP_INIT:
            f.loops[e.slot] = e.count
            f.pos = e.dst
            steps += 1
        elif kind == LOOP_STEP:
            f.loops[e.slot] -= 1
            f.pos = e.dst
            steps += 1
        elif kind == JOIN or kind == RETURN:
            f.pos = e.dst
            steps += 1
        else:  # ENTER, EXIT, CREATE_SEP: sync actions
            break
    if steps == 0 and fault is None:
        return h, 0, None
    h2 = replace(h, frames=tuple(f.freeze() for f in frames), pending=pending)
    return h2, steps, fault


def _fixpoint(c: Configuration, hids=None, order=None):
    """Advance handlers to their local fixpoints; returns (config, steps)."""
    if c.fault is not None:
        return c, 0
    if hids is None:
        hids = range(len(c.handlers))
    if order is not None:
        hids = order
    heap = list(c.heap)
    heap_len0 = len(c.heap)
    handlers = None
    total = 0
    fault = None
    for hid in hids:
        h = c.handlers[hid] if handlers is None else handlers[hid]
        h2, steps, fmsg = _run_handler(c.cfg, heap, h)
        total += steps
        if steps or fmsg:
            if handlers is None:
                handlers = list(c.handlers)
            handlers[hid] = h2
        if fmsg is not None:
            fault = (hid, fmsg)
            break
    if handlers is None and len(heap) == heap_len0 and fault is None:
        return c, total
    return (
        replace(
            c,
            handlers=tuple(handlers) if handlers is not None else c.handlers,
            heap=tuple(heap),
            fault=fault,
        ),
        total,
    )


def local_fixpoint(c: Configuration, order=None) -> Configuration:
    """Run every handler's local steps to quiescence.

    The result is independent of the handler processing order; `order` lets
    tests check that commutation property explicitly.
    """
    return _fixpoint(c, order=order)[0]


def local_fixpoint_counted(c: Configuration, order=None):
    return _fixpoint(c, order=order)


# ---------------------------------------------------------------------------
# Sync action enumeration
# ---------------------------------------------------------------------------


def _advance_top(c: Configuration, hid: int, dst: int, clear_temps=True) -> Configuration:
    h = c.handlers[hid]
    f = h.frames[-1]
    temps = (None,) * len(f.temps) if clear_temps else f.temps
    f2 = replace(f, pos=dst, temps=temps)
    handlers = list(c.handlers)
    handlers[hid] = replace(h, frames=h.frames[:-1] + (f2,))
    return replace(c, handlers=tuple(handlers))


def _fault_successor(c: Configuration, hid: int, message: str) -> Configuration:
    return replace(c, fault=(hid, message))


def _eval_args(c: Configuration, h: Handler, edge):
    f = h.frames[-1]
    return tuple(fn(f.locals, f.temps, c.heap, f.self_oid) for fn in edge.args)


def _claiming_rid(h: Handler, supplier: int) -> int:
    for r in h.reservations:
        if supplier in r.claimed:
            return r.rid
    # target handler equals an enclosing claim; fall back to the innermost
    # open reservation listing it
    for r in reversed(h.reservations):
        if supplier in r.targets:
            return r.rid
    raise AssertionError(f"no reservation of h{h.hid} covers supplier h{supplier}")


def successors(c: Configuration, model="rq", check_commutation: bool = False) -> list:
    """Enabled sync actions with their fixpointed successor configurations.

    Deterministically ordered by action kind, then initiating handler.
    With `check_commutation`, every successor's fixpoint is recomputed over
    all handlers in forward and reverse order and the canonical forms are
    asserted equal (a debug mode; local steps of distinct handlers commute).
    """
    em = get_model(model)
    found = []
    if c.fault is not None:
        return found

    def settle(c_pre, hids):
        c_out, steps = _fixpoint(c_pre, hids=hids)
        if check_commutation:
            n = len(c_pre.handlers)
            forward = _fixpoint(c_pre, order=range(n))[0]
            backward = _fixpoint(c_pre, order=range(n - 1, -1, -1))[0]
            assert (
                rt.canonical_form(forward)
                == rt.canonical_form(backward)
                == rt.canonical_form(c_out)
            ), "local fixpoint depends on handler processing order"
        return c_out, steps
    for h in c.handlers:
        hid = h.hid
        if h.pending is not None:
            client, value = h.pending
            ch = c.handlers[client]
            slot = ch.awaiting[1]
            f = ch.frames[-1]
            temps = list(f.temps)
            temps[slot] = value
            f2 = replace(f, temps=tuple(temps))
            handlers = list(c.handlers)
            handlers[client] = replace(ch, frames=ch.frames[:-1] + (f2,), awaiting=None)
            handlers[hid] = replace(h, pending=None)
            c2 = replace(c, handlers=tuple(handlers))
            c2, steps = settle(c2, (client,))
            found.append(
                Successor(SyncAction("query_return", hid, f"query_return(h{hid}->h{client})"), c2, steps)
            )
            continue
        if not h.frames:
            for variant, request, c2 in em.dispatch_options(c, hid):
                c2, steps = settle(c2, (hid,))
                suffix = "" if variant == 0 else f"#{variant}"
                label = f"dequeue(h{hid},{request.method}<-h{request.client}){suffix}"
                found.append(Successor(SyncAction("dequeue", hid, label, request), c2, steps))
            continue
        if h.awaiting is not None:
            continue
        f = h.frames[-1]
        edges = c.cfg.out_edges[f.pos]
        if len(edges) != 1:
            continue
        e = edges[0]
        if e.kind == ENTER:
            try:
                owners = rt.block_target_owners(c, h, e)
                c2 = em.try_reserve(c, hid, owners, e.guard)
            except EvalFault as ex:
                label = f"reserve(h{hid},fault)"
                found.append(
                    Successor(SyncAction("reserve", hid, label), _fault_successor(c, hid, str(ex)), 0)
                )
                continue
            if c2 is None:
                continue  # blocked on the reservation
            c2 = _advance_top(c2, hid, e.dst)
            c2, steps = settle(c2, (hid,))
            targets = ",".join(f"h{t}" for t in sorted(owners))
            found.append(
                Successor(SyncAction("reserve", hid, f"reserve(h{hid},[{targets}])"), c2, steps)
            )
        elif e.kind == EXIT:
            c2 = em.end_reservation(c, hid)
            c2 = _advance_top(c2, hid, e.dst)
            c2, steps = settle(c2, (hid,))
            found.append(
                Successor(SyncAction("end_block", hid, f"end_block(h{hid})"), c2, steps)
            )
        elif e.kind == CREATE_SEP:
            new_hid = len(c.handlers)
            c2 = em.spawn_separate(c, hid, e.class_idx, e.slot)
            c2 = _advance_top(c2, hid, e.dst)
            c2, steps = settle(c2, (hid,))
            label = f"spawn(h{hid},{e.method}->h{new_hid})"
            found.append(Successor(SyncAction("spawn", hid, label), c2, steps))
        elif e.kind == COMMAND or e.kind == QUERY:
            target = f.locals[e.target_slot]
            supplier = c.heap[target.oid].owner
            try:
                args = _eval_args(c, h, e)
            except EvalFault as ex:
                kind = "log_command" if e.kind == COMMAND else "log_query"
                found.append(
                    Successor(
                        SyncAction(kind, hid, f"{kind}(h{hid},fault)"),
                        _fault_successor(c, hid, str(ex)),
                        0,
                    )
                )
                continue
            rid = _claiming_rid(h, supplier)
            request = Request(
                "c" if e.kind == COMMAND else "q",
                target.oid,
                e.unit_idx,
                e.method,
                args,
                hid,
                rid,
                h.log_seq,
            )
            if e.kind == COMMAND:
                c2 = em.log_request(c, hid, supplier, request)
                c2 = _advance_top(c2, hid, e.dst)
                c2, steps = settle(c2, (hid,))
                label = f"log_command(h{hid}->h{supplier},{e.method})"
                found.append(Successor(SyncAction("log_command", hid, label, request), c2, steps))
            else:
                c2 = em.log_request(c, hid, supplier, request, await_slot=e.slot)
                c2 = _advance_top(c2, hid, e.dst, clear_temps=False)
                label = f"log_query(h{hid}->h{supplier},{e.method})"
                found.append(Successor(SyncAction("log_query", hid, label, request), c2, 0))
    found.sort(key=lambda s: s.action.sort_key())
    return found
