"""Pluggable execution models: request queues (RQ) and queues of queues (QoQ).

A model governs three things: what it takes to enter a separate block
(reservation), where logged requests go, and which request a supplier may
start next.  RQ gives every handler one lock-protected FIFO; entering a
block acquires all target locks atomically and holds them for the block's
duration.  QoQ gives every handler a FIFO of private subqueues; entering a
block appends a fresh open subqueue per target, and the supplier drains
subqueues completely in the order they were generated.

Both models evaluate a block's wait condition atomically at the
reservation step, reading the target objects' state directly; a false
guard simply disables the reservation in the current configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from scoopbench import runtime as rt
from scoopbench.cfg import EvalFault, UNINIT
from scoopbench.runtime import (
    Configuration,
    Handler,
    HeapObject,
    QoQState,
    Ref,
    Request,
    Reservation,
    RQState,
    Subqueue,
    NO_LOCK,
)

KIND_ORDER = {
    "reserve": 0,
    "log_command": 1,
    "log_query": 2,
    "dequeue": 3,
    "query_return": 4,
    "end_block": 5,
    "spawn": 6,
}


@dataclass(frozen=True)
class SyncAction:
    """One atomic synchronization step, the unit counted as a transition."""

    kind: str
    handler: int
    label: str
    request: object = None  # the Request moved by log/dequeue actions

    def sort_key(self):
        return (KIND_ORDER[self.kind], self.handler, self.label)


def _set_handler(c: Configuration, h: Handler) -> Configuration:
    handlers = list(c.handlers)
    handlers[h.hid] = h
    return replace(c, handlers=tuple(handlers))


def _set_handlers(c: Configuration, hs) -> Configuration:
    handlers = list(c.handlers)
    for h in hs:
        handlers[h.hid] = h
    return replace(c, handlers=tuple(handlers))


class ExecutionModel:
    """Semantic plug-in interface; RQ and QoQ implement it."""

    name = "?"

    def empty_queue(self):
        raise NotImplementedError

    def try_reserve(self, c, client: int, targets, guard=None):
        """Attempt to enter a block reserving `targets` for `client`.

        Returns the new configuration, or None when the reservation is
        currently disabled (lock contention under RQ, or a false guard).
        Raises EvalFault for NULL targets or faulting guards.
        """
        raise NotImplementedError

    def log_request(self, c, client: int, supplier: int, request: Request, await_slot=None):
        raise NotImplementedError

    def dispatch_options(self, c, supplier: int):
        """Dispatchable requests for an idle supplier.

        Returns a list of (variant, request, configuration) triples; the
        configuration has the request popped and the supplier executing its
        body on a fresh stack frame.  Both built-in models return at most
        one option.
        """
        raise NotImplementedError

    def end_reservation(self, c, client: int):
        raise NotImplementedError

    # --- shared behaviour ---

    def _check_guard(self, c, client: int, guard) -> bool:
        if guard is None:
            return True
        return rt.eval_guard(c, c.handlers[client], guard)

    def _push_reservation(self, c, client: int, targets, claimed) -> Configuration:
        h = c.handlers[client]
        res = Reservation(c.next_rid, client, tuple(sorted(targets)), tuple(sorted(claimed)))
        h2 = replace(h, reservations=h.reservations + (res,))
        return replace(_set_handler(c, h2), next_rid=c.next_rid + 1)

    def spawn_separate(self, c, client: int, class_idx: int, dest_slot: int) -> Configuration:
        """Fresh handler owning a fresh default-initialized object."""
        new_hid = len(c.handlers)
        oid = len(c.heap)
        obj = HeapObject(class_idx, new_hid, c.cfg.class_attr_defaults[class_idx])
        client_h = c.handlers[client]
        frame = client_h.frames[-1]
        locals_ = list(frame.locals)
        locals_[dest_slot] = Ref(oid)
        frame2 = replace(frame, locals=tuple(locals_))
        client2 = replace(client_h, frames=client_h.frames[:-1] + (frame2,))
        handlers = list(c.handlers)
        handlers[client] = client2
        handlers.append(Handler(new_hid, (), self.empty_queue()))
        return replace(c, handlers=tuple(handlers), heap=c.heap + (obj,))


class RQModel(ExecutionModel):
    name = "rq"

    def empty_queue(self):
        return rt.EMPTY_RQ

    def try_reserve(self, c, client: int, targets, guard=None):
        client_h = c.handlers[client]
        if rt.unavailable_locks(c, client_h, targets):
            return None
        if not self._check_guard(c, client, guard):
            return None
        claimed = [t for t in targets if c.handlers[t].queue.lock != client]
        updated = []
        for t in claimed:
            th = c.handlers[t]
            updated.append(replace(th, queue=replace(th.queue, lock=client)))
        c2 = _set_handlers(c, updated) if updated else c
        return self._push_reservation(c2, client, targets, claimed)

    def log_request(self, c, client: int, supplier: int, request: Request, await_slot=None):
        sh = c.handlers[supplier]
        if sh.queue.lock != client:
            raise AssertionError(
                f"handler {client} logs on {supplier} without holding its lock"
            )
        c2 = _set_handler(c, replace(sh, queue=replace(sh.queue, fifo=sh.queue.fifo + (request,))))
        return _finish_log(c2, client, supplier, request, await_slot)

    def dispatch_options(self, c, supplier: int):
        q = c.handlers[supplier].queue
        if not q.fifo:
            return []
        request = q.fifo[0]
        sh = c.handlers[supplier]
        sh2 = replace(sh, queue=replace(q, fifo=q.fifo[1:]))
        c2 = _set_handler(c, sh2)
        return [(0, request, _start_request(c2, supplier, request))]

    def end_reservation(self, c, client: int):
        h = c.handlers[client]
        res = h.reservations[-1]
        updated = []
        for t in res.claimed:
            th = c.handlers[t]
            assert th.queue.lock == client
            updated.append(replace(th, queue=replace(th.queue, lock=NO_LOCK)))
        c2 = _set_handlers(c, updated) if updated else c
        return _set_handler(c2, replace(c2.handlers[client], reservations=h.reservations[:-1]))


class QoQModel(ExecutionModel):
    name = "qoq"

    def empty_queue(self):
        return rt.EMPTY_QOQ

    def try_reserve(self, c, client: int, targets, guard=None):
        if not self._check_guard(c, client, guard):
            return None
        client_h = c.handlers[client]
        claimed = [t for t in targets if not rt.holds_lock(client_h, t)]
        updated = []
        for t in claimed:
            th = c.handlers[t]
            sub = Subqueue(client, True, ())
            updated.append(replace(th, queue=QoQState(th.queue.subqueues + (sub,))))
        c2 = _set_handlers(c, updated) if updated else c
        return self._push_reservation(c2, client, targets, claimed)

    def log_request(self, c, client: int, supplier: int, request: Request, await_slot=None):
        sh = c.handlers[supplier]
        subqueues = list(sh.queue.subqueues)
        for i, sq in enumerate(subqueues):
            if sq.owner == client and sq.open:
                subqueues[i] = replace(sq, items=sq.items + (request,))
                break
        else:
            raise AssertionError(f"handler {client} has no open subqueue at {supplier}")
        c2 = _set_handler(c, replace(sh, queue=QoQState(tuple(subqueues))))
        return _finish_log(c2, client, supplier, request, await_slot)

    def dispatch_options(self, c, supplier: int):
        sh = c.handlers[supplier]
        subqueues = sh.queue.subqueues
        # closed empty subqueues are normally stripped eagerly; skip any anyway
        i = 0
        while i < len(subqueues):
            head = subqueues[i]
            if not head.items:
                if head.open:
                    return []  # must wait for its owner; SUBQUEUE-WAIT
                i += 1
                continue
            request = head.items[0]
            rest = head.items[1:]
            if rest or head.open:
                new_subs = subqueues[:i] + (replace(head, items=rest),) + subqueues[i + 1 :]
            else:
                new_subs = subqueues[:i] + subqueues[i + 1 :]
            c2 = _set_handler(c, replace(sh, queue=QoQState(new_subs)))
            return [(0, request, _start_request(c2, supplier, request))]
        return []

    def end_reservation(self, c, client: int):
        h = c.handlers[client]
        res = h.reservations[-1]
        updated = []
        for t in res.claimed:
            th = c.handlers[t]
            subqueues = []
            for sq in th.queue.subqueues:
                if sq.owner == client and sq.open:
                    if sq.items:
                        subqueues.append(replace(sq, open=False))
                    # empty and now closed: strip immediately
                else:
                    subqueues.append(sq)
            updated.append(replace(th, queue=QoQState(tuple(subqueues))))
        c2 = _set_handlers(c, updated) if updated else c
        return _set_handler(c2, replace(c2.handlers[client], reservations=h.reservations[:-1]))


def _finish_log(c: Configuration, client: int, supplier: int, request: Request, await_slot):
    """Client-side effects of logging: stamp bookkeeping, block on queries."""
    ch = c.handlers[client]
    ch2 = replace(ch, log_seq=ch.log_seq + 1)
    if request.kind == "q":
        ch2 = replace(ch2, awaiting=(supplier, await_slot))
    return _set_handler(c, ch2)


def _start_request(c: Configuration, supplier: int, request: Request) -> Configuration:
    """Push a frame executing the request body on the supplier."""
    unit = c.cfg.units[request.unit]
    locals_ = request.args + (UNINIT,) * (unit.n_locals - len(request.args))
    frame = rt.Frame(
        unit=request.unit,
        pos=unit.initial,
        locals=locals_,
        temps=(None,) * unit.n_temps,
        loops=(-1,) * unit.n_loops,
        self_oid=request.target,
        origin=(request.client, request.kind),
    )
    sh = c.handlers[supplier]
    return _set_handler(c, replace(sh, frames=sh.frames + (frame,)))


_MODELS = {"rq": RQModel(), "qoq": QoQModel()}


def get_model(model) -> ExecutionModel:
    if isinstance(model, ExecutionModel):
        return model
    try:
        return _MODELS[model]
    except KeyError:
        raise ValueError(f"unknown execution model {model!r} (expected rq or qoq)")


# Module-level operation forms; each dispatches on the model token.


def try_reserve(c, client, targets, guard=None, model="rq"):
    return get_model(model).try_reserve(c, client, targets, guard)


def log_request(c, client, supplier, request, model="rq", await_slot=None):
    return get_model(model).log_request(c, client, supplier, request, await_slot)


def next_request(c, supplier, model="rq"):
    """Pop the next dispatchable request, or None when the supplier stalls."""
    options = get_model(model).dispatch_options(c, supplier)
    if not options:
        return None
    _, request, c2 = options[0]
    return request, c2


def end_reservation(c, client, model="rq"):
    return get_model(model).end_reservation(c, client)


def spawn_separate(c, client, class_idx, dest_slot, model="rq"):
    return get_model(model).spawn_separate(c, client, class_idx, dest_slot)
