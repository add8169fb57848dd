"""Error rules: detectors that match a configuration exactly when it
violates a property, plus the trace-level order-guarantee verifier.

A detector returns a witness if and only if the property is violated; the
witness carries re-checkable evidence.  DEADLOCK matches wait-edge cycles
(lock waits under RQ, query waits under either model, and subqueue waits
under QoQ, which participate because a supplier parked at an open empty
head subqueue whose owner is transitively blocked can never progress).
STUCK matches quiescent non-terminal configurations not classified as
deadlock.  CONFLICTING-RESERVATION generalizes the adjacent-philosophers
rule: two clients' open reservations sharing a target handler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from scoopbench import runtime as rt
from scoopbench import scheduler
from scoopbench.runtime import Configuration

DEADLOCK = "DEADLOCK"
STUCK = "STUCK"
CONFLICTING = "CONFLICTING-RESERVATION"
ORDER_VIOLATION = "ORDER-VIOLATION"
RUNTIME_ERROR = "RUNTIME-ERROR"

DETECTOR_NAMES = ("deadlock", "stuck", "conflicting-reservation", "order-guarantee")
DEFAULT_DETECTORS = ("deadlock", "stuck")

KIND_OF_DETECTOR = {
    "deadlock": DEADLOCK,
    "stuck": STUCK,
    "conflicting-reservation": CONFLICTING,
    "order-guarantee": ORDER_VIOLATION,
}


@dataclass
class ErrorWitness:
    kind: str
    config: Configuration
    evidence: tuple
    key: object = None  # canonical state digest, filled by the explorer
    depth: int = 0
    trace: Optional[tuple] = None  # explicit trace, for verifier witnesses

    def summary(self) -> str:
        if self.kind == DEADLOCK:
            cycle = " -> ".join(f"h{a}[{k}]" for a, _b, k in self.evidence)
            last = self.evidence[-1][1]
            return f"wait cycle {cycle} -> h{last}"
        if self.kind == STUCK:
            return "no enabled action in a non-terminal configuration"
        if self.kind == CONFLICTING:
            c1, r1, c2, r2, t = self.evidence
            return f"open reservations of h{c1} and h{c2} both target h{t}"
        if self.kind == ORDER_VIOLATION:
            supplier, rid, seq, reason = self.evidence
            return f"supplier h{supplier}: {reason} (reservation {rid}, seq {seq})"
        if self.kind == RUNTIME_ERROR:
            hid, msg = self.evidence
            return f"h{hid}: {msg}"
        return str(self.evidence)


def _find_cycle(edges):
    """One cycle in a directed graph given as (src, dst, kind) triples."""
    adjacency = {}
    for e in edges:
        adjacency.setdefault(e[0], []).append(e)
    state = {}  # node -> 1 visiting | 2 done
    for start in sorted(adjacency):
        if start in state:
            continue
        stack = [(start, iter(adjacency.get(start, ())))]
        state[start] = 1
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for e in it:
                dst = e[1]
                mark = state.get(dst)
                if mark == 1:
                    cycle = [e]
                    for pe in reversed(path):
                        if cycle[0][0] == dst:
                            break
                        cycle.insert(0, pe)
                    return tuple(cycle)
                if mark is None:
                    state[dst] = 1
                    path.append(e)
                    stack.append((dst, iter(adjacency.get(dst, ()))))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
                if path:
                    path.pop()
    return None


def detect_deadlock(c: Configuration) -> Optional[ErrorWitness]:
    """Witness iff the derived wait-edge graph contains a cycle."""
    if c.fault is not None:
        return None
    edges = rt.wait_edges(c)
    if not edges:
        return None
    cycle = _find_cycle(edges)
    if cycle is None:
        return None
    return ErrorWitness(DEADLOCK, c, cycle)


def detect_stuck(c: Configuration, successors_empty: bool) -> Optional[ErrorWitness]:
    """Quiescent, not terminal, and not a wait cycle: a generic stuck state."""
    if not successors_empty or c.fault is not None:
        return None
    if rt.is_terminal(c):
        return None
    if detect_deadlock(c) is not None:
        return None
    return ErrorWitness(STUCK, c, ())


def detect_conflicting_reservation(c: Configuration) -> Optional[ErrorWitness]:
    """Two distinct clients' open reservations share a target handler."""
    if c.fault is not None:
        return None
    holder = {}
    for h in c.handlers:
        for r in h.reservations:
            for t in r.targets:
                prev = holder.get(t)
                if prev is not None and prev[0] != r.client:
                    return ErrorWitness(
                        CONFLICTING, c, (prev[0], prev[1], r.client, r.rid, t)
                    )
                if prev is None:
                    holder[t] = (r.client, r.rid)
    return None


def detect_runtime_error(c: Configuration) -> Optional[ErrorWitness]:
    if c.fault is None:
        return None
    return ErrorWitness(RUNTIME_ERROR, c, c.fault)


# ---------------------------------------------------------------------------
# Order-guarantee verification
# ---------------------------------------------------------------------------
#
# One client's requests within one reservation must be dispatched
# contiguously and in program order at each supplier.  This is a property
# of dispatch histories, not of single configurations, so the verifier
# replays the reachable transitions with per-supplier dispatch bookkeeping
# carried alongside each configuration.


def _queued_rids(c: Configuration) -> set:
    rids = set()
    for h in c.handlers:
        q = h.queue
        if type(q) is rt.RQState:
            for r in q.fifo:
                rids.add(r.rid)
        else:
            for sq in q.subqueues:
                for r in sq.items:
                    rids.add(r.rid)
        for r in h.reservations:
            rids.add(r.rid)
    return rids


def _meta_after_dequeue(meta: tuple, supplier: int, request, c_next: Configuration):
    """Advance dispatch bookkeeping; returns (new meta, violation reason)."""
    entries = dict(meta)
    active, last_seq, closed = entries.get(supplier, (None, -1, frozenset()))
    if request.rid == active:
        if request.seq <= last_seq:
            return meta, "requests dispatched out of program order"
        entries[supplier] = (active, request.seq, closed)
    elif request.rid in closed:
        return meta, "reservation segment resumed after foreign requests"
    else:
        if active is not None:
            closed = closed | {active}
        live = _queued_rids(c_next)
        closed = frozenset(r for r in closed if r in live)
        entries[supplier] = (request.rid, request.seq, closed)
    return tuple(sorted(entries.items())), None


def verify_order_guarantee(result) -> list:
    """Replay all reachable transitions checking per-supplier dispatch order.

    Expected to return no witnesses under both built-in models; a mutated
    dispatch strategy (test double) is the intended positive case.
    """
    from scoopbench import explorer as ex

    model = result.exec_model
    seen = set()
    init = scheduler.local_fixpoint(rt.initial_configuration(result.cfg_model, model))
    init_key = (ex.state_digest(init), ())
    seen.add(init_key)
    frontier = [(init, (), ())]  # config, meta, trace
    witnesses = []
    reported = set()
    budget = result.max_states
    while frontier:
        next_frontier = []
        for c, meta, trace in frontier:
            if c.fault is not None:
                continue
            for succ in scheduler.successors(c, model):
                new_meta = meta
                label = succ.action.label
                if succ.action.kind == "dequeue":
                    request = succ.action.request
                    new_meta, reason = _meta_after_dequeue(
                        meta, succ.action.handler, request, succ.config
                    )
                    if reason is not None:
                        evidence = (succ.action.handler, request.rid, request.seq, reason)
                        dedup = (succ.action.handler, reason, request.rid)
                        if dedup not in reported:
                            reported.add(dedup)
                            witnesses.append(
                                ErrorWitness(
                                    ORDER_VIOLATION,
                                    succ.config,
                                    evidence,
                                    depth=len(trace) + 1,
                                    trace=trace + (label,),
                                )
                            )
                        continue
                key = (ex.state_digest(succ.config), new_meta)
                if key in seen:
                    continue
                if len(seen) >= budget:
                    return witnesses
                seen.add(key)
                next_frontier.append((succ.config, new_meta, trace + (label,)))
        frontier = next_frontier
    return witnesses
