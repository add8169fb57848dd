"""Exhaustive breadth-first state-space exploration.

States are local-fixpoint configurations deduplicated by canonical key;
transitions are synchronization actions.  Exploration proceeds in waves
(depth layers), which makes multi-worker expansion a pure map over the
frontier followed by a deterministic sequential merge: configuration,
transition, and error counts are identical for any worker count.  States
carrying an error witness are recorded but never expanded, so no stored
state descends from an error state.  Error traces fall out of the
predecessor map and are shortest by BFS construction.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from scoopbench import properties as props
from scoopbench import runtime as rt
from scoopbench import scheduler
from scoopbench.execmodel import get_model
from scoopbench.runtime import Configuration, canonical_key

DEFAULT_MAX_STATES = 5_000_000


def state_digest(c: Configuration) -> bytes:
    """128-bit digest of the canonical key; the explorer's state identity."""
    return hashlib.blake2b(canonical_key(c), digest_size=16).digest()


@dataclass
class Trace:
    actions: tuple  # sync action labels from the initial configuration
    target: bytes  # digest of the configuration the trace leads to


@dataclass
class ExplorationResult:
    model: str
    configurations: int = 0
    transitions: int = 0
    microsteps: int = 0
    errors: list = field(default_factory=list)
    terminal_count: int = 0
    bound_exhausted: bool = False
    duration_ms: float = 0.0
    predecessors: dict = field(default_factory=dict)  # digest -> (pred digest, label)
    depth_of: dict = field(default_factory=dict)
    initial_key: bytes = b""
    # replay context
    cfg_model: object = None
    exec_model: object = None
    max_states: int = DEFAULT_MAX_STATES
    max_depth: object = None
    detectors: tuple = props.DEFAULT_DETECTORS


def _detect_on_store(c: Configuration, detectors):
    w = props.detect_runtime_error(c)
    if w is not None:
        return w
    if "deadlock" in detectors:
        w = props.detect_deadlock(c)
        if w is not None:
            return w
    if "conflicting-reservation" in detectors:
        w = props.detect_conflicting_reservation(c)
        if w is not None:
            return w
    return None


def explore(
    m,
    model="rq",
    max_states: int = DEFAULT_MAX_STATES,
    max_depth=None,
    detectors=props.DEFAULT_DETECTORS,
    workers: int = 1,
    check_commutation: bool = False,
) -> ExplorationResult:
    """Explore the reachable configurations of a compiled program.

    `m` is the CfgModel; `model` an execution model name or instance.
    Bound exhaustion sets a flag on the result instead of failing.  The
    `order-guarantee` detector runs as a trace-level verification pass
    after the exploration itself.
    """
    em = get_model(model)
    started = time.perf_counter()
    result = ExplorationResult(
        model=em.name,
        cfg_model=m,
        exec_model=em,
        max_states=max_states,
        max_depth=max_depth,
        detectors=tuple(detectors),
    )

    init, steps = scheduler.local_fixpoint_counted(rt.initial_configuration(m, em))
    result.microsteps += steps
    init_key = state_digest(init)
    result.initial_key = init_key
    result.depth_of[init_key] = 0
    result.configurations = 1

    frontier = []
    w = _detect_on_store(init, detectors)
    if w is not None:
        w.key = init_key
        result.errors.append(w)
    elif rt.is_terminal(init):
        result.terminal_count += 1
    elif max_depth is not None and max_depth <= 0:
        result.bound_exhausted = True
    else:
        frontier.append((init, init_key, 0))

    def expand(item):
        c, _key, _depth = item
        return scheduler.successors(c, em, check_commutation=check_commutation)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            if pool is not None:
                expanded = list(pool.map(expand, frontier, chunksize=64))
            else:
                expanded = [expand(item) for item in frontier]
            next_frontier = []
            for (c, key, depth), succs in zip(frontier, expanded):
                if not succs:
                    if "stuck" in detectors:
                        w = props.detect_stuck(c, True)
                        if w is not None:
                            w.key = key
                            w.depth = depth
                            result.errors.append(w)
                    continue
                for succ in succs:
                    result.microsteps += succ.microsteps
                    skey = state_digest(succ.config)
                    if skey in result.depth_of:
                        result.transitions += 1
                        continue
                    if result.configurations >= max_states:
                        result.bound_exhausted = True
                        continue
                    result.transitions += 1
                    result.configurations += 1
                    result.depth_of[skey] = depth + 1
                    result.predecessors[skey] = (key, succ.action.label)
                    w = _detect_on_store(succ.config, detectors)
                    if w is not None:
                        w.key = skey
                        w.depth = depth + 1
                        result.errors.append(w)
                        continue
                    if rt.is_terminal(succ.config):
                        result.terminal_count += 1
                        continue
                    if max_depth is not None and depth + 1 >= max_depth:
                        result.bound_exhausted = True
                        continue
                    next_frontier.append((succ.config, skey, depth + 1))
            frontier = next_frontier
    finally:
        if pool is not None:
            pool.shutdown()

    if "order-guarantee" in detectors:
        result.errors.extend(props.verify_order_guarantee(result))

    result.duration_ms = (time.perf_counter() - started) * 1000.0
    return result


def extract_trace(r: ExplorationResult, w) -> Trace:
    """Shortest action sequence from the initial configuration to a witness."""
    if w.trace is not None:
        return Trace(tuple(w.trace), w.key)
    if w.key != r.initial_key and w.key not in r.predecessors:
        raise KeyError("witness state is not part of this exploration")
    labels = []
    key = w.key
    while key != r.initial_key:
        key, label = r.predecessors[key]
        labels.append(label)
    labels.reverse()
    return Trace(tuple(labels), w.key)


def replay_trace(r: ExplorationResult, trace: Trace) -> Configuration:
    """Re-run a trace through the scheduler; returns the final configuration."""
    c = scheduler.local_fixpoint(rt.initial_configuration(r.cfg_model, r.exec_model))
    for label in trace.actions:
        for succ in scheduler.successors(c, r.exec_model):
            if succ.action.label == label:
                c = succ.config
                break
        else:
            raise ValueError(f"trace action {label!r} is not enabled during replay")
    return c
