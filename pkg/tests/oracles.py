"""Independent brute-force interleaving enumerators for three micro-programs.

These hand-coded transition systems mirror the documented semantics of the
two execution models directly (lock tables, FIFOs, subqueues) without
touching the package's runtime.  Exploration counts from the real engine
must match these exactly.  States are ad-hoc tuples, deduplicated the same
way the engine deduplicates configurations; every (state, action) pair
counts as one transition.

Micro-programs:

  micro_two_commands   root spawns one counter and logs two increments on
                       it inside one block (7 sync actions overall).

  micro_two_clients    root spawns a counter and two workers; each worker
                       logs two increments on the counter in its own block.

  micro_query_if       root spawns a cell, logs a put command, then a get
                       query whose result feeds an if condition.
"""

from collections import deque


def count_space(initial, successors_fn):
    """BFS over a function state -> {label: next state}."""
    seen = {initial}
    frontier = deque([initial])
    transitions = 0
    while frontier:
        state = frontier.popleft()
        for _label, nxt in sorted(successors_fn(state).items()):
            transitions += 1
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen), transitions


# ---------------------------------------------------------------------------
# micro_two_commands: root pc 0 spawn, 1 reserve, 2 log, 3 log, 4 end, 5 done
# ---------------------------------------------------------------------------


def two_commands_rq_initial():
    # (root pc, counter value or None before spawn, queued increments, lock)
    return (0, None, 0, None)


def two_commands_rq(state):
    pc, n, queued, lock = state
    out = {}
    if pc == 0:
        out["spawn"] = (1, 0, 0, None)
    elif pc == 1:
        if lock is None:
            out["reserve"] = (2, n, queued, "root")
    elif pc in (2, 3):
        out["log"] = (pc + 1, n, queued + 1, lock)
    elif pc == 4:
        out["end"] = (5, n, queued, None)
    if pc >= 1 and queued > 0:
        out["dequeue"] = (pc, n + 1, queued - 1, lock)
    return out


def two_commands_qoq_initial():
    # (root pc, counter value, subqueue); subqueue None | (open flag, items)
    return (0, None, None)


def two_commands_qoq(state):
    pc, n, subq = state
    out = {}
    if pc == 0:
        out["spawn"] = (1, 0, None)
    elif pc == 1:
        out["reserve"] = (2, n, (True, 0))
    elif pc in (2, 3):
        open_, items = subq
        out["log"] = (pc + 1, n, (open_, items + 1))
    elif pc == 4:
        open_, items = subq
        out["end"] = (5, n, None if items == 0 else (False, items))
    if subq is not None:
        open_, items = subq
        if items > 0:
            left = items - 1
            nsub = None if (left == 0 and not open_) else (open_, left)
            out["dequeue"] = (pc, n + 1, nsub)
    return out


# ---------------------------------------------------------------------------
# micro_two_clients
# ---------------------------------------------------------------------------
#
# Handlers: root, s (counter), a, b (workers).  Root: three spawns, one
# block reserving a and b, two poke logs, end.  Worker states: None (not
# yet logged), 'q' (poke queued), 0 before reserving s, 1 and 2 before the
# two inc logs, 3 before its end, 'd' done.


def two_clients_rq_initial():
    # (root pc, a, b, n, s fifo of client tags, s lock, a lock, b lock)
    return (0, None, None, None, (), None, None, None)


def two_clients_rq(state):
    pc, a, b, n, fifo, slock, alock, block = state
    out = {}
    if pc == 0:
        out["spawn_s"] = (1, a, b, 0, fifo, slock, alock, block)
    elif pc == 1:
        out["spawn_a"] = (2, a, b, n, fifo, slock, alock, block)
    elif pc == 2:
        out["spawn_b"] = (3, a, b, n, fifo, slock, alock, block)
    elif pc == 3:
        if alock is None and block is None:
            out["reserve_ab"] = (4, a, b, n, fifo, slock, "root", "root")
    elif pc == 4:
        out["log_poke_a"] = (5, "q", b, n, fifo, slock, alock, block)
    elif pc == 5:
        out["log_poke_b"] = (6, a, "q", n, fifo, slock, alock, block)
    elif pc == 6:
        out["end_root"] = (7, a, b, n, fifo, slock, None, None)

    for name, w in (("a", a), ("b", b)):
        widx = 1 if name == "a" else 2
        if w == "q":
            s2 = list(state)
            s2[widx] = 0
            out[f"dequeue_poke_{name}"] = tuple(s2)
        elif w == 0:
            if slock is None:
                s2 = list(state)
                s2[widx] = 1
                s2[5] = name
                out[f"reserve_s_{name}"] = tuple(s2)
        elif w in (1, 2):
            s2 = list(state)
            s2[widx] = w + 1
            s2[4] = fifo + (name,)
            out[f"log_inc_{name}{w}"] = tuple(s2)
        elif w == 3:
            s2 = list(state)
            s2[widx] = "d"
            s2[5] = None
            out[f"end_{name}"] = tuple(s2)
    if fifo:
        out["dequeue_inc"] = (pc, a, b, n + 1, fifo[1:], slock, alock, block)
    return out


def two_clients_qoq_initial():
    # (root pc, a, b, n, s subqueues, a subqueue, b subqueue)
    # s subqueues: tuple of (owner, open, item count); worker subqueues are
    # owned by root and hold at most the one queued poke.
    return (0, None, None, None, (), None, None)


def _close_subqueue(sq):
    if sq is None:
        return None
    open_, items = sq
    return None if items == 0 else (False, items)


def two_clients_qoq(state):
    pc, a, b, n, subs, asub, bsub = state
    out = {}
    if pc == 0:
        out["spawn_s"] = (1, a, b, 0, subs, asub, bsub)
    elif pc == 1:
        out["spawn_a"] = (2, a, b, n, subs, asub, bsub)
    elif pc == 2:
        out["spawn_b"] = (3, a, b, n, subs, asub, bsub)
    elif pc == 3:
        out["reserve_ab"] = (4, a, b, n, subs, (True, 0), (True, 0))
    elif pc == 4:
        out["log_poke_a"] = (5, "q", b, n, subs, (asub[0], 1), bsub)
    elif pc == 5:
        out["log_poke_b"] = (6, a, "q", n, subs, asub, (bsub[0], 1))
    elif pc == 6:
        out["end_root"] = (7, a, b, n, subs, _close_subqueue(asub), _close_subqueue(bsub))

    for name, w, wsub in (("a", a, asub), ("b", b, bsub)):
        widx = 1 if name == "a" else 2
        sidx = 5 if name == "a" else 6
        if w == "q":
            open_, items = wsub
            left = items - 1
            s2 = list(state)
            s2[widx] = 0
            s2[sidx] = None if (left == 0 and not open_) else (open_, left)
            out[f"dequeue_poke_{name}"] = tuple(s2)
        elif w == 0:
            s2 = list(state)
            s2[widx] = 1
            s2[4] = subs + ((name, True, 0),)
            out[f"reserve_s_{name}"] = tuple(s2)
        elif w in (1, 2):
            s2 = list(state)
            s2[widx] = w + 1
            s2[4] = tuple(
                (o, op, k + 1) if (o == name and op) else (o, op, k) for o, op, k in subs
            )
            out[f"log_inc_{name}{w}"] = tuple(s2)
        elif w == 3:
            subs2 = []
            for o, op, k in subs:
                if o == name and op:
                    if k > 0:
                        subs2.append((o, False, k))  # closed; stripped when drained
                else:
                    subs2.append((o, op, k))
            s2 = list(state)
            s2[widx] = "d"
            s2[4] = tuple(subs2)
            out[f"end_{name}"] = tuple(s2)
    if subs:
        o, op, k = subs[0]
        if k > 0:
            left = k - 1
            nsubs = subs[1:] if (left == 0 and not op) else ((o, op, left),) + subs[1:]
            out["dequeue_inc"] = (pc, a, b, n + 1, nsubs, asub, bsub)
        # an open empty head subqueue stalls the supplier: no action
    return out


# ---------------------------------------------------------------------------
# micro_query_if
# ---------------------------------------------------------------------------
#
# Root: spawn cell, reserve, log put(3), log get and block; on the query
# return the branch is evaluated locally and the root stops at the block
# exit; end; done.  Cell: dequeue put (v := 3), dequeue get (answer
# pending), then hand the answer back.


def query_if_rq_initial():
    # (root pc, v, fifo, lock, answer pending)
    return (0, None, (), None, False)


def query_if_rq(state):
    pc, v, fifo, lock, pending = state
    out = {}
    if pc == 0:
        out["spawn"] = (1, 0, (), None, False)
    elif pc == 1:
        if lock is None:
            out["reserve"] = (2, v, fifo, "root", pending)
    elif pc == 2:
        out["log_put"] = (3, v, fifo + ("put",), lock, pending)
    elif pc == 3:
        out["log_get"] = ("w", v, fifo + ("get",), lock, pending)
    elif pc == 4:
        out["end"] = (5, v, fifo, None, pending)
    if fifo and not pending:
        head, rest = fifo[0], fifo[1:]
        if head == "put":
            out["dequeue_put"] = (pc, 3, rest, lock, pending)
        else:
            out["dequeue_get"] = (pc, v, rest, lock, True)
    if pending:
        out["query_return"] = (4, v, fifo, lock, False)
    return out


def query_if_qoq_initial():
    # (root pc, v, subqueue, answer pending); subqueue None | (open, items)
    return (0, None, None, False)


def query_if_qoq(state):
    pc, v, subq, pending = state
    out = {}
    if pc == 0:
        out["spawn"] = (1, 0, None, False)
    elif pc == 1:
        out["reserve"] = (2, v, (True, ()), False)
    elif pc == 2:
        out["log_put"] = (3, v, (subq[0], subq[1] + ("put",)), pending)
    elif pc == 3:
        out["log_get"] = ("w", v, (subq[0], subq[1] + ("get",)), pending)
    elif pc == 4:
        open_, items = subq
        out["end"] = (5, v, None if not items else (False, items), pending)
    if subq is not None and subq[1] and not pending:
        open_, items = subq
        head, rest = items[0], items[1:]
        nsub = None if (not rest and not open_) else (open_, rest)
        if head == "put":
            out["dequeue_put"] = (pc, 3, nsub, pending)
        else:
            out["dequeue_get"] = (pc, v, nsub, True)
    if pending:
        out["query_return"] = (4, v, subq, False)
    return out


MICRO_ORACLES = {
    "micro_two_commands": {
        "rq": (two_commands_rq_initial, two_commands_rq),
        "qoq": (two_commands_qoq_initial, two_commands_qoq),
    },
    "micro_two_clients": {
        "rq": (two_clients_rq_initial, two_clients_rq),
        "qoq": (two_clients_qoq_initial, two_clients_qoq),
    },
    "micro_query_if": {
        "rq": (query_if_rq_initial, query_if_rq),
        "qoq": (query_if_qoq_initial, query_if_qoq),
    },
}


def oracle_counts(program: str, model: str):
    initial_fn, succ_fn = MICRO_ORACLES[program][model]
    return count_space(initial_fn(), succ_fn)
