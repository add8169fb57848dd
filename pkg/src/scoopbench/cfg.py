"""Control-flow graph construction from validated programs.

Each executable unit (the root body and every method body) becomes a chain
of states connected by edges that each carry exactly one primitive action.
Query calls embedded in expressions are pulled out into their own
`query-call` edges that deposit the result into a temporary slot of the
current stack frame; the residual expression reads the slot.  Separate
blocks contribute an enter/exit edge pair, with the guard attached to the
enter edge as data.  Loops stay folded: a `loop-init` edge seeds a counter
in the frame, a branch state tests it, and a `loop-step` edge decrements
it on the back edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from scoopbench import lang
from scoopbench.lang import (
    Assign,
    BinOp,
    BoolLit,
    Call,
    CreateLocal,
    CreateSeparate,
    If,
    IntLit,
    Name,
    NotOp,
    QueryCall,
    Repeat,
    SeparateBlock,
    TempRef,
    ValidatedProgram,
)

# Edge kinds.  'command' and 'query' carry call payloads; whether the call
# is a local step or a logged request is decided at run time by target
# ownership.
ENTER = "separate-enter"
EXIT = "separate-exit"
CREATE_LOCAL = "create-local"
CREATE_SEP = "create-separate"
ASSIGN = "assign"
COMMAND = "command-call"
QUERY = "query-call"
BRANCH_TRUE = "branch-true"
BRANCH_FALSE = "branch-false"
LOOP_INIT = "loop-init"
LOOP_STEP = "loop-step"
JOIN = "join"
RETURN = "unit-return"

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class EvalFault(Exception):
    """Runtime fault raised while evaluating a compiled expression."""


@dataclass(frozen=True)
class Edge:
    kind: str
    src: int
    dst: int
    label: str
    # payload fields; which ones are meaningful depends on kind
    expr: Optional[Callable] = field(default=None, compare=False)
    dest: Optional[tuple] = None  # assignment destination ('local'|'attr', idx)
    slot: int = -1  # local slot (create), temp slot (query dest), loop index
    class_idx: int = -1
    target_slot: int = -1
    unit_idx: int = -1
    method: str = ""
    args: tuple = field(default=(), compare=False)  # compiled arg expressions
    block_targets: tuple = ()  # local slots listed by a separate block
    target_names: tuple = ()
    guard: object = field(default=None, compare=False)  # guard AST, enter edges only
    count: int = 0  # loop-init


@dataclass
class UnitCfg:
    index: int
    name: str
    initial: int
    final: int
    states: list
    n_locals: int = 0
    n_params: int = 0
    n_temps: int = 0
    n_loops: int = 0
    result_slot: int = -1
    kind: str = "command"  # 'root' | 'command' | 'query'


@dataclass
class CfgModel:
    vp: ValidatedProgram
    units: list  # UnitCfg, unit 0 is root
    out_edges: list  # state id -> tuple of Edge
    state_unit: list  # state id -> unit index
    class_names: list
    class_attr_names: list  # class idx -> tuple of attr names
    class_attr_defaults: list  # class idx -> tuple of default values
    unit_of_method: dict  # (class name, method name) -> unit idx

    @property
    def n_states(self):
        return len(self.out_edges)

    def unit_of_state(self, state: int) -> UnitCfg:
        return self.units[self.state_unit[state]]


# ---------------------------------------------------------------------------
# Expression compilation
# ---------------------------------------------------------------------------
#
# Compiled expressions are closures over (locals, temps, loops, heap,
# self_oid).  By construction they contain no query calls: the builder has
# already rewritten those into TempRef reads.


def _compile_expr(e, res: dict) -> Callable:
    if isinstance(e, IntLit):
        v = e.value
        return lambda lo, te, he, se: v
    if isinstance(e, BoolLit):
        v = e.value
        return lambda lo, te, he, se: v
    if isinstance(e, TempRef):
        i = e.slot
        return lambda lo, te, he, se: te[i]
    if isinstance(e, Name):
        kind, idx = res[id(e)]
        if kind == "local":
            def read_local(lo, te, he, se, i=idx, name=e.name):
                v = lo[i]
                if v is UNINIT:
                    raise EvalFault(f"read of uninitialized local {name}")
                return v
            return read_local
        def read_attr(lo, te, he, se, i=idx):
            return he[se].attrs[i]
        return read_attr
    if isinstance(e, NotOp):
        f = _compile_expr(e.operand, res)
        return lambda lo, te, he, se: not f(lo, te, he, se)
    if isinstance(e, BinOp):
        lf = _compile_expr(e.left, res)
        rf = _compile_expr(e.right, res)
        op = e.op
        if op == "+" or op == "-":
            def arith(lo, te, he, se, lf=lf, rf=rf, neg=(op == "-")):
                a, b = lf(lo, te, he, se), rf(lo, te, he, se)
                v = a - b if neg else a + b
                if v < INT64_MIN or v > INT64_MAX:
                    raise EvalFault("arithmetic overflow outside 64-bit signed range")
                return v
            return arith
        if op == "=":
            return lambda lo, te, he, se: lf(lo, te, he, se) == rf(lo, te, he, se)
        if op == "<":
            return lambda lo, te, he, se: lf(lo, te, he, se) < rf(lo, te, he, se)
        if op == "<=":
            return lambda lo, te, he, se: lf(lo, te, he, se) <= rf(lo, te, he, se)
        if op == "and":
            return lambda lo, te, he, se: lf(lo, te, he, se) and rf(lo, te, he, se)
        if op == "or":
            return lambda lo, te, he, se: lf(lo, te, he, se) or rf(lo, te, he, se)
    raise TypeError(f"cannot compile {e!r}")


class _Uninit:
    __slots__ = ()

    def __repr__(self):
        return "<uninit>"


UNINIT = _Uninit()


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


class _UnitBuilder:
    def __init__(self, model_states, unit: UnitCfg, vp: ValidatedProgram, unit_of_method):
        self.out = model_states  # shared dict state -> list of edges
        self.unit = unit
        self.vp = vp
        self.res = vp.resolution
        self.unit_of_method = unit_of_method
        self.state_unit = []
        self.next_temp = 0
        self.max_temp = 0
        self.n_loops = 0
        self.block_depth = 0

    def new_state(self) -> int:
        s = len(self.out)
        self.out.append([])
        self.state_unit.append(self.unit.index)
        return s

    def edge(self, e: Edge):
        self.out[e.src].append(e)

    # Pull query calls out of an expression, emitting query-call edges in
    # left-to-right evaluation order.  Returns (state, residual expr).
    def prep_expr(self, cur: int, e):
        if isinstance(e, (IntLit, BoolLit, Name, TempRef)):
            return cur, e
        if isinstance(e, QueryCall):
            args = []
            for a in e.args:
                cur, ra = self.prep_expr(cur, a)
                args.append(ra)
            slot = self.next_temp
            self.next_temp += 1
            self.max_temp = max(self.max_temp, self.next_temp)
            _, tslot, cls, mname, unit_idx = self.res[id(e)]
            nxt = self.new_state()
            self.edge(
                Edge(
                    QUERY,
                    cur,
                    nxt,
                    f"{QUERY} {e.target}.{mname}",
                    slot=slot,
                    target_slot=tslot,
                    unit_idx=unit_idx,
                    method=mname,
                    args=tuple(self.compile(a) for a in args),
                )
            )
            return nxt, TempRef(slot)
        if isinstance(e, NotOp):
            cur, ro = self.prep_expr(cur, e.operand)
            return cur, NotOp(ro, e.pos)
        if isinstance(e, BinOp):
            cur, lo_ = self.prep_expr(cur, e.left)
            cur, ro_ = self.prep_expr(cur, e.right)
            return cur, BinOp(e.op, lo_, ro_, e.pos)
        raise TypeError(f"unknown expression {e!r}")

    def compile(self, e) -> Callable:
        return _compile_expr(e, self.res)

    def build(self, body, result_expr) -> tuple:
        initial = self.new_state()
        cur = self.stmts(initial, body)
        if result_expr is not None:
            cur = self.assign_result(cur, result_expr)
        final = self.new_state()
        self.edge(Edge(RETURN, cur, final, RETURN))
        return initial, final

    def assign_result(self, cur, expr):
        cur, residual = self.prep_expr(cur, expr)
        nxt = self.new_state()
        self.edge(
            Edge(
                ASSIGN,
                cur,
                nxt,
                f"{ASSIGN} result",
                expr=self.compile(residual),
                dest=("local", self.unit.result_slot),
            )
        )
        self.next_temp = 0
        return nxt

    def stmts(self, cur, body) -> int:
        for s in body:
            cur = self.stmt(cur, s)
        return cur

    def stmt(self, cur, s) -> int:
        if isinstance(s, CreateLocal) or isinstance(s, CreateSeparate):
            _, slot = self.res[id(s)]
            cls = self.vp.classes[s.class_name]
            kind = CREATE_SEP if isinstance(s, CreateSeparate) else CREATE_LOCAL
            nxt = self.new_state()
            self.edge(
                Edge(
                    kind,
                    cur,
                    nxt,
                    f"{kind} {s.var}:{s.class_name}",
                    slot=slot,
                    class_idx=cls.index,
                    method=s.class_name,
                )
            )
            return nxt
        if isinstance(s, Assign):
            cur, residual = self.prep_expr(cur, s.expr)
            nxt = self.new_state()
            self.edge(
                Edge(
                    ASSIGN,
                    cur,
                    nxt,
                    f"{ASSIGN} {s.target}",
                    expr=self.compile(residual),
                    dest=self.res[id(s)],
                )
            )
            self.next_temp = 0
            return nxt
        if isinstance(s, Call):
            args = []
            for a in s.args:
                cur, ra = self.prep_expr(cur, a)
                args.append(ra)
            _, tslot, cls, mname, unit_idx = self.res[id(s)]
            nxt = self.new_state()
            self.edge(
                Edge(
                    COMMAND,
                    cur,
                    nxt,
                    f"{COMMAND} {s.target}.{mname}",
                    target_slot=tslot,
                    unit_idx=unit_idx,
                    method=mname,
                    args=tuple(self.compile(a) for a in args),
                )
            )
            self.next_temp = 0
            return nxt
        if isinstance(s, SeparateBlock):
            _, slots = self.res[id(s)]
            self.block_depth += 1
            nxt = self.new_state()
            self.edge(
                Edge(
                    ENTER,
                    cur,
                    nxt,
                    f"{ENTER} [{', '.join(s.targets)}]"
                    + (" require" if s.guard is not None else ""),
                    block_targets=slots,
                    target_names=tuple(s.targets),
                    guard=s.guard,
                )
            )
            cur = self.stmts(nxt, s.body)
            out = self.new_state()
            self.edge(Edge(EXIT, cur, out, f"{EXIT} [{', '.join(s.targets)}]"))
            self.block_depth -= 1
            return out
        if isinstance(s, If):
            cur, residual = self.prep_expr(cur, s.cond)
            cond = self.compile(residual)
            then_start = self.new_state()
            else_start = self.new_state()
            self.edge(Edge(BRANCH_TRUE, cur, then_start, BRANCH_TRUE, expr=cond))
            self.edge(Edge(BRANCH_FALSE, cur, else_start, BRANCH_FALSE, expr=cond))
            self.next_temp = 0
            then_end = self.stmts(then_start, s.then_body)
            else_end = self.stmts(else_start, s.else_body)
            join = self.new_state()
            # connect both arms to the join with bookkeeping edges
            self.edge(Edge(JOIN, then_end, join, JOIN))
            self.edge(Edge(JOIN, else_end, join, JOIN))
            return join
        if isinstance(s, Repeat):
            loop_idx = self.n_loops
            self.n_loops += 1
            test = self.new_state()
            self.edge(
                Edge(LOOP_INIT, cur, test, f"{LOOP_INIT} {s.count}", slot=loop_idx, count=s.count)
            )
            body_start = self.new_state()
            after = self.new_state()
            self.edge(Edge(BRANCH_TRUE, test, body_start, f"{BRANCH_TRUE} loop", slot=loop_idx))
            self.edge(Edge(BRANCH_FALSE, test, after, f"{BRANCH_FALSE} loop", slot=loop_idx))
            body_end = self.stmts(body_start, s.body)
            self.edge(Edge(LOOP_STEP, body_end, test, LOOP_STEP, slot=loop_idx))
            return after
        raise TypeError(f"unknown statement {s!r}")


def build_cfg(vp: ValidatedProgram) -> CfgModel:
    """Compile a validated program into its control-flow graph."""
    out_edges: list = []
    state_unit: list = []
    units = []
    unit_of_method = {}
    for u in vp.units:
        kind = "root" if u.method is None else u.method.kind
        units.append(
            UnitCfg(
                u.index,
                u.name,
                -1,
                -1,
                [],
                n_locals=len(u.locals),
                n_params=u.n_params,
                result_slot=-1 if u.result_slot is None else u.result_slot,
                kind=kind,
            )
        )
        if u.method is not None:
            unit_of_method[(u.class_name, u.method.name)] = u.index

    for u, unit_cfg in zip(vp.units, units):
        b = _UnitBuilder(out_edges, unit_cfg, vp, unit_of_method)
        body = vp.program.root if u.method is None else u.method.body
        result_expr = None if u.method is None else u.method.result_expr
        start = len(out_edges)
        initial, final = b.build(body, result_expr)
        state_unit.extend(b.state_unit)
        unit_cfg.initial = initial
        unit_cfg.final = final
        unit_cfg.states = list(range(start, len(out_edges)))
        unit_cfg.n_temps = b.max_temp
        unit_cfg.n_loops = b.n_loops

    class_names = [c.decl.name for c in vp.class_list]
    attr_names = []
    attr_defaults = []
    for c in vp.class_list:
        attr_names.append(tuple(c.attr_names))
        defaults = []
        for t in c.attr_types:
            if t.base == "INTEGER":
                defaults.append(0)
            elif t.base == "BOOLEAN":
                defaults.append(False)
            else:
                defaults.append(None)
        attr_defaults.append(tuple(defaults))

    model = CfgModel(
        vp,
        units,
        [tuple(es) for es in out_edges],
        state_unit,
        class_names,
        attr_names,
        attr_defaults,
        unit_of_method,
    )
    return model


def compile_program(source: str) -> CfgModel:
    """Convenience pipeline: parse, validate, and build the CFG."""
    return build_cfg(lang.validate(lang.parse(source)))


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_cfg_dot(m: CfgModel) -> str:
    """Render the CFG as a DOT digraph, one cluster per unit."""
    lines = ["digraph cfg {", "  rankdir=TB;", '  node [shape=circle, label=""];']
    for u in m.units:
        lines.append(f"  subgraph cluster_{u.index} {{")
        lines.append(f'    label="{_dot_escape(u.name)}";')
        for s in u.states:
            attrs = []
            if s == u.initial:
                attrs.append('shape=doublecircle, label="I", style=bold')
            elif s == u.final:
                attrs.append('shape=doublecircle, label="F"')
            lines.append(f"    s{s}" + (f" [{attrs[0]}]" if attrs else "") + ";")
        for s in u.states:
            for e in m.out_edges[s]:
                lines.append(f'    s{e.src} -> s{e.dst} [label="{_dot_escape(e.label)}"];')
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
