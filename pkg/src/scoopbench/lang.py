"""Mini concurrent object-oriented language: syntax tree, parser, checker.

The language is a small class-based imperative language in which references
may be declared `separate`, meaning the referenced object lives on its own
handler.  Calls on separate references must happen inside `separate ... do
... end` blocks that reserve the target handlers; an optional `require`
clause on a block expresses a wait condition.

Grammar (whitespace-insensitive, `--` starts a line comment):

    program   := classdecl* "root" stmt* "end"
    classdecl := "class" ID attr* method* "end"
    attr      := "attribute" ID ":" typeref
    method    := ("command" ID params | "query" ID params ":" typeref)
                 "do" stmt* ["result" ":=" expr] "end"
    params    := ["(" ID ":" typeref {"," ID ":" typeref} ")"]
    typeref   := ["separate"] ("INTEGER" | "BOOLEAN" | ID)
    stmt      := "create" ["separate"] ID ":" ID
               | ID ":=" expr
               | ID "." ID args
               | "separate" ID {"," ID} ["require" expr] "do" stmt* "end"
               | "if" expr "then" stmt* ["else" stmt*] "end"
               | "repeat" INT "times" stmt* "end"
    args      := ["(" expr {"," expr} ")"]

Expressions have `or` < `and` < `not` < comparisons (`=`, `<`, `<=`) <
additive (`+`, `-`) < primaries; primaries are integer and boolean
literals, names, qualified query calls `x.method(...)`, and parenthesised
expressions.  Unqualified names resolve to method parameters, created
locals, or attributes of the current object, in that order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

BUILTIN_TYPES = ("INTEGER", "BOOLEAN")

KEYWORDS = frozenset(
    [
        "class", "attribute", "command", "query", "do", "end", "result",
        "create", "separate", "require", "if", "then", "else", "repeat",
        "times", "root", "true", "false", "and", "or", "not",
    ]
)


class ParseError(Exception):
    """Syntax error with position and the set of expected tokens."""

    def __init__(self, message: str, line: int, col: int, expected=()):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)


@dataclass(frozen=True)
class Diagnostic:
    rule: str  # 'a' | 'b' | 'c' | 'name' | 'type' | 'result' | 'block'
    message: str
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}: [{self.rule}] {self.message}"


class ValidationError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        head = "; ".join(str(d) for d in self.diagnostics[:3])
        more = "" if len(self.diagnostics) <= 3 else f" (+{len(self.diagnostics) - 3} more)"
        super().__init__(head + more)


# ---------------------------------------------------------------------------
# Abstract syntax tree
# ---------------------------------------------------------------------------


@dataclass
class TypeRef:
    base: str
    separate: bool = False

    def __str__(self):
        return ("separate " if self.separate else "") + self.base


@dataclass
class Expr:
    pass


@dataclass
class IntLit(Expr):
    value: int
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class BoolLit(Expr):
    value: bool
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Name(Expr):
    """Unqualified name: a parameter, created local, or attribute of self."""

    name: str
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class QueryCall(Expr):
    target: str
    method: str
    args: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class BinOp(Expr):
    op: str  # '+', '-', '=', '<', '<=', 'and', 'or'
    left: Expr = None
    right: Expr = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class NotOp(Expr):
    operand: Expr
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class TempRef(Expr):
    """Synthetic reference to a temporary slot; introduced by the CFG builder."""

    slot: int
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Stmt:
    pass


@dataclass
class CreateLocal(Stmt):
    var: str
    class_name: str
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class CreateSeparate(Stmt):
    var: str
    class_name: str
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Assign(Stmt):
    target: str
    expr: Expr = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Call(Stmt):
    target: str
    method: str
    args: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class SeparateBlock(Stmt):
    targets: list = field(default_factory=list)
    guard: Optional[Expr] = None
    body: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class If(Stmt):
    cond: Expr = None
    then_body: list = field(default_factory=list)
    else_body: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Repeat(Stmt):
    count: int = 0
    body: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Param:
    name: str
    type: TypeRef
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class AttrDecl:
    name: str
    type: TypeRef
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class MethodDecl:
    name: str
    kind: str  # 'command' | 'query'
    params: list = field(default_factory=list)
    result_type: Optional[TypeRef] = None
    body: list = field(default_factory=list)
    result_expr: Optional[Expr] = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class ClassDecl:
    name: str
    attributes: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Program:
    classes: list = field(default_factory=list)
    root: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str
    value: Union[str, int, None]
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<=|[<=+\-.,:()])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {source[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "ws" or kind == "comment":
            pass
        elif kind == "int":
            tokens.append(Token("int", int(text), line, col))
        elif kind == "ident":
            if text in KEYWORDS:
                tokens.append(Token(text, text, line, col))
            else:
                tokens.append(Token("ident", text, line, col))
        else:
            tokens.append(Token(text, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_STMT_STARTERS = ("create", "separate", "if", "repeat", "ident")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def check(self, kind: str) -> bool:
        return self.cur.kind == kind

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        if self.cur.kind != kind:
            self.error((kind,))
        return self.advance()

    def error(self, expected):
        tok = self.cur
        found = tok.kind if tok.value is None else repr(tok.value)
        raise ParseError(
            f"expected {' or '.join(expected)}, found {found}",
            tok.line,
            tok.col,
            expected,
        )

    # --- grammar ---

    def program(self) -> Program:
        classes = []
        while self.check("class"):
            classes.append(self.class_decl())
        self.expect("root")
        body = self.stmts(("end",))
        self.expect("end")
        self.expect("eof")
        return Program(classes=classes, root=body)

    def class_decl(self) -> ClassDecl:
        start = self.expect("class")
        name = self.expect("ident").value
        attributes = []
        while self.check("attribute"):
            pos_tok = self.advance()
            attr_name = self.expect("ident").value
            self.expect(":")
            attributes.append(AttrDecl(attr_name, self.typeref(), (pos_tok.line, pos_tok.col)))
        methods = []
        while self.check("command") or self.check("query"):
            methods.append(self.method())
        self.expect("end")
        return ClassDecl(name, attributes, methods, (start.line, start.col))

    def method(self) -> MethodDecl:
        kind_tok = self.advance()
        kind = kind_tok.kind
        name = self.expect("ident").value
        params = []
        if self.check("("):
            self.advance()
            while not self.check(")"):
                pname_tok = self.expect("ident")
                self.expect(":")
                params.append(
                    Param(pname_tok.value, self.typeref(), (pname_tok.line, pname_tok.col))
                )
                if self.check(","):
                    self.advance()
                    continue
                break
            self.expect(")")
        result_type = None
        if kind == "query":
            self.expect(":")
            result_type = self.typeref()
        self.expect("do")
        body = self.stmts(("result", "end"))
        result_expr = None
        if self.check("result"):
            self.advance()
            self.expect(":=")
            result_expr = self.expr()
        self.expect("end")
        return MethodDecl(
            name, kind, params, result_type, body, result_expr, (kind_tok.line, kind_tok.col)
        )

    def typeref(self) -> TypeRef:
        separate = False
        if self.check("separate"):
            self.advance()
            separate = True
        tok = self.expect("ident")
        return TypeRef(tok.value, separate)

    def stmts(self, stop_kinds) -> list:
        out = []
        while self.cur.kind not in stop_kinds:
            if self.cur.kind not in _STMT_STARTERS:
                self.error(tuple(stop_kinds) + _STMT_STARTERS)
            out.append(self.stmt())
        return out

    def stmt(self) -> Stmt:
        tok = self.cur
        if self.check("create"):
            self.advance()
            separate = False
            if self.check("separate"):
                self.advance()
                separate = True
            var = self.expect("ident").value
            self.expect(":")
            cls = self.expect("ident").value
            node = CreateSeparate if separate else CreateLocal
            return node(var, cls, (tok.line, tok.col))
        if self.check("separate"):
            self.advance()
            targets = [self.expect("ident").value]
            while self.check(","):
                self.advance()
                targets.append(self.expect("ident").value)
            guard = None
            if self.check("require"):
                self.advance()
                guard = self.expr()
            self.expect("do")
            body = self.stmts(("end",))
            self.expect("end")
            return SeparateBlock(targets, guard, body, (tok.line, tok.col))
        if self.check("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then_body = self.stmts(("else", "end"))
            else_body = []
            if self.check("else"):
                self.advance()
                else_body = self.stmts(("end",))
            self.expect("end")
            return If(cond, then_body, else_body, (tok.line, tok.col))
        if self.check("repeat"):
            self.advance()
            count = self.expect("int").value
            self.expect("times")
            body = self.stmts(("end",))
            self.expect("end")
            return Repeat(count, body, (tok.line, tok.col))
        name = self.expect("ident").value
        if self.check(":="):
            self.advance()
            return Assign(name, self.expr(), (tok.line, tok.col))
        if self.check("."):
            self.advance()
            method = self.expect("ident").value
            args = self.call_args()
            return Call(name, method, args, (tok.line, tok.col))
        self.error((":=", "."))

    def call_args(self) -> list:
        args = []
        if self.check("("):
            self.advance()
            if not self.check(")"):
                args.append(self.expr())
                while self.check(","):
                    self.advance()
                    args.append(self.expr())
            self.expect(")")
        return args

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.check("or"):
            tok = self.advance()
            left = BinOp("or", left, self.and_expr(), (tok.line, tok.col))
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.check("and"):
            tok = self.advance()
            left = BinOp("and", left, self.not_expr(), (tok.line, tok.col))
        return left

    def not_expr(self) -> Expr:
        if self.check("not"):
            tok = self.advance()
            return NotOp(self.not_expr(), (tok.line, tok.col))
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        if self.cur.kind in ("=", "<", "<="):
            tok = self.advance()
            return BinOp(tok.kind, left, self.additive(), (tok.line, tok.col))
        return left

    def additive(self) -> Expr:
        left = self.primary()
        while self.cur.kind in ("+", "-"):
            tok = self.advance()
            left = BinOp(tok.kind, left, self.primary(), (tok.line, tok.col))
        return left

    def primary(self) -> Expr:
        tok = self.cur
        if self.check("int"):
            self.advance()
            return IntLit(tok.value, (tok.line, tok.col))
        if self.check("true"):
            self.advance()
            return BoolLit(True, (tok.line, tok.col))
        if self.check("false"):
            self.advance()
            return BoolLit(False, (tok.line, tok.col))
        if self.check("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if self.check("ident"):
            self.advance()
            if self.check("."):
                self.advance()
                method = self.expect("ident").value
                args = self.call_args()
                return QueryCall(tok.value, method, args, (tok.line, tok.col))
            return Name(tok.value, (tok.line, tok.col))
        self.error(("int", "true", "false", "(", "ident"))


def parse(source: str) -> Program:
    """Parse source text into a Program, or raise ParseError."""
    return _Parser(tokenize(source)).program()


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------


def _print_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, TempRef):
        return f"$t{e.slot}"
    if isinstance(e, QueryCall):
        args = ", ".join(_print_expr(a) for a in e.args)
        return f"{e.target}.{e.method}({args})"
    if isinstance(e, NotOp):
        return f"not {_print_expr(e.operand)}"
    if isinstance(e, BinOp):
        return f"({_print_expr(e.left)} {e.op} {_print_expr(e.right)})"
    raise TypeError(f"unknown expression node {e!r}")


def _print_stmts(stmts, indent: int, out: list):
    pad = "  " * indent
    for s in stmts:
        if isinstance(s, CreateLocal):
            out.append(f"{pad}create {s.var} : {s.class_name}")
        elif isinstance(s, CreateSeparate):
            out.append(f"{pad}create separate {s.var} : {s.class_name}")
        elif isinstance(s, Assign):
            out.append(f"{pad}{s.target} := {_print_expr(s.expr)}")
        elif isinstance(s, Call):
            args = ", ".join(_print_expr(a) for a in s.args)
            out.append(f"{pad}{s.target}.{s.method}({args})")
        elif isinstance(s, SeparateBlock):
            head = f"{pad}separate {', '.join(s.targets)}"
            if s.guard is not None:
                head += f" require {_print_expr(s.guard)}"
            out.append(head + " do")
            _print_stmts(s.body, indent + 1, out)
            out.append(f"{pad}end")
        elif isinstance(s, If):
            out.append(f"{pad}if {_print_expr(s.cond)} then")
            _print_stmts(s.then_body, indent + 1, out)
            if s.else_body:
                out.append(f"{pad}else")
                _print_stmts(s.else_body, indent + 1, out)
            out.append(f"{pad}end")
        elif isinstance(s, Repeat):
            out.append(f"{pad}repeat {s.count} times")
            _print_stmts(s.body, indent + 1, out)
            out.append(f"{pad}end")
        else:
            raise TypeError(f"unknown statement node {s!r}")


def to_source(p: Program) -> str:
    """Render a Program back to parseable source text."""
    out = []
    for c in p.classes:
        out.append(f"class {c.name}")
        for a in c.attributes:
            out.append(f"  attribute {a.name} : {a.type}")
        for m in c.methods:
            params = ""
            if m.params:
                params = "(" + ", ".join(f"{q.name} : {q.type}" for q in m.params) + ")"
            if m.kind == "query":
                out.append(f"  query {m.name}{params} : {m.result_type} do")
            else:
                out.append(f"  command {m.name}{params} do")
            _print_stmts(m.body, 2, out)
            if m.result_expr is not None:
                out.append(f"    result := {_print_expr(m.result_expr)}")
            out.append("  end")
        out.append("end")
        out.append("")
    out.append("root")
    _print_stmts(p.root, 1, out)
    out.append("end")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_T_INT = TypeRef("INTEGER", False)
_T_BOOL = TypeRef("BOOLEAN", False)


@dataclass
class LocalSlot:
    name: str
    type: TypeRef
    kind: str  # 'param' | 'local' | 'result'


@dataclass
class UnitInfo:
    """Resolved scope of one executable body: the root, or one method."""

    index: int
    name: str  # 'root' or 'Class.method'
    class_name: Optional[str]
    method: Optional[MethodDecl]
    locals: list  # list[LocalSlot]; params first, then created vars, then result
    result_slot: Optional[int] = None

    @property
    def n_params(self):
        return sum(1 for s in self.locals if s.kind == "param")


@dataclass
class ClassInfo:
    index: int
    decl: ClassDecl
    attr_names: list
    attr_types: list
    attr_slot: dict
    methods: dict  # name -> MethodDecl
    method_unit: dict  # name -> unit index


@dataclass
class ValidatedProgram:
    program: Program
    classes: dict  # name -> ClassInfo
    class_list: list  # ClassInfo in declaration order
    units: list  # UnitInfo; units[0] is root
    resolution: dict  # id(ast node) -> resolved info


def validate(p: Program) -> ValidatedProgram:
    """Resolve names and enforce the static separateness rules.

    Raises ValidationError with one Diagnostic per violation.  The three
    separateness rules are reported with rule tags 'a', 'b', 'c':
      (a) calls on a separate variable only inside a block reserving it;
      (b) block guards contain query calls only on the block's own targets;
      (c) commands are called as statements, queries inside expressions.
    """
    v = _Validator(p)
    v.run()
    if v.diagnostics:
        raise ValidationError(v.diagnostics)
    return ValidatedProgram(p, v.classes, v.class_list, v.units, v.resolution)


class _Validator:
    def __init__(self, p: Program):
        self.p = p
        self.diagnostics: list[Diagnostic] = []
        self.classes: dict[str, ClassInfo] = {}
        self.class_list: list[ClassInfo] = []
        self.units: list[UnitInfo] = []
        self.resolution: dict = {}

    def err(self, rule, message, pos):
        self.diagnostics.append(Diagnostic(rule, message, pos[0], pos[1]))

    def run(self):
        self.collect_classes()
        root = UnitInfo(0, "root", None, None, [])
        self.units.append(root)
        for c in self.class_list:
            for m in c.decl.methods:
                unit = UnitInfo(len(self.units), f"{c.decl.name}.{m.name}", c.decl.name, m, [])
                c.method_unit[m.name] = unit.index
                self.units.append(unit)
        self.check_unit(self.units[0], self.p.root)
        for c in self.class_list:
            for m in c.decl.methods:
                self.check_unit(self.units[c.method_unit[m.name]], m.body)

    def collect_classes(self):
        for c in self.p.classes:
            if c.name in BUILTIN_TYPES:
                self.err("name", f"class name {c.name} is reserved", c.pos)
                continue
            if c.name in self.classes:
                self.err("name", f"duplicate class {c.name}", c.pos)
                continue
            info = ClassInfo(len(self.class_list), c, [], [], {}, {}, {})
            self.classes[c.name] = info
            self.class_list.append(info)
        for info in self.class_list:
            c = info.decl
            for a in c.attributes:
                if a.name in info.attr_slot:
                    self.err("name", f"duplicate attribute {a.name} in {c.name}", a.pos)
                    continue
                self.check_typeref(a.type, a.pos)
                info.attr_slot[a.name] = len(info.attr_names)
                info.attr_names.append(a.name)
                info.attr_types.append(a.type)
            for m in c.methods:
                if m.name in info.methods:
                    self.err("name", f"duplicate method {m.name} in {c.name}", m.pos)
                    continue
                info.methods[m.name] = m
                if m.kind == "query":
                    if m.result_type is None or m.result_expr is None:
                        self.err("result", f"query {c.name}.{m.name} must produce a result", m.pos)
                    else:
                        self.check_typeref(m.result_type, m.pos)
                else:
                    if m.result_expr is not None:
                        self.err("result", f"command {c.name}.{m.name} cannot return a result", m.pos)

    def check_typeref(self, t: TypeRef, pos):
        if t.base in BUILTIN_TYPES:
            if t.separate:
                self.err("type", f"{t.base} cannot be separate", pos)
        elif t.base not in self.classes:
            self.err("name", f"unknown type {t.base}", pos)

    # --- per-unit checking ---

    def check_unit(self, unit: UnitInfo, body: list):
        scope = {}
        if unit.method is not None:
            seen = set()
            for q in unit.method.params:
                if q.name in seen:
                    self.err("name", f"duplicate parameter {q.name}", q.pos)
                    continue
                seen.add(q.name)
                self.check_typeref(q.type, q.pos)
                slot = len(unit.locals)
                unit.locals.append(LocalSlot(q.name, q.type, "param"))
                scope[q.name] = slot
        self.check_stmts(unit, body, scope, blocks=[])
        if unit.method is not None and unit.method.kind == "query":
            if unit.method.result_expr is not None and unit.method.result_type is not None:
                unit.result_slot = len(unit.locals)
                unit.locals.append(LocalSlot("result", unit.method.result_type, "result"))
                t = self.check_expr(unit, unit.method.result_expr, scope, blocks=[], guard_of=None)
                self.require_assignable(unit.method.result_type, t, unit.method.pos)

    def attr_type(self, unit: UnitInfo, name: str) -> Optional[TypeRef]:
        if unit.class_name is None:
            return None
        info = self.classes.get(unit.class_name)
        if info is None or name not in info.attr_slot:
            return None
        return info.attr_types[info.attr_slot[name]]

    def check_stmts(self, unit, stmts, scope, blocks):
        # scope maps visible names to local slots; creations inside a nested
        # statement list go out of scope with it, but keep their unit slot.
        local_scope = dict(scope)
        for s in stmts:
            if isinstance(s, (CreateLocal, CreateSeparate)):
                if s.class_name not in self.classes:
                    self.err("name", f"unknown class {s.class_name}", s.pos)
                    continue
                if s.var in local_scope or self.attr_type(unit, s.var) is not None:
                    self.err("name", f"name {s.var} already in use", s.pos)
                    continue
                t = TypeRef(s.class_name, isinstance(s, CreateSeparate))
                slot = len(unit.locals)
                unit.locals.append(LocalSlot(s.var, t, "local"))
                local_scope[s.var] = slot
                self.resolution[id(s)] = ("local", slot)
            elif isinstance(s, Assign):
                rhs = self.check_expr(unit, s.expr, local_scope, blocks, None)
                target_t = self.resolve_lvalue(unit, s, local_scope)
                if target_t is not None and rhs is not None:
                    self.require_assignable(target_t, rhs, s.pos)
            elif isinstance(s, Call):
                self.check_call(unit, s, local_scope, blocks, want_kind="command")
            elif isinstance(s, SeparateBlock):
                self.check_block(unit, s, local_scope, blocks)
            elif isinstance(s, If):
                t = self.check_expr(unit, s.cond, local_scope, blocks, None)
                self.require_bool(t, s.pos)
                self.check_stmts(unit, s.then_body, local_scope, blocks)
                self.check_stmts(unit, s.else_body, local_scope, blocks)
            elif isinstance(s, Repeat):
                if s.count < 1:
                    self.err("type", "repeat count must be a positive literal", s.pos)
                self.check_stmts(unit, s.body, local_scope, blocks)
            else:
                raise TypeError(f"unknown statement {s!r}")

    def resolve_lvalue(self, unit, s: Assign, scope) -> Optional[TypeRef]:
        if s.target in scope:
            slot = scope[s.target]
            self.resolution[id(s)] = ("local", slot)
            return unit.locals[slot].type
        at = self.attr_type(unit, s.target)
        if at is not None:
            info = self.classes[unit.class_name]
            self.resolution[id(s)] = ("attr", info.attr_slot[s.target])
            return at
        self.err("name", f"unknown variable or attribute {s.target}", s.pos)
        return None

    def check_block(self, unit, s: SeparateBlock, scope, blocks):
        if len(set(s.targets)) != len(s.targets):
            self.err("block", "separate block targets must be distinct", s.pos)
        slots = []
        for name in s.targets:
            if name not in scope:
                self.err("name", f"unknown variable {name} in separate block", s.pos)
                continue
            t = unit.locals[scope[name]].type
            if not t.separate:
                self.err("block", f"separate block target {name} is not separate", s.pos)
                continue
            slots.append(scope[name])
        self.resolution[id(s)] = ("block", tuple(slots))
        if s.guard is not None:
            t = self.check_expr(unit, s.guard, scope, blocks, guard_of=set(s.targets))
            self.require_bool(t, s.pos)
        self.check_stmts(unit, s.body, scope, blocks + [set(s.targets)])

    def check_call(self, unit, node, scope, blocks, want_kind):
        """Shared checks for Call statements and QueryCall expressions."""
        if node.target not in scope:
            if self.attr_type(unit, node.target) is not None:
                self.err("a", f"calls must target a variable, not attribute {node.target}", node.pos)
            else:
                self.err("name", f"unknown variable {node.target}", node.pos)
            return None
        slot = scope[node.target]
        t = unit.locals[slot].type
        if t.base in BUILTIN_TYPES:
            self.err("type", f"cannot call a method on {t.base} value {node.target}", node.pos)
            return None
        if t.separate and not any(node.target in b for b in blocks):
            self.err(
                "a",
                f"call on separate {node.target} outside a separate block reserving it",
                node.pos,
            )
        cinfo = self.classes.get(t.base)
        if cinfo is None:
            return None
        m = cinfo.methods.get(node.method)
        if m is None:
            self.err("name", f"class {t.base} has no method {node.method}", node.pos)
            return None
        if m.kind != want_kind:
            if want_kind == "command":
                self.err("c", f"query {t.base}.{node.method} used as a statement", node.pos)
            else:
                self.err("c", f"command {t.base}.{node.method} used in an expression", node.pos)
            return None
        if len(node.args) != len(m.params):
            self.err(
                "type",
                f"{t.base}.{node.method} expects {len(m.params)} arguments, got {len(node.args)}",
                node.pos,
            )
        for arg, param in zip(node.args, m.params):
            at = self.check_expr(unit, arg, scope, blocks, None)
            if at is not None:
                self.require_assignable(param.type, at, node.pos)
        self.resolution[id(node)] = ("call", slot, t.base, node.method, cinfo.method_unit.get(node.method))
        return m.result_type

    def check_expr(self, unit, e, scope, blocks, guard_of) -> Optional[TypeRef]:
        if isinstance(e, IntLit):
            return _T_INT
        if isinstance(e, BoolLit):
            return _T_BOOL
        if isinstance(e, Name):
            if e.name in scope:
                slot = scope[e.name]
                self.resolution[id(e)] = ("local", slot)
                return unit.locals[slot].type
            at = self.attr_type(unit, e.name)
            if at is not None:
                if at.separate:
                    self.err("type", f"separate attribute {e.name} cannot be read directly", e.pos)
                    return None
                info = self.classes[unit.class_name]
                self.resolution[id(e)] = ("attr", info.attr_slot[e.name])
                return at
            self.err("name", f"unknown name {e.name}", e.pos)
            return None
        if isinstance(e, QueryCall):
            if guard_of is not None:
                if e.target not in guard_of:
                    self.err(
                        "b",
                        f"guard query on {e.target} which is not a target of this block",
                        e.pos,
                    )
                # resolve against scope without the rule-(a) block check:
                # the reservation this guard belongs to is being established.
                if e.target in scope:
                    slot = scope[e.target]
                    t = unit.locals[slot].type
                    cinfo = self.classes.get(t.base)
                    m = cinfo.methods.get(e.method) if cinfo else None
                    if m is None:
                        self.err("name", f"no query {e.method} on guard target {e.target}", e.pos)
                        return None
                    if m.kind != "query":
                        self.err("c", f"command {t.base}.{e.method} used in a guard", e.pos)
                        return None
                    for arg, param in zip(e.args, m.params):
                        at = self.check_expr(unit, arg, scope, blocks, guard_of)
                        if at is not None:
                            self.require_assignable(param.type, at, e.pos)
                    self.resolution[id(e)] = (
                        "call", slot, t.base, e.method, cinfo.method_unit.get(e.method),
                    )
                    return m.result_type
                self.err("name", f"unknown variable {e.target}", e.pos)
                return None
            return self.check_call(unit, e, scope, blocks, want_kind="query")
        if isinstance(e, NotOp):
            self.require_bool(self.check_expr(unit, e.operand, scope, blocks, guard_of), e.pos)
            return _T_BOOL
        if isinstance(e, BinOp):
            lt = self.check_expr(unit, e.left, scope, blocks, guard_of)
            rt = self.check_expr(unit, e.right, scope, blocks, guard_of)
            if e.op in ("+", "-"):
                self.require_int(lt, e.pos)
                self.require_int(rt, e.pos)
                return _T_INT
            if e.op in ("<", "<="):
                self.require_int(lt, e.pos)
                self.require_int(rt, e.pos)
                return _T_BOOL
            if e.op == "=":
                if lt is not None and rt is not None:
                    if lt.base not in BUILTIN_TYPES or lt.base != rt.base:
                        self.err("type", "= compares INTEGER or BOOLEAN values of equal type", e.pos)
                return _T_BOOL
            if e.op in ("and", "or"):
                self.require_bool(lt, e.pos)
                self.require_bool(rt, e.pos)
                return _T_BOOL
        raise TypeError(f"unknown expression {e!r}")

    def require_bool(self, t, pos):
        if t is not None and t.base != "BOOLEAN":
            self.err("type", f"expected BOOLEAN, got {t}", pos)

    def require_int(self, t, pos):
        if t is not None and t.base != "INTEGER":
            self.err("type", f"expected INTEGER, got {t}", pos)

    def require_assignable(self, target: TypeRef, src: TypeRef, pos):
        if target.base != src.base:
            self.err("type", f"cannot assign {src} to {target}", pos)
            return
        if src.separate and not target.separate:
            self.err("type", f"cannot assign separate {src.base} to non-separate target", pos)
