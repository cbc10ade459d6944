"""Litmus DSL: AST, parser, pretty-printer, critical pairs and per-thread stepping.

A program declares atomic and non-atomic locations and a list of threads.
Threads are compiled to a flat instruction list; the memory-free parts
(register assignments, branches, loop headers) run eagerly, so every
scheduler step is exactly one memory instruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

MODES = ("rlx", "acq", "rel", "acqrel")
FENCE_MODES = MODES + ("sc",)
SC_FENCE_LOC = "$f"
DEFAULT_LOOP_BOUND = 16

_MASK = (1 << 64) - 1


def wrap64(v: int) -> int:
    v &= _MASK
    return v - (1 << 64) if v >> 63 else v


def mode_geq(mode: Optional[str], bound: str) -> bool:
    """Mode order: rlx below acq and rel, both below acqrel; na and init are outside it."""
    if mode not in MODES:
        return False
    if bound == "rlx":
        return True
    if bound == "acqrel":
        return mode == "acqrel"
    return mode == bound or mode == "acqrel"


class DslError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


class AnalysisError(Exception):
    """Runtime fault in a program under analysis (undefined register and the like)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

Pos = tuple  # (line, col)


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Reg:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Reg, BinOp]


@dataclass(frozen=True)
class Store:
    loc: str
    value: Expr
    mode: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Load:
    reg: str
    loc: str
    mode: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Fadd:
    reg: str
    loc: str
    value: Expr
    mode: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Cas:
    reg: str
    loc: str
    expected: int
    desired: Expr
    mode: str
    strong: bool
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Bcas:
    loc: str
    expected: int
    desired: Expr
    mode: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Wait:
    loc: str
    expected: int
    mode: str = "acq"
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Fence:
    mode: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class NaStore:
    loc: str
    value: Expr
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class NaLoad:
    reg: str
    loc: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Assign:
    reg: str
    value: Expr
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Skip:
    pos: Pos = field(default=(0, 0), compare=False)


Stmt = Union[Store, Load, Fadd, Cas, Bcas, Wait, Fence, NaStore, NaLoad, Assign, If, While, Skip]


@dataclass(frozen=True)
class Thread:
    name: str
    body: tuple


@dataclass(frozen=True)
class Program:
    atomics: tuple
    nonatomics: tuple
    threads: tuple

    @property
    def has_sc_fence(self) -> bool:
        return any(isinstance(s, Fence) and s.mode == "sc" for t in self.threads for s in _walk(t.body))

    @property
    def atomic_locs(self) -> tuple:
        """Declared atomics plus the hidden sc-fence location when sc fences occur."""
        return self.atomics + ((SC_FENCE_LOC,) if self.has_sc_fence else ())

    @property
    def locations(self) -> tuple:
        return self.atomic_locs + self.nonatomics

    @property
    def thread_names(self) -> tuple:
        return tuple(t.name for t in self.threads)

    def is_atomic(self, loc: str) -> bool:
        return loc in self.atomics or loc == SC_FENCE_LOC


def _walk(block):
    for s in block:
        yield s
        if isinstance(s, If):
            yield from _walk(s.then)
            yield from _walk(s.orelse)
        elif isinstance(s, While):
            yield from _walk(s.body)


def statements(p: Program):
    for t in p.threads:
        yield from _walk(t.body)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*|/\*.*?\*/)"
    r"|(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|[-+<(){};,.=])",
    re.S,
)

_KEYWORDS = {"atomic", "nonatomic", "thread", "if", "else", "while", "skip", "fence", "wait", "bcas",
             "fadd", "cas_weak", "cas_strong", "store", "load"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise DslError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind == "comment":
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = i + chunk.rfind("\n") + 1
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, i - line_start + 1))
        i = m.end()
    toks.append(_Tok("eof", "", line, i - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.atomics: list[str] = []
        self.nonatomics: list[str] = []

    # token helpers
    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise DslError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def ident(self) -> _Tok:
        t = self.peek()
        if t.kind != "ident":
            self.fail(f"expected identifier, found {t.text or 'end of input'!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.i += 1
            return True
        return False

    # grammar
    def program(self) -> Program:
        while self.peek().text in ("atomic", "nonatomic"):
            kw = self.next().text
            names = [self.ident()]
            while self.accept(","):
                names.append(self.ident())
            self.expect(";")
            for n in names:
                if n.text in self.atomics or n.text in self.nonatomics:
                    self.fail(f"location {n.text!r} declared twice", n)
                if n.text in _KEYWORDS:
                    self.fail(f"{n.text!r} is reserved", n)
                (self.atomics if kw == "atomic" else self.nonatomics).append(n.text)
        threads = []
        while self.peek().text == "thread":
            self.next()
            name = self.ident()
            if any(t.name == name.text for t in threads):
                self.fail(f"thread {name.text!r} declared twice", name)
            threads.append(Thread(name.text, self.block()))
        if not threads:
            self.fail("expected at least one thread")
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r}")
        return Program(tuple(self.atomics), tuple(self.nonatomics), tuple(threads))

    def block(self) -> tuple:
        self.expect("{")
        body = []
        while not self.accept("}"):
            if self.peek().kind == "eof":
                self.fail("unterminated block")
            body.append(self.stmt())
        return tuple(body)

    def mode(self, allowed, what: str) -> str:
        t = self.ident()
        if t.text not in FENCE_MODES:
            self.fail(f"unknown mode {t.text!r}", t)
        if t.text not in allowed:
            self.fail(f"mode {t.text!r} not allowed for {what}", t)
        return t.text

    def atomic_loc(self) -> str:
        t = self.ident()
        if t.text not in self.atomics:
            self.fail(f"{t.text!r} is not a declared atomic location", t)
        return t.text

    def const(self) -> int:
        neg = self.accept("-")
        t = self.peek()
        if t.kind != "num":
            self.fail("expected an integer constant")
        self.next()
        return wrap64(-int(t.text) if neg else int(t.text))

    def stmt(self) -> Stmt:
        t = self.peek()
        pos = (t.line, t.col)
        if t.text == "skip":
            self.next()
            self.expect(";")
            return Skip(pos)
        if t.text == "if":
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = self.block() if self.accept("else") else ()
            return If(cond, then, orelse, pos)
        if t.text == "while":
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return While(cond, self.block(), pos)
        if t.text == "fence":
            self.next()
            self.expect("(")
            m = self.mode(("acq", "rel", "acqrel", "sc"), "fence")
            self.expect(")")
            self.expect(";")
            return Fence(m, pos)
        if t.text == "wait":
            self.next()
            self.expect("(")
            loc = self.atomic_loc()
            self.expect(",")
            v = self._const_arg("wait")
            m = "acq"
            if self.accept(","):
                m = self.mode(("rlx", "acq", "acqrel"), "wait")
            self.expect(")")
            self.expect(";")
            return Wait(loc, v, m, pos)
        if t.text == "bcas":
            self.next()
            loc, exp, des, m = self._cas_args("bcas")
            self.expect(";")
            return Bcas(loc, exp, des, m, pos)
        name = self.ident()
        if name.text in self.atomics and self.peek().text == ".":
            self.next()
            op = self.ident()
            if op.text != "store":
                self.fail(f"expected store, found {op.text!r}", op)
            self.expect("(")
            val = self.expr()
            self.expect(",")
            m = self.mode(("rlx", "rel", "acqrel"), "store")
            self.expect(")")
            self.expect(";")
            return Store(name.text, val, m, pos)
        if name.text in self.atomics:
            self.fail(f"atomic location {name.text!r} must be written with .store", name)
        self.expect("=")
        if name.text in self.nonatomics:
            val = self.expr()
            self.expect(";")
            return NaStore(name.text, val, pos)
        if not name.text.startswith("r"):
            self.fail(f"{name.text!r} is neither a location nor a register", name)
        reg = name.text
        nxt = self.peek()
        if nxt.text in ("fadd", "cas_weak", "cas_strong") and self.peek(1).text == "(":
            self.next()
            if nxt.text == "fadd":
                self.expect("(")
                loc = self.atomic_loc()
                self.expect(",")
                val = self.expr()
                self.expect(",")
                m = self.mode(MODES, "fadd")
                self.expect(")")
                self.expect(";")
                return Fadd(reg, loc, val, m, pos)
            loc, exp, des, m = self._cas_args(nxt.text)
            self.expect(";")
            return Cas(reg, loc, exp, des, m, nxt.text == "cas_strong", pos)
        if nxt.kind == "ident" and nxt.text in self.atomics:
            self.next()
            self.expect(".")
            op = self.ident()
            if op.text != "load":
                self.fail(f"expected load, found {op.text!r}", op)
            self.expect("(")
            m = self.mode(("rlx", "acq", "acqrel"), "load")
            self.expect(")")
            self.expect(";")
            return Load(reg, nxt.text, m, pos)
        if nxt.kind == "ident" and self.peek(1).text == ".":
            self.fail(f"{nxt.text!r} is not a declared atomic location", nxt)
        if nxt.kind == "ident" and nxt.text in self.nonatomics and self.peek(1).text == ";":
            self.next()
            self.next()
            return NaLoad(reg, nxt.text, pos)
        val = self.expr()
        self.expect(";")
        return Assign(reg, val, pos)

    def _const_arg(self, what: str) -> int:
        save = self.i
        try:
            return self.const()
        except DslError:
            self.i = save
            self.fail(f"{what} expects a constant expected value")

    def _cas_args(self, what: str):
        self.expect("(")
        loc = self.atomic_loc()
        self.expect(",")
        exp = self._const_arg(what)
        self.expect(",")
        des = self.expr()
        self.expect(",")
        m = self.mode(MODES, what)
        self.expect(")")
        return loc, exp, des, m

    # expressions: comparisons bind loosest, then + and -
    def expr(self) -> Expr:
        left = self.sum()
        while self.peek().text in ("==", "!=", "<"):
            op = self.next().text
            left = BinOp(op, left, self.sum())
        return left

    def sum(self) -> Expr:
        left = self.atom()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            left = BinOp(op, left, self.atom())
        return left

    def atom(self) -> Expr:
        t = self.peek()
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "-" or t.kind == "num":
            return Const(self.const())
        if t.kind == "ident":
            if not t.text.startswith("r") or t.text in self.atomics or t.text in self.nonatomics:
                self.fail(f"{t.text!r} cannot appear in an expression; load it into a register first")
            self.next()
            return Reg(t.text)
        self.fail(f"unexpected {t.text or 'end of input'!r} in expression")


def parse(text: str) -> Program:
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

def _fmt_expr(e: Expr, top: bool = True) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Reg):
        return e.name
    s = f"{_fmt_expr(e.left, False)} {e.op} {_fmt_expr(e.right, False)}"
    return s if top else f"({s})"


def _fmt_block(block, indent: int) -> list[str]:
    pad = "    " * indent
    out = []
    for s in block:
        if isinstance(s, If):
            out.append(f"{pad}if ({_fmt_expr(s.cond)}) {{")
            out += _fmt_block(s.then, indent + 1)
            if s.orelse:
                out.append(f"{pad}}} else {{")
                out += _fmt_block(s.orelse, indent + 1)
            out.append(f"{pad}}}")
        elif isinstance(s, While):
            out.append(f"{pad}while ({_fmt_expr(s.cond)}) {{")
            out += _fmt_block(s.body, indent + 1)
            out.append(f"{pad}}}")
        else:
            out.append(pad + format_stmt(s))
    return out


def format_stmt(s: Stmt) -> str:
    if isinstance(s, Store):
        return f"{s.loc}.store({_fmt_expr(s.value)}, {s.mode});"
    if isinstance(s, Load):
        return f"{s.reg} = {s.loc}.load({s.mode});"
    if isinstance(s, Fadd):
        return f"{s.reg} = fadd({s.loc}, {_fmt_expr(s.value)}, {s.mode});"
    if isinstance(s, Cas):
        fn = "cas_strong" if s.strong else "cas_weak"
        return f"{s.reg} = {fn}({s.loc}, {s.expected}, {_fmt_expr(s.desired)}, {s.mode});"
    if isinstance(s, Bcas):
        return f"bcas({s.loc}, {s.expected}, {_fmt_expr(s.desired)}, {s.mode});"
    if isinstance(s, Wait):
        return f"wait({s.loc}, {s.expected}, {s.mode});"
    if isinstance(s, Fence):
        return f"fence({s.mode});"
    if isinstance(s, NaStore):
        return f"{s.loc} = {_fmt_expr(s.value)};"
    if isinstance(s, NaLoad):
        return f"{s.reg} = {s.loc};"
    if isinstance(s, Assign):
        return f"{s.reg} = {_fmt_expr(s.value)};"
    if isinstance(s, Skip):
        return "skip;"
    if isinstance(s, If):
        return f"if ({_fmt_expr(s.cond)}) {{...}}"
    if isinstance(s, While):
        return f"while ({_fmt_expr(s.cond)}) {{...}}"
    raise TypeError(s)


def pretty(p: Program) -> str:
    lines = []
    if p.atomics:
        lines.append(f"atomic {', '.join(p.atomics)};")
    if p.nonatomics:
        lines.append(f"nonatomic {', '.join(p.nonatomics)};")
    for t in p.threads:
        lines.append(f"thread {t.name} {{")
        lines += _fmt_block(t.body, 1)
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Critical pairs
# ---------------------------------------------------------------------------

def critical_pairs(p: Program) -> frozenset:
    out = set()
    for s in statements(p):
        if isinstance(s, (Wait, Bcas)) or (isinstance(s, Cas) and s.strong):
            out.add((s.loc, s.expected))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Compilation to flat per-thread code
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instr:
    """One flat instruction.

    ``op`` is one of: store, load, fadd, cas, bcas, wait, fence, nastore,
    naload (memory instructions) or assign, jz, jmp, loop (local ones).
    """

    op: str
    line: int
    loc: Optional[str] = None
    reg: Optional[str] = None
    expr: Optional[Expr] = None
    mode: Optional[str] = None
    expected: Optional[int] = None
    strong: bool = False
    target: int = -1
    loop_id: int = -1
    text: str = ""

    @property
    def is_memory(self) -> bool:
        return self.op not in ("assign", "jz", "jmp", "loop")

    @property
    def is_atomic(self) -> bool:
        return self.op in ("store", "load", "fadd", "cas", "bcas", "wait", "fence")


def _eff_mode(mode: str, reading: bool) -> str:
    # acqrel on a pure load/store only has its load/store half
    if mode == "acqrel":
        return "acq" if reading else "rel"
    return mode


def compile_thread(body: tuple) -> tuple:
    code: list[Instr] = []

    def emit(i: Instr) -> int:
        code.append(i)
        return len(code) - 1

    def go(block):
        for s in block:
            ln = s.pos[0]
            txt = format_stmt(s)
            if isinstance(s, Store):
                emit(Instr("store", ln, loc=s.loc, expr=s.value, mode=_eff_mode(s.mode, False), text=txt))
            elif isinstance(s, Load):
                emit(Instr("load", ln, loc=s.loc, reg=s.reg, mode=_eff_mode(s.mode, True), text=txt))
            elif isinstance(s, Fadd):
                emit(Instr("fadd", ln, loc=s.loc, reg=s.reg, expr=s.value, mode=s.mode, text=txt))
            elif isinstance(s, Cas):
                emit(Instr("cas", ln, loc=s.loc, reg=s.reg, expr=s.desired, mode=s.mode,
                           expected=s.expected, strong=s.strong, text=txt))
            elif isinstance(s, Bcas):
                emit(Instr("bcas", ln, loc=s.loc, expr=s.desired, mode=s.mode, expected=s.expected, text=txt))
            elif isinstance(s, Wait):
                emit(Instr("wait", ln, loc=s.loc, mode=_eff_mode(s.mode, True), expected=s.expected, text=txt))
            elif isinstance(s, Fence):
                if s.mode == "sc":
                    emit(Instr("fence", ln, mode="acq", text=txt))
                    emit(Instr("fadd", ln, loc=SC_FENCE_LOC, expr=Const(0), mode="acqrel", text=txt))
                    emit(Instr("fence", ln, mode="rel", text=txt))
                else:
                    emit(Instr("fence", ln, mode=s.mode, text=txt))
            elif isinstance(s, NaStore):
                emit(Instr("nastore", ln, loc=s.loc, expr=s.value, mode="na", text=txt))
            elif isinstance(s, NaLoad):
                emit(Instr("naload", ln, loc=s.loc, reg=s.reg, mode="na", text=txt))
            elif isinstance(s, Assign):
                emit(Instr("assign", ln, reg=s.reg, expr=s.value, text=txt))
            elif isinstance(s, Skip):
                pass
            elif isinstance(s, If):
                jz = emit(Instr("jz", ln, expr=s.cond))
                go(s.then)
                if s.orelse:
                    jmp = emit(Instr("jmp", ln))
                    code[jz] = _retarget(code[jz], len(code))
                    go(s.orelse)
                    code[jmp] = _retarget(code[jmp], len(code))
                else:
                    code[jz] = _retarget(code[jz], len(code))
            elif isinstance(s, While):
                head = emit(Instr("loop", ln, expr=s.cond))
                go(s.body)
                emit(Instr("jmp", ln, target=head))
                code[head] = Instr("loop", ln, expr=s.cond, target=len(code), loop_id=head)
            else:
                raise TypeError(s)

    go(body)
    return tuple(code)


def _retarget(i: Instr, target: int) -> Instr:
    return Instr(i.op, i.line, i.loc, i.reg, i.expr, i.mode, i.expected, i.strong, target, i.loop_id, i.text)


# ---------------------------------------------------------------------------
# Thread state and stepping
# ---------------------------------------------------------------------------

RUNNING, DONE, BOUND = "running", "done", "bound"


@dataclass(frozen=True)
class ThreadState:
    pc: int = 0
    regs: tuple = ()      # sorted (name, value) pairs
    loops: tuple = ()     # sorted (loop_id, iterations) pairs
    status: str = RUNNING

    def reg(self, name: str) -> int:
        for k, v in self.regs:
            if k == name:
                return v
        raise AnalysisError(f"register {name} read before assignment")

    def with_reg(self, name: str, value: int) -> "ThreadState":
        d = dict(self.regs)
        d[name] = value
        return ThreadState(self.pc, tuple(sorted(d.items())), self.loops, self.status)


def eval_expr(e: Expr, ts: ThreadState) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Reg):
        return ts.reg(e.name)
    a, b = eval_expr(e.left, ts), eval_expr(e.right, ts)
    if e.op == "+":
        return wrap64(a + b)
    if e.op == "-":
        return wrap64(a - b)
    if e.op == "==":
        return int(a == b)
    if e.op == "!=":
        return int(a != b)
    if e.op == "<":
        return int(a < b)
    raise AnalysisError(f"unknown operator {e.op}")


def settle(code: tuple, ts: ThreadState, bound: int) -> ThreadState:
    """Run local instructions until the next memory instruction or the end."""
    pc, loops, status = ts.pc, dict(ts.loops), ts.status
    regs = ts
    while status == RUNNING:
        if pc >= len(code):
            status = DONE
            break
        ins = code[pc]
        if ins.is_memory:
            break
        if ins.op == "assign":
            regs = regs.with_reg(ins.reg, eval_expr(ins.expr, regs))
            pc += 1
        elif ins.op == "jmp":
            pc = ins.target
        elif ins.op == "jz":
            pc = pc + 1 if eval_expr(ins.expr, regs) else ins.target
        elif ins.op == "loop":
            if not eval_expr(ins.expr, regs):
                loops.pop(ins.loop_id, None)
                pc = ins.target
            elif loops.get(ins.loop_id, 0) >= bound:
                status = BOUND
            else:
                loops[ins.loop_id] = loops.get(ins.loop_id, 0) + 1
                pc += 1
    return ThreadState(pc, regs.regs, tuple(sorted(loops.items())), status)


@dataclass(frozen=True)
class Step:
    """The next memory action of a thread, not yet committed.

    ``kind`` is R, W, RMW or F for atomics, naR or naW for non-atomics.  For
    CAS the final kind depends on the value read; use :meth:`outcome`.
    """

    tid: int
    pc: int
    instr: Instr
    kind: str
    loc: Optional[str]
    mode: str

    @property
    def reads(self) -> bool:
        return self.kind in ("R", "RMW", "naR")

    @property
    def access(self) -> str:
        """Robustness-check category of this step."""
        op = self.instr.op
        if op == "cas":
            return "strong_cas" if self.instr.strong else "weak_cas"
        return {"store": "write", "load": "read", "fadd": "fadd", "bcas": "bcas", "wait": "wait"}.get(op, op)

    def can_read(self, v: int) -> bool:
        """Whether reading ``v`` lets the step go ahead (blocking instructions only accept their constant)."""
        if self.instr.op in ("wait", "bcas"):
            return v == self.instr.expected
        return True

    def outcome(self, read_val: Optional[int], ts: ThreadState) -> tuple:
        """(label kind, written value or None) when the step reads ``read_val``."""
        op = self.instr.op
        if op in ("store", "nastore"):
            return self.kind, eval_expr(self.instr.expr, ts)
        if op == "fadd":
            return "RMW", wrap64(read_val + eval_expr(self.instr.expr, ts))
        if op in ("cas", "bcas"):
            if read_val == self.instr.expected:
                return "RMW", eval_expr(self.instr.expr, ts)
            return "R", None
        return self.kind, None


BLOCKED = "blocked"
FINISHED = "finished"


def step_of(code: tuple, tid: int, ts: ThreadState) -> Optional[Step]:
    """The pending memory step of a settled thread, or None when it has ended."""
    if ts.status != RUNNING or ts.pc >= len(code):
        return None
    ins = code[ts.pc]
    kind = {"store": "W", "load": "R", "fadd": "RMW", "cas": "RMW", "bcas": "RMW", "wait": "R",
            "fence": "F", "nastore": "naW", "naload": "naR"}[ins.op]
    return Step(tid, ts.pc, ins, kind, ins.loc, ins.mode)


def enabled_step(code: tuple, tid: int, ts: ThreadState, memory: dict):
    """Step descriptor, or BLOCKED for a wait/bcas whose value is not in memory, or FINISHED."""
    st = step_of(code, tid, ts)
    if st is None:
        return FINISHED
    if st.instr.op in ("wait", "bcas") and memory[st.loc] != st.instr.expected:
        return BLOCKED
    return st


def advance(code: tuple, ts: ThreadState, step: Step, read_val: Optional[int], bound: int) -> ThreadState:
    """Commit ``step`` in the thread-local state given the value it read."""
    if step.instr.reg is not None and read_val is not None:
        ts = ts.with_reg(step.instr.reg, read_val)
    ts = ThreadState(ts.pc + 1, ts.regs, ts.loops, ts.status)
    return settle(code, ts, bound)


@dataclass(frozen=True)
class Compiled:
    """A program together with its flat thread code."""

    program: Program
    code: tuple
    critical: frozenset

    @classmethod
    def of(cls, p: Program) -> "Compiled":
        return cls(p, tuple(compile_thread(t.body) for t in p.threads), critical_pairs(p))

    def initial_states(self, bound: int) -> tuple:
        return tuple(settle(c, ThreadState(), bound) for c in self.code)
