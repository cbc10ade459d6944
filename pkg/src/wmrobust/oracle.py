"""Brute-force robustness oracle over execution graphs.

Nothing here looks at clocks.  Graphs are grown one event at a time in an
order compatible with po ∪ rf, so every prefix is itself a graph of some
run prefix.  Consistency is monotone under such extensions, which lets the
robustness search drop any graph that is already RC20- or SC-inconsistent.

The same machinery, restricted to SC choices (read the mo-latest write,
append to mo), enumerates SC runs for the non-robustness witness search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .graph import ExecutionGraph, Label, _bits, check_rc20, is_rc20_consistent, is_sc_consistent
from .lang import (BOUND, DEFAULT_LOOP_BOUND, Compiled, Program, Step, ThreadState, advance, step_of,
                   wrap64, eval_expr)

DEFAULT_BUDGET = 2_000_000


class OracleBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class Node:
    graph: ExecutionGraph
    threads: tuple
    trace: tuple = ()

    def key(self) -> tuple:
        return (self.graph.key(), self.threads)


def _root(comp: Compiled, bound: int) -> Node:
    p = comp.program
    return Node(ExecutionGraph.initial(p.atomic_locs, p.nonatomics), comp.initial_states(bound))


def _choices(g: ExecutionGraph, st: Step, ts: ThreadState, sc: bool, all_mo: bool):
    """(label, rf source, mo position, value read) for every way ``st`` can execute in ``g``."""
    ins = st.instr
    x = st.loc
    if st.kind == "F":
        yield Label("F", st.mode), None, None, None
        return
    writes = g.writes(x)
    if st.kind == "naR":
        w = writes[-1]
        yield Label("R", "na", x, val=g.events[w].label.wval), w, None, g.events[w].label.wval
        return
    if st.kind == "naW":
        yield Label("W", "na", x, val=eval_expr(ins.expr, ts)), None, None, None
        return
    if st.kind == "W":
        v = eval_expr(ins.expr, ts)
        positions = [len(writes)] if sc else range(0 if all_mo else 1, len(writes) + 1)
        for pos in positions:
            yield Label("W", st.mode, x, val=v), None, pos, None
        return
    sources = [writes[-1]] if sc else list(writes)
    for w in sources:
        rv = g.events[w].label.wval
        idx = writes.index(w)
        if ins.op == "load":
            yield Label("R", st.mode, x, val=rv), w, None, rv
            continue
        if ins.op == "wait":
            if rv == ins.expected:
                yield Label("R", st.mode, x, val=rv), w, None, rv
            continue
        if ins.op == "fadd":
            wv = wrap64(rv + eval_expr(ins.expr, ts))
        else:
            if rv != ins.expected:
                if ins.op == "cas":
                    yield Label("R", st.mode, x, val=rv), w, None, rv
                continue
            if ins.op == "cas" and not ins.strong and not sc:
                # a weak CAS may fail even when it reads the expected value
                yield Label("R", st.mode, x, val=rv), w, None, rv
            wv = eval_expr(ins.expr, ts)
        positions = [len(writes)] if sc else (range(0, len(writes) + 1) if all_mo else [idx + 1])
        for pos in positions:
            yield Label("RMW", st.mode, x, valR=rv, valW=wv), w, pos, rv


def _successors(comp: Compiled, node: Node, bound: int, sc: bool = False, all_mo: bool = False) -> Iterator[Node]:
    for tid, code in enumerate(comp.code):
        ts = node.threads[tid]
        st = step_of(code, tid, ts)
        if st is None:
            continue
        name = comp.program.thread_names[tid]
        for label, src, pos, rv in _choices(node.graph, st, ts, sc, all_mo):
            g = node.graph.extend(name, label, rf_src=src, mo_pos=pos, line=ins_line(st))
            nts = advance(code, ts, st, rv, bound)
            yield Node(g, node.threads[:tid] + (nts,) + node.threads[tid + 1:], node.trace + (name,))


def ins_line(st: Step) -> int:
    return st.instr.line


def _compiled(p) -> Compiled:
    return p if isinstance(p, Compiled) else Compiled.of(p)


# ---------------------------------------------------------------------------
# Candidate enumeration and robustness
# ---------------------------------------------------------------------------

def enumerate_candidates(p: Program | Compiled, bound: int = DEFAULT_LOOP_BOUND,
                         budget: int = DEFAULT_BUDGET, prune: bool = False,
                         max_events: Optional[int] = None) -> Iterator[ExecutionGraph]:
    """Every graph of every run prefix (all value-matching rf choices, all mo orders).

    With ``prune`` only RC20-consistent graphs are extended (and yielded).
    ``max_events`` caps the number of non-initial events per graph.
    Raises :class:`OracleBudgetExceeded` past ``budget`` graphs.
    """
    comp = _compiled(p)
    root = _root(comp, bound)
    n_init = root.graph.n
    seen = {root.key()}
    stack = [root]
    count = 0
    while stack:
        node = stack.pop()
        count += 1
        if count > budget:
            raise OracleBudgetExceeded(f"more than {budget} candidate graphs")
        yield node.graph
        if max_events is not None and node.graph.n - n_init >= max_events:
            continue
        for nxt in _successors(comp, node, bound, all_mo=not prune):
            k = nxt.key()
            if k in seen:
                continue
            seen.add(k)
            if prune and not is_rc20_consistent(nxt.graph):
                continue
            stack.append(nxt)


@dataclass
class OracleResult:
    verdict: str                          # robust | nonRobust | inconclusive
    witness: Optional[ExecutionGraph] = None
    nodes: int = 0
    trace: tuple = ()

    def to_json(self) -> dict:
        d = {"verdict": self.verdict, "nodes": self.nodes}
        if self.witness is not None:
            d["witness"] = self.witness.to_json()
        return d


def is_robust(p: Program | Compiled, bound: int = DEFAULT_LOOP_BOUND, budget: int = DEFAULT_BUDGET) -> OracleResult:
    """Robust iff no RC20-consistent graph of the program is SC-inconsistent."""
    comp = _compiled(p)
    root = _root(comp, bound)
    seen = {root.key()}
    stack = [root]
    nodes = 0
    while stack:
        node = stack.pop()
        nodes += 1
        if nodes > budget:
            return OracleResult("inconclusive", nodes=nodes)
        for nxt in _successors(comp, node, bound):
            k = nxt.key()
            if k in seen:
                continue
            seen.add(k)
            if not is_rc20_consistent(nxt.graph):
                continue
            if not is_sc_consistent(nxt.graph):
                return OracleResult("nonRobust", nxt.graph, nodes, nxt.trace)
            stack.append(nxt)
    return OracleResult("robust", nodes=nodes)


def consistent_graphs(p: Program | Compiled, bound: int = DEFAULT_LOOP_BOUND,
                      budget: int = DEFAULT_BUDGET) -> Iterator[ExecutionGraph]:
    """RC20-consistent graphs that no thread can extend further (complete executions)."""
    comp = _compiled(p)
    root = _root(comp, bound)
    seen = {root.key()}
    stack = [root]
    count = 0
    while stack:
        node = stack.pop()
        count += 1
        if count > budget:
            raise OracleBudgetExceeded(f"more than {budget} graphs")
        extended = False
        for nxt in _successors(comp, node, bound):
            if not is_rc20_consistent(nxt.graph):
                continue
            extended = True
            k = nxt.key()
            if k not in seen:
                seen.add(k)
                stack.append(nxt)
        if not extended:
            yield node.graph


# ---------------------------------------------------------------------------
# Non-robustness witnesses over SC runs
# ---------------------------------------------------------------------------

def _thread_mask(a: ExecutionGraph, tid: str) -> int:
    return a.mask(lambda e: e.tid == tid)


def knowledge(a: ExecutionGraph, tid: str) -> int:
    """Writes ``w`` with ``w ; mo? ; rf? ; hb?`` reaching an event of ``tid`` (atomic graph)."""
    mine = _thread_mask(a, tid)
    rf_hb = a.rf_rel().refl().seq(a.hb().refl())
    direct = rf_hb.preimage(mine)
    return a.mo_rel().refl().preimage(direct)


def sc_reach(a: ExecutionGraph, tid: str) -> int:
    """Events ``e`` with ``e ; hbSC?`` reaching an event of ``tid``."""
    return a.hb_sc().refl().preimage(_thread_mask(a, tid))


def _immediate_succ(a: ExecutionGraph, w: int) -> Optional[int]:
    ws = a.mo[a.events[w].label.loc]
    i = ws.index(w)
    return ws[i + 1] if i + 1 < len(ws) else None


def witness_writes(g: ExecutionGraph, tid: str, loc: str, access: str, value: Optional[int] = None,
                   critical: frozenset = frozenset()) -> list[int]:
    """Writes (ids in ``g``) that make the pending access of ``tid`` an extended witness."""
    a = g.atomic_view()
    origin = a._origin
    know = knowledge(a, tid)
    reach = sc_reach(a, tid)
    mo = a.mo_rel()
    writes = a.writes(loc)
    out = []

    def known(w):
        return bool(know >> w & 1)

    def reaches(w):
        return bool(reach >> w & 1)

    def stale_value_write(w, vals, exclude):
        # w ∈ W_{x,v}, overwritten (mo-successor exists), some successor reaches τ under hbSC,
        # and w is not strictly mo-before a known write
        lab = a.events[w].label
        wv = lab.wval
        if exclude:
            if wv in vals:
                return False
        elif wv not in vals:
            return False
        if not (mo.rows[w] & reach):
            return False
        return not (mo.rows[w] & know)

    def stale_overwrite_u(w, v):
        if a.events[w].label.wval != v:
            return False
        u = _immediate_succ(a, w)
        if u is None or a.events[u].label.kind == "RMW" or not reaches(u):
            return False
        return not known(u)

    for w in writes:
        e = a.events[w]
        if access in ("read", "weak_cas"):
            hit = reaches(w) and not known(w)
        elif access in ("write", "fadd"):
            hit = (not e.is_init and e.label.kind != "RMW" and reaches(w) and not known(w))
        elif access == "wait":
            hit = stale_value_write(w, {value}, False)
        elif access == "bcas":
            hit = stale_overwrite_u(w, value)
        elif access == "strong_cas":
            others = {u for (y, u) in critical if y == loc and u != value}
            mine = {u for (y, u) in critical if y == loc}
            hit = (stale_overwrite_u(w, value) or stale_value_write(w, others, False)
                   or stale_value_write(w, mine, True))
        else:
            raise ValueError(access)
        if hit:
            out.append(origin[w])
    return out


def standard_witness(g: ExecutionGraph, tid: str, loc: str, access: str, value: Optional[int] = None,
                     critical: frozenset = frozenset()) -> bool:
    """The latest write is unknown to ``tid`` yet hbSC-before it (value kinds: see :func:`witness_writes`)."""
    ws = witness_writes(g, tid, loc, access, value, critical)
    if access in ("wait", "bcas", "strong_cas"):
        return bool(ws)
    return g.wmax(loc) in ws


@dataclass
class Witness:
    kind: str             # standard | extended
    thread: str
    loc: str
    access: str
    trace: tuple
    graph: ExecutionGraph = field(repr=False)
    writes: tuple = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "thread": self.thread, "loc": self.loc, "access": self.access,
                "trace": list(self.trace), "writes": list(self.writes), "graph": self.graph.to_json()}


def pending_accesses(comp: Compiled, node: Node):
    """(thread name, step, expected value) for every pending atomic access, blocked ones included."""
    for tid, code in enumerate(comp.code):
        st = step_of(code, tid, node.threads[tid])
        if st is None or st.kind not in ("R", "W", "RMW"):
            continue
        v = st.instr.expected if st.access in ("wait", "bcas", "strong_cas") else None
        yield comp.program.thread_names[tid], st, v


def witnesses_at(comp: Compiled, node: Node) -> list[Witness]:
    out = []
    for name, st, v in pending_accesses(comp, node):
        ws = witness_writes(node.graph, name, st.loc, st.access, v, comp.critical)
        if not ws:
            continue
        std = standard_witness(node.graph, name, st.loc, st.access, v, comp.critical)
        out.append(Witness("standard" if std else "extended", name, st.loc, st.access, node.trace, node.graph,
                           tuple(ws)))
    return out


def sc_runs(p: Program | Compiled, bound: int = DEFAULT_LOOP_BOUND, budget: int = DEFAULT_BUDGET) -> Iterator[Node]:
    """Every configuration reachable under SC, deduplicated by (graph, thread states)."""
    comp = _compiled(p)
    root = _root(comp, bound)
    seen = {root.key()}
    stack = [root]
    count = 0
    while stack:
        node = stack.pop()
        count += 1
        if count > budget:
            raise OracleBudgetExceeded(f"more than {budget} SC configurations")
        yield node
        if any(t.status == BOUND for t in node.threads):
            continue
        for nxt in _successors(comp, node, bound, sc=True):
            k = nxt.key()
            if k not in seen:
                seen.add(k)
                stack.append(nxt)


def find_witness_sc(p: Program | Compiled, bound: int = DEFAULT_LOOP_BOUND,
                    budget: int = DEFAULT_BUDGET) -> Optional[Witness]:
    """A standard witness if some SC run has one, else an extended one, else None."""
    comp = _compiled(p)
    extended = None
    for node in sc_runs(comp, bound, budget):
        for w in witnesses_at(comp, node):
            if w.kind == "standard":
                return w
            if extended is None:
                extended = w
    return extended


def rc20_verdict(g: ExecutionGraph) -> str:
    return check_rc20(g)
