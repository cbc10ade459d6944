"""SC interpreter driving the robustness, race and boolean-matrix monitors.

A :class:`Machine` holds one configuration: memory, per-thread state, the
monitor states and (optionally) the execution graph built alongside the
run.  Schedulers pick which thread takes the next memory step; local
instructions run eagerly between steps.

Robustness checks are evaluated at every configuration for the pending
access of every unfinished thread, blocked ones included, so a wait that
can never succeed under SC is still checked.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .bm import BMState, UnsupportedFragment, bm_check, bm_step
from .graph import ExecutionGraph, Label, is_sc_consistent
from .lang import (BLOCKED, DEFAULT_LOOP_BOUND, FINISHED, BOUND, Compiled, Program, Step, advance,
                   enabled_step, step_of)
from .lc import RobustnessState
from .race import RaceReport, RaceState

DEFAULT_NODE_BUDGET = 10 ** 7


@dataclass
class Options:
    loop_bound: int = DEFAULT_LOOP_BOUND
    bm: bool = False
    continue_on_violation: bool = True
    value_tracking: bool = True
    build_graph: bool = True
    verify: bool = False


@dataclass(frozen=True)
class Violation:
    kind: str
    thread: str
    loc: str
    access: str
    hb_ts: int
    sc_ts: int
    source_line: Optional[int]
    stale_write_event: Optional[int]
    stale_write_line: Optional[int]
    schedule: tuple = ()

    def dedupe_key(self) -> tuple:
        return (self.kind, self.stale_write_line, self.source_line)

    def to_json(self) -> dict:
        return {"kind": self.kind, "thread": self.thread, "loc": self.loc, "access": self.access,
                "hbTs": self.hb_ts, "scTs": self.sc_ts, "sourceLine": self.source_line,
                "staleWriteEvent": self.stale_write_event, "staleWriteLine": self.stale_write_line,
                "schedule": [dict(r) for r in self.schedule]}


def _rec(thread: str, pc: int, event: str) -> tuple:
    return (("thread", thread), ("pc", pc), ("event", event))


class Machine:
    """One SC configuration plus monitor state.  :meth:`clone` is cheap enough for DFS."""

    def __init__(self, comp: Compiled, opts: Optional[Options] = None):
        self.comp = comp
        self.opts = opts or Options()
        p = comp.program
        self.names = p.thread_names
        self.memory = {x: 0 for x in p.locations}
        self.threads = comp.initial_states(self.opts.loop_bound)
        self.lc = RobustnessState(comp.critical, self.opts.value_tracking)
        self.race = RaceState.initial(self.names)
        self.bm = None
        if self.opts.bm:
            _require_ra_program(comp)
            self.bm = BMState.initial(p.atomic_locs, self.names)
        # write history per location: (event id, line, is_rmw), Init first
        self.history: dict = {}
        eid = 0
        for x in p.locations:
            self.history[x] = ((eid, None, False),)
            eid += 1
        self.next_eid = eid
        self.graph = ExecutionGraph.initial(p.atomic_locs, p.nonatomics) if self.opts.build_graph else None
        self.trace: tuple = ()
        self.violations: list = []
        self.bm_violations: list = []
        self.races: list = []
        self._seen: set = set()
        self._seen_race: set = set()
        self.check_all()

    # -- configuration -------------------------------------------------------

    def clone(self) -> "Machine":
        m = Machine.__new__(Machine)
        m.comp, m.opts, m.names = self.comp, self.opts, self.names
        m.memory = dict(self.memory)
        m.threads = self.threads
        m.lc = self.lc.copy()
        m.race = self.race.copy()
        m.bm = self.bm.copy() if self.bm is not None else None
        m.history = dict(self.history)
        m.next_eid = self.next_eid
        m.graph = self.graph
        m.trace = self.trace
        m.violations = list(self.violations)
        m.bm_violations = list(self.bm_violations)
        m.races = list(self.races)
        m._seen = set(self._seen)
        m._seen_race = set(self._seen_race)
        return m

    def key(self) -> tuple:
        """Everything that influences future steps and future findings."""
        hist = tuple(sorted((x, tuple((ln, r) for _, ln, r in h)) for x, h in self.history.items()))
        return (tuple(sorted(self.memory.items())), self.threads, self.lc.key(), self.race.key(),
                tuple(sorted(self.race.last_w.items())), tuple(sorted(self.race.last_r.items())),
                self.bm.key() if self.bm is not None else None, hist)

    def status(self, tid: int):
        return enabled_step(self.comp.code[tid], tid, self.threads[tid], self.memory)

    def enabled(self) -> list[int]:
        return [t for t in range(len(self.names)) if isinstance(self.status(t), Step)]

    def pending(self) -> list[Step]:
        out = []
        for t in range(len(self.names)):
            st = step_of(self.comp.code[t], t, self.threads[t])
            if st is not None:
                out.append(st)
        return out

    @property
    def finished(self) -> bool:
        return all(self.status(t) == FINISHED for t in range(len(self.names)))

    def outcome_status(self) -> str:
        if any(ts.status == BOUND for ts in self.threads):
            return "bound"
        if self.finished:
            return "done"
        if not self.enabled():
            return "deadlock"
        return "running"

    # -- checks --------------------------------------------------------------

    def check_all(self) -> list:
        """Run the robustness checks for every pending atomic access; returns new findings."""
        new = []
        for st in self.pending():
            if st.kind not in ("R", "W", "RMW"):
                continue
            name = self.names[st.tid]
            access = st.access
            v = st.instr.expected if access in ("wait", "bcas", "strong_cas") else None
            fail = self.lc.check(name, st.loc, access, v)
            if fail is not None:
                ev, line = self._stale_write(st.loc, fail)
                viol = Violation("robustness", name, st.loc, access, fail.hb_ts, fail.sc_ts, st.instr.line,
                                 ev, line, tuple(dict(r) for r in self.trace))
                if viol.dedupe_key() not in self._seen:
                    self._seen.add(viol.dedupe_key())
                    self.violations.append(viol)
                    new.append(viol)
            if self.bm is not None and bm_check(self.bm, name, st.loc):
                viol = Violation("bm", name, st.loc, access, 0, 1, st.instr.line, None, None,
                                 tuple(dict(r) for r in self.trace))
                if viol.dedupe_key() not in self._seen:
                    self._seen.add(viol.dedupe_key())
                    self.bm_violations.append(viol)
                    new.append(viol)
        return new

    def _stale_write(self, x: str, fail) -> tuple:
        """The mo-maximal write on ``x`` whose timestamp equals the SC-side value."""
        hist = self.history[x]
        unique = fail.clock in ("scTU", "vTU")
        best = None
        ts = tsu = 0
        for i, (eid, line, rmw) in enumerate(hist):
            if i > 0:
                ts += 1
                tsu += 0 if rmw else 1
            if (tsu if unique else ts) == fail.sc_ts:
                best = (eid, line)
        return best if best is not None else (None, None)

    # -- stepping ------------------------------------------------------------

    def step(self, tid: int) -> Step:
        """Execute the next memory step of thread ``tid`` (which must be enabled)."""
        st = self.status(tid)
        if not isinstance(st, Step):
            raise ValueError(f"thread {self.names[tid]} is {st}")
        name = self.names[tid]
        ts = self.threads[tid]
        x = st.loc
        read_val = self.memory[x] if st.reads else None
        if st.kind == "F":
            self.lc.on_fence(name, st.mode)
            self.race.on_fence(name, st.mode)
            label = Label("F", st.mode)
        elif st.kind in ("naR", "naW"):
            typ = "R" if st.kind == "naR" else "W"
            kind, wval = st.outcome(read_val, ts)
            for r in self.race.on_nonatomic(name, x, typ, st.instr.line):
                if r.pair_key() not in self._seen_race:
                    self._seen_race.add(r.pair_key())
                    self.races.append(r)
            label = Label("R", "na", x, val=read_val) if typ == "R" else Label("W", "na", x, val=wval)
        else:
            kind, wval = st.outcome(read_val, ts)
            prev = self.memory[x]
            self.lc.on_access(name, x, kind, st.mode, prev)
            self.race.on_atomic(name, x, kind, st.mode)
            if self.bm is not None:
                self.bm = bm_step(self.bm, name, x, kind, st.mode)
            if kind == "R":
                label = Label("R", st.mode, x, val=read_val)
            elif kind == "W":
                label = Label("W", st.mode, x, val=wval)
            else:
                label = Label("RMW", st.mode, x, valR=read_val, valW=wval)
        if label.is_write:
            self.memory[x] = label.wval
        eid = self.next_eid
        self.next_eid += 1
        if label.is_write:
            self.history[x] = self.history[x] + ((eid, st.instr.line, label.kind == "RMW"),)
        if self.graph is not None:
            src = self.graph.wmax(x) if label.is_read else None
            self.graph = self.graph.extend(name, label, rf_src=src, line=st.instr.line)
            if self.opts.verify and not is_sc_consistent(self.graph):
                raise AssertionError("side graph lost SC consistency")
        self.threads = self.threads[:tid] + (advance(self.comp.code[tid], ts, st, read_val, self.opts.loop_bound),) \
            + self.threads[tid + 1:]
        self.trace = self.trace + (_rec(name, st.pc, str(label)),)
        self.check_all()
        return st


def _require_ra_program(comp: Compiled) -> None:
    for code in comp.code:
        for ins in code:
            if not ins.is_atomic:
                continue
            if ins.op not in ("store", "load") or ins.mode not in ("acq", "rel", "acqrel"):
                raise UnsupportedFragment(
                    f"line {ins.line}: boolean matrices cover only release/acquire loads and stores")


# ---------------------------------------------------------------------------
# Schedulers and runs
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    status: str
    violations: list
    bm_violations: list
    races: list
    final_memory: dict
    trace: list
    graph: Optional[ExecutionGraph]

    def to_json(self) -> dict:
        found = bool(self.violations)
        return {"status": self.status,
                "violations": [v.to_json() for v in self.violations],
                "bmViolations": [v.to_json() for v in self.bm_violations],
                "races": [_tag(r, found).to_json() for r in self.races],
                "finalMemory": dict(sorted(self.final_memory.items())),
                "trace": self.trace}


def _tag(r: RaceReport, conditional: bool) -> RaceReport:
    return RaceReport(r.loc, r.access1, r.access2, conditional)


class RoundRobin:
    def __init__(self):
        self.last = -1

    def pick(self, m: Machine, enabled: list[int]) -> int:
        later = [t for t in enabled if t > self.last]
        self.last = later[0] if later else enabled[0]
        return self.last


class RandomScheduler:
    """Seeded random choice that keeps running a thread until it blocks or ends.

    With ``preempt`` > 0 the scheduler also switches at a step with that
    probability.  Staying with one thread mirrors how an OS scheduler runs
    short litmus threads.
    """

    def __init__(self, seed: int, preempt: float = 0.0):
        self.rng = random.Random(seed)
        self.preempt = preempt
        self.current: Optional[int] = None

    def pick(self, m: Machine, enabled: list[int]) -> int:
        if self.current not in enabled or (self.preempt and self.rng.random() < self.preempt):
            self.current = self.rng.choice(enabled)
        return self.current


class FixedScheduler:
    """Replays a trace given as thread names or {"thread": ...} records."""

    def __init__(self, trace: Sequence):
        self.queue = [t["thread"] if isinstance(t, dict) else t for t in trace]
        self.pos = 0

    def pick(self, m: Machine, enabled: list[int]) -> Optional[int]:
        if self.pos >= len(self.queue):
            return None
        name = self.queue[self.pos]
        self.pos += 1
        if name not in m.names:
            raise ValueError(f"trace names unknown thread {name}")
        tid = m.names.index(name)
        if tid not in enabled:
            raise ValueError(f"trace step {self.pos}: thread {name} is not enabled")
        return tid


def run_once(p: Program | Compiled, sched, opts: Optional[Options] = None, on_step=None) -> RunOutcome:
    """Run to completion, deadlock, loop bound or (in abort mode) the first violation."""
    comp = p if isinstance(p, Compiled) else Compiled.of(p)
    m = Machine(comp, opts)
    if on_step is not None:
        on_step(m, None)
    status = None
    while True:
        if m.violations and not m.opts.continue_on_violation:
            status = "aborted"
            break
        st = m.outcome_status()
        if st != "running":
            status = st
            break
        tid = sched.pick(m, m.enabled())
        if tid is None:
            status = "stopped"
            break
        step = m.step(tid)
        if on_step is not None:
            on_step(m, step)
    return RunOutcome(status, m.violations, m.bm_violations, m.races, dict(m.memory),
                      [dict(r) for r in m.trace], m.graph)


@dataclass
class Finding:
    violation: Violation
    first_hit: int
    hits: int = 1


@dataclass
class ManyOutcome:
    runs: int
    findings: list = field(default_factory=list)      # Finding, in first-hit order
    races: list = field(default_factory=list)
    runs_with_violation: int = 0
    statuses: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        found = bool(self.findings)
        return {"runs": self.runs, "runsWithViolation": self.runs_with_violation,
                "findings": [dict(f.violation.to_json(), firstHit=f.first_hit, hits=f.hits) for f in self.findings],
                "races": [_tag(r, found).to_json() for r in self.races],
                "statuses": dict(sorted(self.statuses.items()))}


def run_many(p: Program | Compiled, seeds: int, opts: Optional[Options] = None, base_seed: int = 0,
             preempt: float = 0.0) -> ManyOutcome:
    comp = p if isinstance(p, Compiled) else Compiled.of(p)
    opts = opts or Options(build_graph=False)
    out = ManyOutcome(seeds)
    index: dict = {}
    race_seen: set = set()
    for i in range(seeds):
        r = run_once(comp, RandomScheduler(base_seed + i, preempt), opts)
        out.statuses[r.status] = out.statuses.get(r.status, 0) + 1
        if r.violations:
            out.runs_with_violation += 1
        for v in r.violations:
            k = v.dedupe_key()
            if k in index:
                index[k].hits += 1
            else:
                index[k] = Finding(v, i)
                out.findings.append(index[k])
        for rr in r.races:
            if rr.pair_key() not in race_seen:
                race_seen.add(rr.pair_key())
                out.races.append(rr)
    return out


@dataclass
class ExploreOutcome:
    verdict: str                  # clean | findings | inconclusive
    violations: list
    races: list
    bm_violations: list
    nodes: int
    deadlocks: int = 0

    def to_json(self) -> dict:
        found = bool(self.violations)
        return {"verdict": self.verdict, "nodes": self.nodes,
                "violations": [v.to_json() for v in self.violations],
                "bmViolations": [v.to_json() for v in self.bm_violations],
                "races": [_tag(r, found).to_json() for r in self.races]}


def explore(p: Program | Compiled, depth_cap: int = 200, opts: Optional[Options] = None,
            node_budget: int = DEFAULT_NODE_BUDGET, stop_at_first: bool = False, visit=None,
            memo: bool = True) -> ExploreOutcome:
    """Exhaustive DFS over scheduler choices with memoization on configurations.

    ``visit(machine)`` is called once per distinct configuration.  With
    ``memo`` off every schedule prefix is visited separately.
    """
    comp = p if isinstance(p, Compiled) else Compiled.of(p)
    opts = opts or Options(build_graph=False)
    root = Machine(comp, opts)
    seen: set = set()
    found: dict = {}
    races: dict = {}
    bm: dict = {}
    nodes = 0
    deadlocks = 0
    inconclusive = False

    def absorb(m: Machine):
        for v in m.violations:
            found.setdefault(v.dedupe_key(), v)
        for v in m.bm_violations:
            bm.setdefault(v.dedupe_key(), v)
        for r in m.races:
            races.setdefault(r.pair_key(), r)

    stack = [(root, 0)]
    while stack:
        m, depth = stack.pop()
        if memo:
            k = m.key()
            if k in seen:
                continue
            seen.add(k)
        nodes += 1
        if visit is not None:
            visit(m)
        absorb(m)
        if stop_at_first and found:
            break
        if nodes >= node_budget:
            inconclusive = True
            break
        if m.outcome_status() == "deadlock":
            deadlocks += 1
        en = m.enabled()
        if not en or any(ts.status == BOUND for ts in m.threads):
            continue
        if depth >= depth_cap:
            inconclusive = True
            continue
        for tid in reversed(en):
            c = m.clone()
            c.step(tid)
            stack.append((c, depth + 1))
    viol = sorted(found.values(), key=lambda v: (len(v.schedule), v.source_line or 0, v.thread))
    verdict = "findings" if viol else ("inconclusive" if inconclusive else "clean")
    return ExploreOutcome(verdict, viol, sorted(races.values(), key=lambda r: r.pair_key()),
                          sorted(bm.values(), key=lambda v: (len(v.schedule), v.source_line or 0)),
                          nodes, deadlocks)
