"""Execution graphs, derived relations and consistency predicates.

Relations are boolean matrices stored row-wise as Python ints (bit j of
row i set iff (i, j) is in the relation), which keeps composition and
closure cheap at litmus scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .lang import mode_geq


class GraphError(Exception):
    """Malformed graph or an operation applied outside its precondition."""


# ---------------------------------------------------------------------------
# Relations
# ---------------------------------------------------------------------------

def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


class Rel:
    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: Optional[list] = None):
        self.n = n
        self.rows = rows if rows is not None else [0] * n

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple]) -> "Rel":
        r = cls(n)
        for a, b in pairs:
            r.rows[a] |= 1 << b
        return r

    @classmethod
    def identity(cls, n: int, mask: int) -> "Rel":
        r = cls(n)
        for i in _bits(mask):
            r.rows[i] = 1 << i
        return r

    def __contains__(self, pair) -> bool:
        a, b = pair
        return bool(self.rows[a] >> b & 1)

    def pairs(self) -> list[tuple]:
        return [(i, j) for i in range(self.n) for j in _bits(self.rows[i])]

    def __or__(self, other: "Rel") -> "Rel":
        return Rel(self.n, [a | b for a, b in zip(self.rows, other.rows)])

    def __and__(self, other: "Rel") -> "Rel":
        return Rel(self.n, [a & b for a, b in zip(self.rows, other.rows)])

    def __eq__(self, other) -> bool:
        return isinstance(other, Rel) and self.rows == other.rows

    def __le__(self, other: "Rel") -> bool:
        return all(a & ~b == 0 for a, b in zip(self.rows, other.rows))

    def seq(self, other: "Rel") -> "Rel":
        rows = []
        orow = other.rows
        for row in self.rows:
            acc = 0
            for j in _bits(row):
                acc |= orow[j]
            rows.append(acc)
        return Rel(self.n, rows)

    def inverse(self) -> "Rel":
        r = Rel(self.n)
        for i, row in enumerate(self.rows):
            for j in _bits(row):
                r.rows[j] |= 1 << i
        return r

    def dom_filter(self, mask: int) -> "Rel":
        """[mask] ; self"""
        return Rel(self.n, [row if mask >> i & 1 else 0 for i, row in enumerate(self.rows)])

    def rng_filter(self, mask: int) -> "Rel":
        """self ; [mask]"""
        return Rel(self.n, [row & mask for row in self.rows])

    def minus_id(self) -> "Rel":
        return Rel(self.n, [row & ~(1 << i) for i, row in enumerate(self.rows)])

    def refl(self) -> "Rel":
        return Rel(self.n, [row | (1 << i) for i, row in enumerate(self.rows)])

    def plus(self) -> "Rel":
        """Transitive closure (Warshall over bit rows)."""
        rows = list(self.rows)
        n = self.n
        for k in range(n):
            bk = 1 << k
            rk = rows[k]
            if not rk:
                continue
            for i in range(n):
                if rows[i] & bk:
                    rows[i] |= rk
            # rows[k] may itself have grown through i == k; keep it current
        return Rel(n, rows)

    def star(self) -> "Rel":
        return self.plus().refl()

    def irreflexive(self) -> bool:
        return all(not (row >> i & 1) for i, row in enumerate(self.rows))

    def acyclic(self) -> bool:
        return self.plus().irreflexive()

    def domain(self) -> int:
        m = 0
        for i, row in enumerate(self.rows):
            if row:
                m |= 1 << i
        return m

    def preimage(self, mask: int) -> int:
        """Events with an edge into ``mask``."""
        m = 0
        for i, row in enumerate(self.rows):
            if row & mask:
                m |= 1 << i
        return m


def closure_by_iteration(r: Rel) -> Rel:
    """Naive fixpoint of r ∪ r;r ∪ ...; an independent reference for :meth:`Rel.plus`."""
    cur = r
    while True:
        nxt = cur | cur.seq(r)
        if nxt == cur:
            return cur
        cur = nxt


def irreflexive_seq(a: Rel, b: Rel) -> bool:
    """Whether a;b is irreflexive, without materializing it."""
    brows = b.rows
    for i, row in enumerate(a.rows):
        bi = 1 << i
        for j in _bits(row):
            if brows[j] & bi:
                return False
    return True


# ---------------------------------------------------------------------------
# Events and graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Label:
    kind: str                 # R, W, RMW, F
    mode: str                 # rlx/acq/rel/acqrel, na for non-atomics, init for Init writes
    loc: Optional[str] = None
    val: Optional[int] = None     # R and W
    valR: Optional[int] = None    # RMW
    valW: Optional[int] = None    # RMW

    @property
    def is_read(self) -> bool:
        return self.kind in ("R", "RMW")

    @property
    def is_write(self) -> bool:
        return self.kind in ("W", "RMW")

    @property
    def rval(self) -> Optional[int]:
        return self.valR if self.kind == "RMW" else (self.val if self.kind == "R" else None)

    @property
    def wval(self) -> Optional[int]:
        return self.valW if self.kind == "RMW" else (self.val if self.kind == "W" else None)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "mode": self.mode}
        if self.kind != "F":
            d["loc"] = self.loc
        if self.kind == "RMW":
            d["valR"], d["valW"] = self.valR, self.valW
        elif self.kind in ("R", "W"):
            d["val"] = self.val
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Label":
        kind = d["kind"]
        if kind not in ("R", "W", "RMW", "F"):
            raise GraphError(f"unknown label kind {kind!r}")
        if kind == "RMW":
            return cls(kind, d["mode"], d["loc"], valR=d["valR"], valW=d["valW"])
        if kind == "F":
            return cls(kind, d["mode"])
        return cls(kind, d["mode"], d["loc"], val=d["val"])

    def __str__(self) -> str:
        if self.kind == "F":
            return f"F[{self.mode}]"
        if self.kind == "RMW":
            return f"U[{self.mode}]({self.loc},{self.valR},{self.valW})"
        return f"{self.kind}[{self.mode}]({self.loc},{self.val})"


@dataclass(frozen=True)
class Event:
    id: int
    tid: Optional[str]
    serial: int
    label: Label
    line: Optional[int] = field(default=None, compare=False)

    @property
    def is_init(self) -> bool:
        return self.tid is None

    @property
    def atomic(self) -> bool:
        return self.label.mode != "na"

    def to_json(self) -> dict:
        d = {"id": self.id, "tid": self.tid, "serial": self.serial, "label": self.label.to_json()}
        if self.line is not None:
            d["line"] = self.line
        return d

    def __str__(self) -> str:
        who = "init" if self.tid is None else f"{self.tid}.{self.serial}"
        return f"e{self.id}:{who}:{self.label}"


def init_label(loc: str, atomic: bool = True) -> Label:
    return Label("W", "init" if atomic else "na", loc, val=0)


class ExecutionGraph:
    """Events with rf (read id -> write id) and mo (loc -> write ids in order).

    Derived relations are computed lazily and cached; treat instances as
    immutable once built.
    """

    def __init__(self, events: Iterable[Event], rf: dict, mo: dict):
        self.events: tuple = tuple(events)
        self.rf: dict = dict(rf)
        self.mo: dict = {x: tuple(ws) for x, ws in mo.items()}
        self._cache: dict = {}
        for i, e in enumerate(self.events):
            if e.id != i:
                raise GraphError("event ids must be 0..n-1 in order")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def initial(cls, atomics: Iterable[str], nonatomics: Iterable[str] = ()) -> "ExecutionGraph":
        evs, mo = [], {}
        for x in atomics:
            evs.append(Event(len(evs), None, 0, init_label(x, True)))
            mo[x] = (evs[-1].id,)
        for x in nonatomics:
            evs.append(Event(len(evs), None, 0, init_label(x, False)))
            mo[x] = (evs[-1].id,)
        return cls(evs, {}, mo)

    def extend(self, tid: str, label: Label, rf_src: Optional[int] = None, mo_pos: Optional[int] = None,
               line: Optional[int] = None) -> "ExecutionGraph":
        """A new graph with one more event appended to thread ``tid``.

        ``mo_pos`` is the insertion index into mo of the location (default: last).
        """
        serial = 1 + max((e.serial for e in self.events if e.tid == tid), default=0)
        e = Event(len(self.events), tid, serial, label, line)
        rf = dict(self.rf)
        mo = dict(self.mo)
        if label.is_read:
            if rf_src is None:
                raise GraphError("read needs an rf source")
            rf[e.id] = rf_src
        if label.is_write:
            order = list(mo.get(label.loc, ()))
            order.insert(len(order) if mo_pos is None else mo_pos, e.id)
            mo[label.loc] = tuple(order)
        return ExecutionGraph(self.events + (e,), rf, mo)

    # -- basic views ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.events)

    def _memo(self, key, fn):
        c = self._cache
        if key not in c:
            c[key] = fn()
        return c[key]

    def mask(self, pred) -> int:
        m = 0
        for e in self.events:
            if pred(e):
                m |= 1 << e.id
        return m

    @property
    def tids(self) -> list:
        seen = []
        for e in self.events:
            if e.tid is not None and e.tid not in seen:
                seen.append(e.tid)
        return seen

    @property
    def locs(self) -> list:
        seen = []
        for e in self.events:
            if e.label.loc is not None and e.label.loc not in seen:
                seen.append(e.label.loc)
        return seen

    def writes(self, x: str) -> tuple:
        return self.mo.get(x, ())

    def wmax(self, x: str) -> int:
        return self.mo[x][-1]

    def thread_events(self, tid: str) -> list:
        return sorted((e for e in self.events if e.tid == tid), key=lambda e: e.serial)

    def key(self) -> tuple:
        """Identity up to event numbering: events by (tid, serial), rf and mo by the same names."""
        name = {e.id: (e.tid or "", e.serial, e.label.loc or "") for e in self.events}
        evs = tuple(sorted((name[e.id], e.label) for e in self.events))
        rf = tuple(sorted((name[r], name[w]) for r, w in self.rf.items()))
        mo = tuple(sorted((x, tuple(name[w] for w in ws)) for x, ws in self.mo.items()))
        return (evs, rf, mo)

    def validate(self) -> None:
        for r, w in self.rf.items():
            er, ew = self.events[r], self.events[w]
            if not er.label.is_read or not ew.label.is_write:
                raise GraphError(f"rf edge e{w}->e{r} does not go from a write to a read")
            if er.label.loc != ew.label.loc or er.label.rval != ew.label.wval:
                raise GraphError(f"rf edge e{w}->e{r} mismatches location or value")
        for e in self.events:
            if e.label.is_read and e.id not in self.rf:
                raise GraphError(f"read e{e.id} has no rf source")
            if e.label.is_write and e.id not in self.mo.get(e.label.loc, ()):
                raise GraphError(f"write e{e.id} missing from mo")
        for x, ws in self.mo.items():
            for w in ws:
                if not self.events[w].label.is_write or self.events[w].label.loc != x:
                    raise GraphError(f"mo of {x} lists a non-write")
            if len(set(ws)) != len(ws):
                raise GraphError(f"mo of {x} repeats an event")
        seen = set()
        for e in self.events:
            if e.is_init and e.label.kind != "W":
                raise GraphError(f"initialization event e{e.id} is not a write")
            k = (e.tid, e.serial, e.label.loc if e.tid is None else None)
            if k in seen:
                raise GraphError(f"duplicate (tid, serial) {k}")
            seen.add(k)

    # -- atomic restriction --------------------------------------------------

    def atomic_view(self) -> "ExecutionGraph":
        """Drop non-atomic events; ids are renumbered, ``origin`` maps back."""
        def build():
            if all(e.atomic for e in self.events):
                g = self
                g._origin = list(range(self.n))
                return g
            keep = [e for e in self.events if e.atomic]
            remap = {e.id: i for i, e in enumerate(keep)}
            evs = [Event(remap[e.id], e.tid, e.serial, e.label, e.line) for e in keep]
            rf = {remap[r]: remap[w] for r, w in self.rf.items() if r in remap}
            mo = {x: tuple(remap[w] for w in ws) for x, ws in self.mo.items() if all(w in remap for w in ws)}
            g = ExecutionGraph(evs, rf, mo)
            g._origin = [e.id for e in keep]
            return g
        return self._memo("atomic", build)

    # -- derived relations ---------------------------------------------------

    def po(self) -> Rel:
        def build():
            r = Rel(self.n)
            inits = self.mask(lambda e: e.is_init)
            non_init = ((1 << self.n) - 1) & ~inits
            for e in self.events:
                if e.is_init:
                    r.rows[e.id] = non_init
                else:
                    r.rows[e.id] = self.mask(lambda f, e=e: f.tid == e.tid and f.serial > e.serial)
            return r
        return self._memo("po", build)

    def rf_rel(self) -> Rel:
        return self._memo("rf", lambda: Rel.from_pairs(self.n, ((w, r) for r, w in self.rf.items())))

    def mo_rel(self) -> Rel:
        def build():
            r = Rel(self.n)
            for ws in self.mo.values():
                for i, a in enumerate(ws):
                    for b in ws[i + 1:]:
                        r.rows[a] |= 1 << b
            return r
        return self._memo("mo", build)

    def fr(self) -> Rel:
        return self._memo("fr", lambda: self.rf_rel().inverse().seq(self.mo_rel()).minus_id())

    def hb_ra(self) -> Rel:
        for e in self.events:
            if e.is_init:
                continue
            if e.label.kind == "F" or e.label.mode in ("rlx", "na"):
                raise GraphError("hbRA needs a release/acquire-only graph without fences; use hb_rc20")
        return self._memo("hbRA", lambda: (self.po() | self.rf_rel()).plus())

    def sw(self) -> Rel:
        def build():
            rel = self.mask(lambda e: mode_geq(e.label.mode, "rel"))
            acq = self.mask(lambda e: mode_geq(e.label.mode, "acq"))
            fences = self.mask(lambda e: e.label.kind == "F")
            atomic = self.mask(lambda e: e.atomic)
            po = self.po()
            rf = self.rf_rel().dom_filter(atomic).rng_filter(atomic)
            start = Rel.identity(self.n, rel) | po.dom_filter(rel & fences)
            finish = Rel.identity(self.n, (1 << self.n) - 1) | po.rng_filter(fences)
            return start.seq(rf.plus()).seq(finish).rng_filter(acq)
        return self._memo("sw", build)

    def hb(self) -> Rel:
        """RC20 happens-before, (po ∪ sw)+."""
        return self._memo("hb", lambda: (self.po() | self.sw()).plus())

    def hb_sc(self) -> Rel:
        return self._memo("hbSC", lambda: (self.po() | self.rf_rel() | self.mo_rel() | self.fr()).plus())

    def eco(self) -> Rel:
        return self._memo("eco", lambda: (self.rf_rel() | self.mo_rel() | self.fr()).plus())

    # -- timestamps ----------------------------------------------------------

    def ts(self, w: int) -> int:
        return self.timestamps(w)[0]

    def ts_u(self, w: int) -> int:
        return self.timestamps(w)[1]

    def timestamps(self, w: int) -> tuple:
        e = self.events[w]
        if not e.label.is_write:
            raise GraphError(f"e{w} is not a write")
        order = self.mo[e.label.loc]
        upto = order[: order.index(w) + 1]
        real = [self.events[i] for i in upto if not self.events[i].is_init]
        return len(real), sum(1 for f in real if f.label.kind != "RMW")

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "events": [e.to_json() for e in self.events],
            "rf": [[w, r] for r, w in sorted(self.rf.items())],
            "mo": {x: list(ws) for x, ws in self.mo.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExecutionGraph":
        try:
            evs = sorted(d["events"], key=lambda e: e["id"])
            events = [Event(e["id"], e.get("tid"), e.get("serial", 0), Label.from_json(e["label"]), e.get("line"))
                      for e in evs]
            rf = {r: w for w, r in d.get("rf", [])}
            mo = {x: tuple(ws) for x, ws in d.get("mo", {}).items()}
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        g = cls(events, rf, mo)
        g.validate()
        return g

    @classmethod
    def load(cls, path) -> "ExecutionGraph":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def ascii(self) -> str:
        lines = [str(e) for e in self.events]
        for name, rel in (("po", _immediate(self.po())), ("rf", self.rf_rel()), ("mo", _immediate(self.mo_rel())),
                          ("fr", self.fr()), ("sw", self.sw())):
            pairs = rel.pairs()
            if name == "po":
                pairs = [(a, b) for a, b in pairs if not self.events[a].is_init]
            if pairs:
                lines.append(f"{name}: " + ", ".join(f"e{a}->e{b}" for a, b in pairs))
        return "\n".join(lines)


def _immediate(r: Rel) -> Rel:
    """Transitive reduction of a strict order."""
    two = r.seq(r)
    return Rel(r.n, [a & ~b for a, b in zip(r.rows, two.rows)])


# ---------------------------------------------------------------------------
# Public derivation operations
# ---------------------------------------------------------------------------

def derive_po(g: ExecutionGraph) -> Rel:
    return g.po()


def derive_hb_ra(g: ExecutionGraph) -> Rel:
    return g.hb_ra()


def derive_sw(g: ExecutionGraph) -> Rel:
    return g.sw()


def derive_hb_rc20(g: ExecutionGraph) -> Rel:
    return g.hb()


def derive_fr(g: ExecutionGraph) -> Rel:
    return g.fr()


def derive_hb_sc(g: ExecutionGraph) -> Rel:
    return g.hb_sc()


def timestamp_of(g: ExecutionGraph, w: int) -> tuple:
    return g.timestamps(w)


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------

CONSISTENT = "consistent"


def check_rc20(g: ExecutionGraph) -> str:
    """``consistent`` or the name of the first violated axiom (atomic events only)."""
    a = g.atomic_view()
    po_rf = a.po() | a.rf_rel()
    if not po_rf.acyclic():
        return "acyc-po-rf"
    hb = a.hb()
    if not irreflexive_seq(a.mo_rel(), hb):
        return "write coherence"
    if not irreflexive_seq(a.fr(), hb):
        return "read coherence"
    if not irreflexive_seq(hb, a.eco()):
        return "coherence"
    if not irreflexive_seq(a.fr(), a.mo_rel()):
        return "atomicity"
    return CONSISTENT


def check_sc(g: ExecutionGraph) -> str:
    a = g.atomic_view()
    return CONSISTENT if a.hb_sc().irreflexive() else "hbSC cycle"


def is_rc20_consistent(g: ExecutionGraph) -> bool:
    return check_rc20(g) == CONSISTENT


def is_sc_consistent(g: ExecutionGraph) -> bool:
    return check_sc(g) == CONSISTENT


def sc_by_linearization(g: ExecutionGraph) -> bool:
    """SC-consistency as "some po-respecting total order where each read sees the latest write".

    mo must also follow the order.  Exhaustive search; only for small graphs.
    """
    a = g.atomic_view()
    n = a.n
    po = a.po()
    preds = [0] * n
    for i in range(n):
        for j in _bits(po.rows[i]):
            preds[j] |= 1 << i
    mo_pred = {}
    for ws in a.mo.values():
        for i, w in enumerate(ws):
            mo_pred[w] = ws[i - 1] if i else None
    seen_fail = set()

    def go(done: int, last: tuple) -> bool:
        if done == (1 << n) - 1:
            return True
        key = (done, last)
        if key in seen_fail:
            return False
        for e in a.events:
            b = 1 << e.id
            if done & b or preds[e.id] & ~done:
                continue
            lab = e.label
            lw = dict(last)
            if lab.is_read and a.rf[e.id] != lw.get(lab.loc):
                continue
            if lab.is_write:
                if mo_pred[e.id] != lw.get(lab.loc):
                    continue
                lw[lab.loc] = e.id
            if go(done | b, tuple(sorted(lw.items()))):
                return True
        seen_fail.add(key)
        return False

    return go(0, ())

