"""Vector-clock data-race detection for non-atomic locations.

Valid for robust programs: only SC runs are monitored, and happens-before
is the RC20 one (release/acquire, release sequences through RMWs, fences).
Thread epochs count release events; ``Tc(τ)(τ)`` starts at 1 so that a
thread's own non-atomic accesses are always ordered before its later ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .clocks import VectorClock
from .lang import mode_geq


@dataclass(frozen=True)
class Access:
    thread: str
    line: Optional[int]
    kind: str   # "read" or "write"

    def to_json(self) -> dict:
        return {"thread": self.thread, "line": self.line, "kind": self.kind}


@dataclass(frozen=True)
class RaceReport:
    loc: str
    access1: Access   # the earlier access
    access2: Access   # the access that failed its assertion
    conditional: bool = False

    def pair_key(self) -> tuple:
        a = (self.access1.line, self.access1.kind)
        b = (self.access2.line, self.access2.kind)
        return (self.loc,) + tuple(sorted([a, b], key=repr))

    def to_json(self) -> dict:
        return {"loc": self.loc, "access1": self.access1.to_json(), "access2": self.access2.to_json(),
                "conditional": self.conditional}


@dataclass
class RaceState:
    tids: tuple
    Tr: dict = field(default_factory=dict)
    Tc: dict = field(default_factory=dict)
    Ta: dict = field(default_factory=dict)
    W: dict = field(default_factory=dict)
    NW: dict = field(default_factory=dict)
    NR: dict = field(default_factory=dict)
    # last access line per (location, thread), used to name the other side of a race
    last_w: dict = field(default_factory=dict)
    last_r: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, tids: Iterable[str]) -> "RaceState":
        s = cls(tuple(tids))
        for t in s.tids:
            s.Tc[t] = VectorClock({t: 1})
            s.Tr[t] = VectorClock()
            s.Ta[t] = VectorClock()
        return s

    def copy(self) -> "RaceState":
        cp = lambda d: {k: v.copy() for k, v in d.items()}
        return RaceState(self.tids, cp(self.Tr), cp(self.Tc), cp(self.Ta), cp(self.W), cp(self.NW), cp(self.NR),
                         dict(self.last_w), dict(self.last_r))

    def key(self) -> tuple:
        parts = []
        for d in (self.Tr, self.Tc, self.Ta, self.W, self.NW, self.NR):
            parts.append(tuple(sorted((k, v.key()) for k, v in d.items())))
        return tuple(parts)

    def vc(self, family: str, owner) -> VectorClock:
        return getattr(self, family).get(owner) or VectorClock()

    def dump(self) -> dict:
        return {f: {str(k): v.to_json() for k, v in sorted(getattr(self, f).items())}
                for f in ("Tr", "Tc", "Ta", "W", "NW", "NR")}

    # -- updates -------------------------------------------------------------

    def on_atomic(self, tid: str, x: str, typ: str, mode: str) -> None:
        Tc = self.Tc[tid]
        if typ in ("R", "RMW"):
            w = self.W.get(x)
            if w is not None:
                (Tc if mode_geq(mode, "acq") else self.Ta[tid]).join_in(w)
        if typ in ("W", "RMW"):
            src = Tc if mode_geq(mode, "rel") else self.Tr[tid]
            if typ == "W":
                self.W[x] = src.copy()
            else:
                self.W[x] = self.vc("W", x).join(src)
            if mode_geq(mode, "rel"):
                Tc[tid] = Tc[tid] + 1

    def on_fence(self, tid: str, mode: str) -> None:
        if mode_geq(mode, "acq"):
            self.Tc[tid].join_in(self.Ta[tid])
        if mode_geq(mode, "rel"):
            self.Tr[tid] = self.Tc[tid].copy()
            self.Tc[tid][tid] = self.Tc[tid][tid] + 1

    def on_nonatomic(self, tid: str, n: str, typ: str, line: Optional[int] = None) -> list[RaceReport]:
        """Apply the non-atomic access and return the races it exposes (possibly none)."""
        Tc = self.Tc[tid]
        kind = "read" if typ == "R" else "write"
        me = Access(tid, line, kind)
        found = []
        nw = self.vc("NW", n)
        for p, t in nw.items():
            if t > Tc[p]:
                found.append(RaceReport(n, Access(p, self.last_w.get((n, p)), "write"), me))
        if typ == "R":
            self.NR.setdefault(n, VectorClock())[tid] = Tc[tid]
            self.last_r[(n, tid)] = line
        else:
            nr = self.vc("NR", n)
            for p, t in nr.items():
                if t > Tc[p]:
                    found.append(RaceReport(n, Access(p, self.last_r.get((n, p)), "read"), me))
            self.NW.setdefault(n, VectorClock())[tid] = Tc[tid]
            self.last_w[(n, tid)] = line
        return sorted(found, key=lambda r: (r.access1.thread, r.access1.kind))
