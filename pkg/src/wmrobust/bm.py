"""Boolean-matrix robustness instrumentation for the release/acquire fragment.

Five matrices are kept as bitsets over an interned location table:

* ``T_HB``, ``T_SC``: thread -> locations whose latest write the thread is
  (hb resp. hbSC) aware of;
* ``W_HB``, ``W_SC``: location y -> locations whose latest write is ordered
  before the latest write to y;
* ``M_SC``: location y -> locations whose latest write is hbSC-before some
  event on y.

Updates apply all columns of a row simultaneously, i.e. every right-hand
side reads the pre-step state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional


class UnsupportedFragment(Exception):
    """The boolean-matrix engine only covers release/acquire reads and writes."""


@dataclass
class BMState:
    locs: tuple
    tids: tuple
    T_HB: dict = field(default_factory=dict)
    T_SC: dict = field(default_factory=dict)
    W_HB: dict = field(default_factory=dict)
    W_SC: dict = field(default_factory=dict)
    M_SC: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, locs: Iterable[str], tids: Iterable[str]) -> "BMState":
        locs, tids = tuple(locs), tuple(tids)
        full = (1 << len(locs)) - 1
        s = cls(locs, tids)
        for t in tids:
            s.T_HB[t] = full
            s.T_SC[t] = full
        for i, x in enumerate(locs):
            s.W_HB[x] = s.W_SC[x] = s.M_SC[x] = 1 << i
        return s

    def bit(self, x: str) -> int:
        try:
            return 1 << self.locs.index(x)
        except ValueError:
            raise UnsupportedFragment(f"unknown location {x}") from None

    def copy(self) -> "BMState":
        return BMState(self.locs, self.tids, dict(self.T_HB), dict(self.T_SC),
                       dict(self.W_HB), dict(self.W_SC), dict(self.M_SC))

    def key(self) -> tuple:
        return tuple(tuple(sorted(m.items())) for m in (self.T_HB, self.T_SC, self.W_HB, self.W_SC, self.M_SC))

    def members(self, bits: int) -> list[str]:
        return [x for i, x in enumerate(self.locs) if bits >> i & 1]

    def dump(self) -> dict:
        """All five matrices with location sets rendered as sorted lists."""
        out = {}
        for name in ("T_HB", "W_HB", "T_SC", "W_SC", "M_SC"):
            out[name] = {k: self.members(v) for k, v in getattr(self, name).items()}
        return out


def require_ra(typ: str, mode: Optional[str]) -> None:
    if typ not in ("R", "W"):
        raise UnsupportedFragment(f"{typ} accesses are outside the boolean-matrix fragment")
    if mode not in ("acq", "rel", "acqrel"):
        raise UnsupportedFragment(f"{mode} accesses are outside the boolean-matrix fragment")


def bm_step(s: BMState, tid: str, x: str, typ: str, mode: Optional[str] = "acqrel") -> BMState:
    """Return the state after ``tid`` reads or writes ``x``."""
    require_ra(typ, mode)
    b = s.bit(x)
    n = s.copy()
    if typ == "R":
        n.T_HB[tid] = s.T_HB[tid] | s.W_HB[x]
        n.T_SC[tid] = s.T_SC[tid] | s.W_SC[x]
        n.M_SC[x] = s.M_SC[x] | s.T_SC[tid]
        return n
    for p in s.tids:
        if p != tid:
            n.T_HB[p] = s.T_HB[p] & ~b
            n.T_SC[p] = s.T_SC[p] & ~b
    for y in s.locs:
        if y != x:
            n.W_HB[y] = s.W_HB[y] & ~b
            n.W_SC[y] = s.W_SC[y] & ~b
            n.M_SC[y] = s.M_SC[y] & ~b
    n.T_HB[tid] = s.T_HB[tid] | b
    n.W_HB[x] = s.T_HB[tid] | b
    n.T_SC[tid] = s.T_SC[tid] | s.M_SC[x]
    n.W_SC[x] = s.T_SC[tid] | s.M_SC[x]
    n.M_SC[x] = s.M_SC[x] | s.T_SC[tid]
    return n


def bm_check(s: BMState, tid: str, x: str) -> bool:
    """True when the pending access of ``tid`` to ``x`` is a robustness violation."""
    b = s.bit(x)
    return bool(s.T_SC[tid] & b) and not (s.T_HB[tid] & b)
