"""Location-clock robustness monitor for release/acquire/relaxed atomics.

One :class:`RobustnessState` carries every clock family:

* SC clocks ``scT``/``scW``/``scM`` and their ``U`` variants, which only count
  plain (non-RMW) writes;
* happens-before views ``hbTc`` (current), ``hbTa`` (acquire), ``hbTr``
  (release) with ``U`` variants, plus the per-location ``hbW``/``hbWU``;
* location-value clocks ``vT``/``vW``/``vM`` (and ``U``) over the critical
  pairs of the program, used by wait, BCAS and strong CAS.

Per access the updates run in the order value clocks, SC clocks, HB views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .clocks import LocationClock, LocationValueClock, lvc_domain
from .lang import mode_geq

THREAD_FAMILIES = ("scT", "scTU", "hbTc", "hbTa", "hbTr", "hbTcU", "hbTaU", "hbTrU")
LOC_FAMILIES = ("scW", "scM", "scWU", "scMU", "hbW", "hbWU")
VTHREAD_FAMILIES = ("vT", "vTU")
VLOC_FAMILIES = ("vW", "vM", "vWU", "vMU")
FAMILIES = THREAD_FAMILIES + LOC_FAMILIES + VTHREAD_FAMILIES + VLOC_FAMILIES

ACCESS_KINDS = ("read", "weak_cas", "write", "fadd", "wait", "bcas", "strong_cas")


class ContractError(Exception):
    """An operation was applied outside the monitor's contract."""


@dataclass
class CheckFailure:
    """Outcome of a failed robustness check: the two compared timestamps."""

    hb_ts: int
    sc_ts: int
    clock: str          # which SC-side clock produced sc_ts: scT, scTU, vT or vTU
    value: Optional[int] = None   # LVC key value (None = default key) for value checks


def _update_lsc(T: dict, W: dict, M: dict, tid, x, typ: str, make) -> None:
    t = T.get(tid)
    if t is None:
        t = T[tid] = make()
    if typ in ("W", "RMW"):
        m = M.get(x)
        if m is not None:
            t.join_in(m)
        M[x] = t.copy()
        W[x] = t.copy()
    else:
        w = W.get(x)
        if w is not None:
            t.join_in(w)
        m = M.get(x)
        if m is None:
            M[x] = t.copy()
        else:
            m.join_in(t)


@dataclass
class RobustnessState:
    critical: frozenset = frozenset()
    value_tracking: bool = True
    clocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = lvc_domain(self.critical)
        self.cloc = frozenset(x for x, _ in self.critical)
        for f in FAMILIES:
            self.clocks.setdefault(f, {})

    # -- clock access --------------------------------------------------------

    def _lc(self) -> LocationClock:
        return LocationClock()

    def _lvc(self) -> LocationValueClock:
        return LocationValueClock(self.domain)

    def get(self, family: str, owner) -> LocationClock | LocationValueClock:
        """The clock of ``family`` for a thread or location (bottom if untouched)."""
        c = self.clocks[family].get(owner)
        if c is None:
            c = self._lvc() if family.startswith("v") else self._lc()
        return c

    def _slot(self, family: str, owner):
        fam = self.clocks[family]
        c = fam.get(owner)
        if c is None:
            c = fam[owner] = self._lvc() if family.startswith("v") else self._lc()
        return c

    def __getattr__(self, name):
        # scT, hbW, ... resolve to a lookup function over owners
        if name in FAMILIES:
            return lambda owner: self.get(name, owner)
        raise AttributeError(name)

    def copy(self) -> "RobustnessState":
        new = RobustnessState.__new__(RobustnessState)
        new.critical = self.critical
        new.value_tracking = self.value_tracking
        new.domain = self.domain
        new.cloc = self.cloc
        new.clocks = {f: {k: c.copy() for k, c in fam.items()} for f, fam in self.clocks.items()}
        return new

    def key(self) -> tuple:
        return tuple(tuple(sorted((str(k), c.key()) for k, c in self.clocks[f].items() if c.key()))
                     for f in FAMILIES)

    def dump(self) -> dict:
        return {f: {str(k): c.to_json() for k, c in sorted(self.clocks[f].items(), key=lambda kv: str(kv[0]))}
                for f in FAMILIES}

    # -- updates -------------------------------------------------------------

    def on_access(self, tid, x: str, typ: str, mode: str, prev_value: int) -> None:
        if mode == "na" or mode not in ("rlx", "acq", "rel", "acqrel"):
            raise ContractError(f"location-clock monitor does not take {mode} accesses")
        if typ not in ("R", "W", "RMW"):
            raise ContractError(f"bad access type {typ}")
        c = self.clocks
        sc_w = c["scW"].get(x)
        sc_wu = c["scWU"].get(x)
        old_cnt = sc_w[x] if sc_w is not None else 0
        old_cnt_u = sc_wu[x] if sc_wu is not None else 0

        if self.critical:
            self._lvc_update(tid, x, typ, prev_value, old_cnt, old_cnt_u)

        # SC clocks
        if typ in ("W", "RMW"):
            self._slot("scM", x)[x] = old_cnt + 1
        _update_lsc(c["scT"], c["scW"], c["scM"], tid, x, typ, self._lc)
        if typ == "W":
            self._slot("scMU", x)[x] = old_cnt_u + 1
        _update_lsc(c["scTU"], c["scWU"], c["scMU"], tid, x, typ, self._lc)

        self._hb_update(tid, x, typ, mode)

    def _lvc_update(self, tid, x, typ, prev_value, cnt, cnt_u) -> None:
        c = self.clocks
        if x in self.cloc:
            key = (x, prev_value) if (x, prev_value) in self.domain else (x, None)
            if typ in ("W", "RMW"):
                self._slot("vM", x)[key] = cnt
        # propagation runs for every location so that knowledge about
        # overwrites of critical values travels through unrelated accesses
        _update_lsc(c["vT"], c["vW"], c["vM"], tid, x, typ, self._lvc)
        if x in self.cloc and typ == "W":
            key = (x, prev_value) if (x, prev_value) in self.domain else (x, None)
            self._slot("vMU", x)[key] = cnt_u
        _update_lsc(c["vTU"], c["vWU"], c["vMU"], tid, x, typ, self._lvc)

    def _hb_update(self, tid, x, typ, mode) -> None:
        W = self._slot("hbW", x)
        WU = self._slot("hbWU", x)
        if typ in ("W", "RMW"):
            W[x] = W[x] + 1
        if typ == "W":
            WU[x] = WU[x] + 1
        cnt, cnt_u = W[x], WU[x]
        Tc, TcU = self._slot("hbTc", tid), self._slot("hbTcU", tid)
        Ta, TaU = self._slot("hbTa", tid), self._slot("hbTaU", tid)
        for clk, v in ((Tc, cnt), (TcU, cnt_u), (Ta, cnt), (TaU, cnt_u)):
            if clk[x] < v:
                clk[x] = v
        if typ in ("R", "RMW"):
            Ta.join_in(W)
            TaU.join_in(WU)
            if mode_geq(mode, "acq"):
                Tc.join_in(W)
                TcU.join_in(WU)
        if typ in ("W", "RMW"):
            rel = mode_geq(mode, "rel")
            src = Tc if rel else self._slot("hbTr", tid)
            src_u = TcU if rel else self._slot("hbTrU", tid)
            if typ == "W":
                # the location keeps its own write counter even when the
                # released view does not mention it
                newW, newWU = src.copy(), src_u.copy()
                newW[x] = max(newW[x], cnt)
                newWU[x] = max(newWU[x], cnt_u)
                self.clocks["hbW"][x] = newW
                self.clocks["hbWU"][x] = newWU
            else:
                W.join_in(src)
                WU.join_in(src_u)

    def on_fence(self, tid, mode: str) -> None:
        if mode not in ("acq", "rel", "acqrel"):
            raise ContractError(f"fence mode {mode} must be desugared before monitoring")
        c = self.clocks
        if mode_geq(mode, "acq"):
            c["hbTc"][tid] = self.get("hbTa", tid).copy()
            c["hbTcU"][tid] = self.get("hbTaU", tid).copy()
        if mode_geq(mode, "rel"):
            c["hbTr"][tid] = self.get("hbTc", tid).copy()
            c["hbTrU"][tid] = self.get("hbTcU", tid).copy()

    # -- checks --------------------------------------------------------------

    def check(self, tid, x: str, access: str, v: Optional[int] = None) -> Optional[CheckFailure]:
        """Robustness check for the pending access; None when clear."""
        if access not in ACCESS_KINDS:
            raise ContractError(f"unknown access kind {access}")
        tc = self.get("hbTc", tid)[x]
        tcu = self.get("hbTcU", tid)[x]
        if not self.value_tracking:
            # naive treatment: blocking and strong accesses checked like plain ones
            if access == "wait":
                access = "read"
            elif access == "bcas":
                access = "write"
            elif access == "strong_cas":
                return self.check(tid, x, "write") or self.check(tid, x, "read")
        if access in ("read", "weak_cas"):
            s = self.get("scT", tid)[x]
            return CheckFailure(tc, s, "scT") if tc < s else None
        if access in ("write", "fadd"):
            s = self.get("scTU", tid)[x]
            return CheckFailure(tcu, s, "scTU") if tcu < s else None
        vT = self.get("vT", tid)
        if access == "wait":
            s = vT[(x, v)]
            return CheckFailure(tc, s, "vT", v) if tc <= s else None
        vTU = self.get("vTU", tid)
        s = vTU[(x, v)]
        if tcu <= s:
            return CheckFailure(tcu, s, "vTU", v)
        if access == "bcas":
            return None
        for (y, u) in sorted(self.domain, key=lambda k: (k[1] is None, k[1] or 0)):
            if y != x or u == v:
                continue
            s = vT[(x, u)]
            if tc <= s:
                return CheckFailure(tc, s, "vT", u)
        return None


def new_state(critical: Iterable = (), value_tracking: bool = True) -> RobustnessState:
    return RobustnessState(frozenset(critical), value_tracking)
