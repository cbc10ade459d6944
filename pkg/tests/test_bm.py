from __future__ import annotations

import json

import pytest

from helpers import CORPUS, load, ra_program_names
from wmrobust.bm import BMState, UnsupportedFragment, bm_check, bm_step, require_ra
from wmrobust.interp import FixedScheduler, Machine, Options, explore, run_once

SB_TRACE = json.loads((CORPUS / "sb-fig5.trace.json").read_text())
EX31_SEQ = json.loads((CORPUS / "ex31-sequential.trace.json").read_text())

# Golden BM table for the SB schedule: one dump per column (initial, W x1, R x2, W x2), sets as sorted lists
FIG3 = [
    {"T_HB": {"t1": ["x1", "x2"], "t2": ["x1", "x2"]}, "W_HB": {"x1": ["x1"], "x2": ["x2"]},
     "T_SC": {"t1": ["x1", "x2"], "t2": ["x1", "x2"]}, "W_SC": {"x1": ["x1"], "x2": ["x2"]},
     "M_SC": {"x1": ["x1"], "x2": ["x2"]}},
    {"T_HB": {"t1": ["x1", "x2"], "t2": ["x2"]}, "W_HB": {"x1": ["x1", "x2"], "x2": ["x2"]},
     "T_SC": {"t1": ["x1", "x2"], "t2": ["x2"]}, "W_SC": {"x1": ["x1", "x2"], "x2": ["x2"]},
     "M_SC": {"x1": ["x1", "x2"], "x2": ["x2"]}},
    {"T_HB": {"t1": ["x1", "x2"], "t2": ["x2"]}, "W_HB": {"x1": ["x1", "x2"], "x2": ["x2"]},
     "T_SC": {"t1": ["x1", "x2"], "t2": ["x2"]}, "W_SC": {"x1": ["x1", "x2"], "x2": ["x2"]},
     "M_SC": {"x1": ["x1", "x2"], "x2": ["x1", "x2"]}},
    {"T_HB": {"t1": ["x1"], "t2": ["x2"]}, "W_HB": {"x1": ["x1"], "x2": ["x2"]},
     "T_SC": {"t1": ["x1"], "t2": ["x1", "x2"]}, "W_SC": {"x1": ["x1"], "x2": ["x1", "x2"]},
     "M_SC": {"x1": ["x1"], "x2": ["x1", "x2"]}},
]


def bm_dumps(name, trace):
    dumps = []
    r = run_once(load(name), FixedScheduler(trace), Options(bm=True),
                 on_step=lambda m, st: dumps.append(m.bm.dump()))
    return dumps, r


def test_fig3_golden_table():
    dumps, r = bm_dumps("sb", SB_TRACE)
    assert dumps == FIG3
    assert [(v.thread, v.loc) for v in r.bm_violations] == [("t2", "x1")]


def test_step_examples():
    s = BMState.initial(["x1", "x2"], ["t1", "t2"])
    s1 = bm_step(s, "t1", "x1", "W")
    assert s1.members(s1.T_HB["t2"]) == ["x2"]
    assert s1.members(s1.W_HB["x1"]) == ["x1", "x2"]
    assert s1.members(s1.M_SC["x1"]) == ["x1", "x2"]
    s2 = bm_step(s1, "t1", "x2", "R")
    assert s2.members(s2.M_SC["x2"]) == ["x1", "x2"]
    # the input state is never mutated
    assert s.members(s.T_HB["t2"]) == ["x1", "x2"]


def test_fresh_read_only_grows_m_sc():
    s = BMState.initial(["x1", "x2"], ["t1", "t2"])
    s1 = bm_step(s, "t2", "x1", "R")
    # the views stay maximal; only M_SC(x1) learns what the reader knows
    for fam in ("T_HB", "T_SC", "W_HB", "W_SC"):
        assert getattr(s1, fam) == getattr(s, fam)
    assert s1.members(s1.M_SC["x1"]) == ["x1", "x2"]


def test_check_examples():
    s = BMState.initial(["x1", "x2"], ["t1", "t2"])
    assert not bm_check(s, "t1", "x1")
    for tid, x, typ in (("t1", "x1", "W"), ("t1", "x2", "R"), ("t2", "x2", "W")):
        s = bm_step(s, tid, x, typ)
    assert bm_check(s, "t2", "x1")


def test_ex31_sequential_is_missed_by_bm():
    _, r = bm_dumps("ex31", EX31_SEQ)
    assert r.bm_violations == []
    assert r.violations, "LC must flag the same schedule"


def test_fragment_guard():
    with pytest.raises(UnsupportedFragment):
        require_ra("RMW", "acqrel")
    with pytest.raises(UnsupportedFragment):
        require_ra("R", "rlx")
    with pytest.raises(UnsupportedFragment):
        Machine(load("barw11"), Options(bm=True))
    with pytest.raises(UnsupportedFragment):
        Machine(load("2+2w"), Options(bm=True))


def test_own_location_always_known():
    def visit(m):
        for x in m.comp.program.atomic_locs:
            assert m.bm.W_HB[x] & m.bm.bit(x)
    explore(load("ex31"), opts=Options(bm=True), visit=visit)


# -- graph meaning and the bridge to location clocks ----------------------------

def _in(bits, s, x):
    return bool(bits & s.bit(x))


def _graph_sets(g, tid, x, y):
    """(x∈T_HB(tid), x∈T_SC(tid), x∈W_HB(y), x∈W_SC(y), x∈M_SC(y)) recomputed from the graph."""
    a = g.atomic_view()
    hb, sc = a.hb().refl(), a.hb_sc().refl()
    wx, wy = a.wmax(x), a.wmax(y)
    init_x = a.events[wx].is_init
    mine = a.mask(lambda e: e.tid == tid)
    at_y = a.mask(lambda e: e.label.loc == y)
    return (init_x or bool(hb.rows[wx] & mine), init_x or bool(sc.rows[wx] & mine),
            bool(hb.rows[wx] >> wy & 1), bool(sc.rows[wx] >> wy & 1), bool(sc.rows[wx] & at_y))


@pytest.mark.parametrize("name", ra_program_names())
def test_set_semantics_and_bridge(name):
    comp = load(name)
    locs = comp.program.atomic_locs
    tids = comp.program.thread_names
    seen = [0]

    def visit(m):
        seen[0] += 1
        s, lc = m.bm, m.lc
        for x in locs:
            cw_hb, cw_sc = lc.hbW(x)[x], lc.scW(x)[x]
            for t in tids:
                exp = _graph_sets(m.graph, t, x, x)
                assert _in(s.T_HB[t], s, x) == exp[0]
                assert _in(s.T_SC[t], s, x) == exp[1]
                # bridge: membership iff the thread's clock has caught up with the location's counter
                assert _in(s.T_HB[t], s, x) == (lc.hbTc(t)[x] == cw_hb)
                assert _in(s.T_SC[t], s, x) == (lc.scT(t)[x] == cw_sc)
            for y in locs:
                exp = _graph_sets(m.graph, tids[0], x, y)
                assert _in(s.W_HB[y], s, x) == exp[2]
                assert _in(s.W_SC[y], s, x) == exp[3]
                assert _in(s.M_SC[y], s, x) == exp[4]
                if cw_hb:
                    # an initial write leaves no timestamp to compare against
                    assert _in(s.W_HB[y], s, x) == (lc.hbW(y)[x] == cw_hb)
                    assert _in(s.W_SC[y], s, x) == (lc.scW(y)[x] == cw_sc)
                    assert _in(s.M_SC[y], s, x) == (lc.scM(y)[x] == cw_sc)

    explore(comp, opts=Options(bm=True, build_graph=True, loop_bound=2), visit=visit)
    assert seen[0] > 1
