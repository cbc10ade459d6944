from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import corpus_names, load, load_text, random_program
from wmrobust.lang import (BLOCKED, BOUND, FINISHED, AnalysisError, Compiled, DslError, Fence, Program, Step,
                           ThreadState, advance, critical_pairs, enabled_step, parse, pretty, settle, wrap64)

SB = """
atomic x1, x2;
thread t1 { x1.store(1, acqrel); r1 = x2.load(acqrel); }
thread t2 { x2.store(1, acqrel); r2 = x1.load(acqrel); }
"""


def _atomic_accesses(c: Compiled) -> int:
    return sum(1 for code in c.code for i in code if i.is_atomic and i.op != "fence")


def test_parse_sb():
    p = parse(SB)
    assert p.thread_names == ("t1", "t2")
    assert _atomic_accesses(Compiled.of(p)) == 4


def test_parse_sc_fence_stays_one_statement():
    p = parse("thread t1 { fence(sc); }")
    assert len(p.threads) == 1
    assert p.threads[0].body == (Fence("sc"),)
    assert p.atomic_locs == ("$f",)


def test_sc_fence_compiles_to_three_instructions():
    code = Compiled.of(parse("thread t1 { fence(sc); }")).code[0]
    assert [(i.op, i.mode, i.loc) for i in code] == [("fence", "acq", None), ("fadd", "acqrel", "$f"),
                                                     ("fence", "rel", None)]


@pytest.mark.parametrize("src, msg", [
    ("atomic x; thread t1 { r1 = x.load(rel); }", "not allowed for load"),
    ("atomic x; thread t1 { x.store(1, acq); }", "not allowed for store"),
    ("atomic x; thread t1 { r1 = x.load(acq); wait(x, r1); }", "constant"),
    ("atomic x; thread t1 { r1 = 0; bcas(x, r1, 1, acq); }", "constant"),
    ("atomic x; thread t1 { r1 = cas_strong(x, r2, 1, acq); }", "constant"),
    ("atomic x; thread t1 { x = 1; }", ".store"),
    ("atomic x; thread t1 { r1 = y.load(acq); }", "not a declared atomic"),
    ("atomic x; thread t1 { x.store(1, rlx) }", "expected ';'"),
    ("atomic x, x; thread t1 { skip; }", "declared twice"),
    ("atomic x;", "at least one thread"),
])
def test_parse_errors(src, msg):
    with pytest.raises(DslError) as ei:
        parse(src)
    assert msg in str(ei.value)
    line, col = str(ei.value).split(":")[:2]
    assert int(line) >= 1 and int(col) >= 1


def test_error_position():
    with pytest.raises(DslError) as ei:
        parse("atomic x;\nthread t1 {\n  r1 = x.load(rel);\n}")
    assert str(ei.value).startswith("3:15:")


def test_critical_pairs():
    assert critical_pairs(load("barw11").program) == {("x1", 1), ("x2", 1)}
    assert critical_pairs(load("sb").program) == frozenset()
    p = parse("atomic x1; thread t1 { r1 = cas_strong(x1, 0, 5, acq); wait(x1, 1); }")
    assert critical_pairs(p) == {("x1", 0), ("x1", 1)}
    weak = parse("atomic x1; thread t1 { r1 = cas_weak(x1, 0, 5, acq); }")
    assert critical_pairs(weak) == frozenset()


def test_critical_pairs_ignore_thread_order():
    for name in corpus_names():
        p = load(name).program
        rev = Program(p.atomics, p.nonatomics, tuple(reversed(p.threads)))
        assert critical_pairs(rev) == critical_pairs(p)


def test_enabled_step_examples():
    c = load("barw11")
    ts = c.initial_states(4)
    st = enabled_step(c.code[1], 1, advance(c.code[1], ts[1], enabled_step(c.code[1], 1, ts[1], {}), None, 4),
                      {"x1": 0, "x2": 1})
    assert st == BLOCKED
    sb = Compiled.of(parse(SB))
    st = enabled_step(sb.code[0], 0, sb.initial_states(4)[0], {"x1": 0, "x2": 0})
    assert isinstance(st, Step)
    # acqrel on a plain store keeps only its release half
    assert (st.kind, st.loc, st.mode) == ("W", "x1", "rel")
    assert st.outcome(None, ThreadState())[1] == 1
    done = ThreadState(pc=len(sb.code[0]))
    assert enabled_step(sb.code[0], 0, done, {}) == FINISHED


def test_wait_enables_exactly_on_expected_value():
    c = Compiled.of(parse("atomic x; thread t1 { wait(x, 3); }"))
    ts = c.initial_states(4)[0]
    for v in range(6):
        st = enabled_step(c.code[0], 0, ts, {"x": v})
        assert (st != BLOCKED) == (v == 3)


def test_loop_bound_exhaustion():
    c = Compiled.of(parse("thread t1 { r1 = 1; while (r1 == 1) { skip; } }"))
    ts = settle(c.code[0], ThreadState(), 3)
    assert ts.status == BOUND


def test_undefined_register_is_analysis_error():
    c = Compiled.of(parse("atomic x; thread t1 { x.store(r9, rlx); }"))
    st = enabled_step(c.code[0], 0, c.initial_states(2)[0], {"x": 0})
    with pytest.raises(AnalysisError):
        st.outcome(None, ThreadState())


def test_cas_register_gets_old_value():
    c = Compiled.of(parse("atomic x; thread t1 { r1 = cas_strong(x, 0, 7, acqrel); }"))
    st = enabled_step(c.code[0], 0, c.initial_states(2)[0], {"x": 0})
    assert st.outcome(0, ThreadState()) == ("RMW", 7)
    assert st.outcome(4, ThreadState()) == ("R", None)
    after = advance(c.code[0], c.initial_states(2)[0], st, 4, 2)
    assert after.reg("r1") == 4


def test_arithmetic_wraps_to_64_bits():
    assert wrap64(2 ** 63) == -(2 ** 63)
    assert wrap64(-1) == -1


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_round_trip(name):
    p = parse(load_text(name))
    assert parse(pretty(p)) == p


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_generated_round_trip(seed):
    p = parse(random_program(random.Random(seed)))
    assert parse(pretty(p)) == p
