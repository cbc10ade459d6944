from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from wmrobust.clocks import (ClockKeyError, LocationClock, LocationValueClock, VectorClock, join, lookup,
                             lvc_domain, lvc_lookup, vc_leq)

LAW_EXAMPLES = 10_000
LOCS = ("x1", "x2", "x3", "y")
CRIT = frozenset({("x1", 1), ("x1", 2), ("x2", 0)})
DOMAIN = lvc_domain(CRIT)


def test_join_examples():
    assert join(LocationClock({"x1": 1}), LocationClock({"x2": 1})) == LocationClock({"x1": 1, "x2": 1})
    assert join(LocationClock({"x1": 1, "x2": 0}), LocationClock()) == LocationClock({"x1": 1, "x2": 0})
    assert join(LocationClock({"x1": 2, "x2": 1}), LocationClock({"x1": 1, "x2": 3})) == LocationClock({"x1": 2, "x2": 3})


def test_join_leaves_operands_alone():
    a, b = LocationClock({"x1": 1}), LocationClock({"x1": 5})
    c = join(a, b)
    assert a.pairs() == [("x1", 1)] and b.pairs() == [("x1", 5)] and c["x1"] == 5


def test_join_in_matches_pure_join():
    a, b = LocationClock({"x1": 1, "x2": 4}), LocationClock({"x1": 3})
    expect = join(a, b)
    a.join_in(b)
    assert a == expect


def test_lookup_examples():
    assert lookup(LocationClock({"x1": 1}), "x1") == 1
    assert lookup(LocationClock({"x1": 1}), "x2") == 0
    assert lookup(LocationClock(), "x1") == 0


def test_vc_leq_examples():
    assert vc_leq(VectorClock({"t1": 1}), VectorClock({"t1": 1, "t2": 1}))
    assert not vc_leq(VectorClock({"t1": 2}), VectorClock({"t1": 1}))
    assert vc_leq(VectorClock(), VectorClock())


def test_lvc_examples():
    c = LocationValueClock(DOMAIN)
    assert lvc_lookup(c, "x1", 2) == -1
    c[("x1", 2)] = 0
    assert lvc_lookup(c, "x1", 2) == 0
    assert lvc_lookup(c, "x1") == -1


def test_lvc_rejects_untracked_keys():
    c = LocationValueClock(DOMAIN)
    with pytest.raises(ClockKeyError):
        lvc_lookup(c, "x1", 7)
    with pytest.raises(ClockKeyError):
        lvc_lookup(c, "x3")
    with pytest.raises(ClockKeyError):
        c[("x2", 1)] = 0


def test_lvc_domain_adds_default_keys():
    assert DOMAIN == CRIT | {("x1", None), ("x2", None)}


def test_rendering_is_sorted():
    assert repr(LocationClock({"x2": 1, "x1": 3})) == "{x1:3, x2:1}"
    assert LocationValueClock(DOMAIN, {("x1", 2): 0, ("x1", None): 1}).to_json() == {"x1": 1, "x1@2": 0}


def test_equality_ignores_explicit_defaults():
    assert LocationClock({"x1": 0}) == LocationClock()
    assert LocationValueClock(DOMAIN, {("x1", 1): -1}) == LocationValueClock(DOMAIN)


# -- lattice laws ---------------------------------------------------------------

ts = st.integers(min_value=0, max_value=2 ** 64 - 1)
lcs = st.dictionaries(st.sampled_from(LOCS), ts, max_size=4).map(LocationClock)
vcs = st.dictionaries(st.sampled_from(("t1", "t2", "t3")), ts, max_size=3).map(VectorClock)
lvcs = st.dictionaries(st.sampled_from(sorted(DOMAIN, key=repr)), st.integers(-1, 50), max_size=5).map(
    lambda d: LocationValueClock(DOMAIN, d))
any_clock = st.one_of(
    st.tuples(lcs, lcs, lcs),
    st.tuples(vcs, vcs, vcs),
    st.tuples(lvcs, lvcs, lvcs),
)


def _keys(*clocks):
    ks = set()
    for c in clocks:
        ks |= set(c.keys())
    return ks


@settings(max_examples=LAW_EXAMPLES, deadline=None)
@given(any_clock)
def test_lattice_laws(abc):
    a, b, c = abc
    bottom = a.__class__(DOMAIN) if isinstance(a, LocationValueClock) else a.__class__()
    # commutative, associative, idempotent, bottom identity
    assert a.join(b) == b.join(a)
    assert a.join(b).join(c) == a.join(b.join(c))
    assert a.join(a) == a
    assert a.join(bottom) == a
    # leq is a partial order with join as least upper bound
    assert a.leq(a)
    if a.leq(b) and b.leq(a):
        assert a == b
    if a.leq(b) and b.leq(c):
        assert a.leq(c)
    ab = a.join(b)
    assert a.leq(ab) and b.leq(ab)
    if a.leq(c) and b.leq(c):
        assert ab.leq(c)
    # lookup after join is the max of lookups
    for k in _keys(a, b) | ({"x1", "zz"} if not isinstance(a, LocationValueClock) else set()):
        assert ab[k] == max(a[k], b[k])


@settings(max_examples=2000, deadline=None)
@given(lcs, lcs)
def test_in_place_join_agrees(a, b):
    expect = a.join(b)
    a.join_in(b)
    assert a == expect
