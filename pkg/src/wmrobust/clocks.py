"""Timestamp-map lattices: location clocks, vector clocks and location-value clocks.

All three are finite partial maps with a default for absent keys.  Join is
pointwise max and the empty map is bottom.  Entries are kept in a plain dict;
``pairs()`` exposes the sorted (key, timestamp) view used for reports.
"""

from __future__ import annotations

from typing import Any, Dict, Hashable, Iterable, Iterator, Mapping, Optional, Tuple


class _TimestampMap:
    """Shared machinery; subclasses fix the default for absent keys."""

    __slots__ = ("_d",)
    default: int = 0

    def __init__(self, entries: Optional[Mapping[Hashable, int] | Iterable[Tuple[Hashable, int]]] = None):
        self._d: Dict[Hashable, int] = dict(entries) if entries else {}

    def __getitem__(self, key: Hashable) -> int:
        return self._d.get(key, self.default)

    def __setitem__(self, key: Hashable, ts: int) -> None:
        self._d[key] = ts

    def get(self, key: Hashable) -> int:
        return self[key]

    def keys(self):
        return self._d.keys()

    def items(self):
        return self._d.items()

    def pairs(self) -> list[tuple[Hashable, int]]:
        return sorted(self._d.items(), key=lambda kv: _sort_key(kv[0]))

    def copy(self):
        new = self.__class__.__new__(self.__class__)
        new._d = dict(self._d)
        return new

    def join(self, other: "_TimestampMap"):
        """Pure join; neither operand is touched."""
        out = self.copy()
        out.join_in(other)
        return out

    def join_in(self, other: "_TimestampMap") -> None:
        """In-place join into ``self``."""
        d = self._d
        for k, v in other._d.items():
            cur = d.get(k)
            if cur is None or v > cur:
                d[k] = v

    def leq(self, other: "_TimestampMap") -> bool:
        for k, v in self._d.items():
            if v > other[k]:
                return False
        # absent keys on our side sit at the default, which is bottom
        return True

    def assign(self, other: "_TimestampMap") -> None:
        self._d = dict(other._d)

    def key(self) -> tuple:
        """Canonical hashable form that ignores entries at the default."""
        dflt = self.default
        return tuple(sorted(((k, v) for k, v in self._d.items() if v != dflt), key=lambda kv: _sort_key(kv[0])))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _TimestampMap):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._d)

    def __repr__(self) -> str:
        body = ", ".join(f"{_render_key(k)}:{v}" for k, v in self.pairs())
        return f"{{{body}}}"

    def to_json(self) -> dict[str, int]:
        return {_render_key(k): v for k, v in self.pairs()}


def _sort_key(k: Any) -> tuple:
    if isinstance(k, tuple):
        loc, val = k
        return (str(loc), 0 if val is None else 1, 0 if val is None else val)
    return (str(k), 0, 0)


def _render_key(k: Any) -> str:
    if isinstance(k, tuple):
        loc, val = k
        return str(loc) if val is None else f"{loc}@{val}"
    return str(k)


class LocationClock(_TimestampMap):
    """Location -> timestamp, absent locations read as 0."""

    __slots__ = ()


class VectorClock(_TimestampMap):
    """Thread -> timestamp, absent threads read as 0."""

    __slots__ = ()


def join(a: LocationClock, b: LocationClock) -> LocationClock:
    return a.join(b)


def lookup(c: LocationClock, x: Hashable) -> int:
    return c[x]


def vc_leq(a: VectorClock, b: VectorClock) -> bool:
    return a.leq(b)


class ClockKeyError(KeyError):
    """A location-value clock was queried outside its key domain."""


class LocationValueClock(_TimestampMap):
    """Keys are (loc, value) critical pairs plus default keys (loc, None).

    Entries start at -1.  The key domain is fixed at construction from the
    critical-pair set; touching a key outside it is a caller bug.
    """

    __slots__ = ("domain",)
    default = -1

    def __init__(self, domain: frozenset, entries=None):
        super().__init__(entries)
        self.domain = domain

    def copy(self):
        new = LocationValueClock.__new__(LocationValueClock)
        new._d = dict(self._d)
        new.domain = self.domain
        return new

    def _check(self, key) -> None:
        if key not in self.domain:
            raise ClockKeyError(f"key {_render_key(key)} is not tracked")

    def __getitem__(self, key):
        self._check(key)
        return self._d.get(key, -1)

    def __setitem__(self, key, ts: int) -> None:
        self._check(key)
        self._d[key] = ts

    def lookup(self, x: Hashable, v: Optional[int] = None) -> int:
        return self[(x, v)]


def lvc_domain(critical: Iterable[tuple[Hashable, int]]) -> frozenset:
    """Key domain for a critical-pair set: the pairs plus one default key per location."""
    pairs = set(critical)
    return frozenset(pairs | {(x, None) for x, _ in pairs})


def lvc_lookup(c: LocationValueClock, x: Hashable, v: Optional[int] = None) -> int:
    return c.lookup(x, v)
