"""Small shared helpers: immutable dicts and error roots."""

from __future__ import annotations

from typing import Any, Iterable, Iterator, Mapping


class TreetransError(Exception):
    """Root of all library errors."""


class FrozenDict(Mapping):
    """Immutable, hashable mapping used for machine memories and tables."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping | Iterable = ()):
        self._data = dict(data)
        self._hash = None

    def __getitem__(self, key: Any) -> Any:
        return self._data[key]

    def __iter__(self) -> Iterator:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, FrozenDict):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def set(self, key: Any, value: Any) -> "FrozenDict":
        new = dict(self._data)
        new[key] = value
        return FrozenDict(new)

    def __repr__(self) -> str:
        items = ", ".join(f"{k!r}: {v!r}" for k, v in sorted(self._data.items(), key=repr))
        return "{" + items + "}"


class LazyRules:
    """Transition table computed on demand.

    Behaves like a read-only dict for lookups; supports machines whose full
    table would be astronomically large (e.g. lookaround elimination).
    """

    __slots__ = ("_fn", "_cache", "_misses")

    def __init__(self, fn):
        self._fn = fn
        self._cache: dict = {}
        self._misses: set = set()

    def get(self, key, default=None):
        if key in self._cache:
            return self._cache[key]
        if key in self._misses:
            return default
        value = self._fn(key)
        if value is None:
            self._misses.add(key)
            return default
        self._cache[key] = value
        return value

    def __contains__(self, key) -> bool:
        return self.get(key) is not None

    def __getitem__(self, key):
        value = self.get(key)
        if value is None:
            raise KeyError(key)
        return value
