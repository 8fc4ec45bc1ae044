"""Shared typed key-value store through which tree leaves exchange data.

Writes made by a leaf are visible to every leaf ticked later in the same
traversal (plain left-to-right visibility over one dict). Reads of absent
keys raise; there are no silent defaults.
"""

from __future__ import annotations

from typing import Any, Callable, Mapping

from .core import BTError


class MissingKey(BTError):
    pass


class UndeclaredKey(BTError):
    pass


class BlackboardTypeError(BTError):
    pass


def _is_flag(v: Any) -> bool:
    return isinstance(v, bool)


def _is_integer(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_string(v: Any) -> bool:
    return isinstance(v, str)


def _is_hole(v: Any) -> bool:
    # duck check: anything with an id and a lifecycle state counts as a hole record
    return hasattr(v, "id") and hasattr(v, "state")


def _is_hole_queue(v: Any) -> bool:
    return hasattr(v, "order") or (isinstance(v, (list, tuple)) and all(_is_hole(h) for h in v))


TYPE_CHECKERS: dict[str, Callable[[Any], bool]] = {
    "integer": _is_integer,
    "real": _is_real,
    "string": _is_string,
    "flag": _is_flag,
    "hole": _is_hole,
    "hole-queue": _is_hole_queue,
}


class Blackboard:
    """Mapping from declared string keys to typed values, with a per-tick access log."""

    def __init__(self, declarations: Mapping[str, str] | None = None):
        if declarations:
            for key, type_name in declarations.items():
                if type_name not in TYPE_CHECKERS:
                    raise BlackboardTypeError(f"unknown blackboard type {type_name!r} for {key!r}")
        self.declarations = dict(declarations) if declarations else None
        self._values: dict[str, Any] = {}
        self._touched: list[str] = []

    def begin_tick(self) -> None:
        self._touched = []

    def keys_touched(self) -> list[str]:
        seen: list[str] = []
        for key in self._touched:
            if key not in seen:
                seen.append(key)
        return seen

    def has(self, key: str) -> bool:
        return key in self._values

    def get(self, key: str) -> Any:
        if key not in self._values:
            raise MissingKey(f"blackboard key {key!r} is not set")
        self._touched.append(key)
        return self._values[key]

    def set(self, key: str, value: Any) -> None:
        if self.declarations is not None:
            if key not in self.declarations:
                raise UndeclaredKey(f"blackboard key {key!r} is not declared")
            type_name = self.declarations[key]
            if value is not None and not TYPE_CHECKERS[type_name](value):
                raise BlackboardTypeError(
                    f"value for {key!r} does not match declared type {type_name!r}"
                )
        self._touched.append(key)
        self._values[key] = value

    def unset(self, key: str) -> None:
        self._values.pop(key, None)

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)


def blackboard_get(blackboard: Blackboard, key: str) -> Any:
    return blackboard.get(key)


def blackboard_set(blackboard: Blackboard, key: str, value: Any) -> None:
    blackboard.set(key, value)
