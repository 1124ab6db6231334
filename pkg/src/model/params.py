"""Parameter values and parameter sets attached to requests, sessions and (account, task) pairs"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple, Union

from src.utils.errors import ModelError, ParamTypeError

RawValue = Union[int, str, FrozenSet[int], FrozenSet[str]]


class ValueKind(Enum):
    INT = "int"
    TEXT = "text"
    INT_SET = "intset"
    TEXT_SET = "textset"


@dataclass(frozen=True)
class ParamValue:
    """Exactly one of integer, text, integer-set or text-set"""
    kind: ValueKind
    value: RawValue

    def __post_init__(self):
        if not _conforms(self.kind, self.value):
            raise ModelError(f"value {self.value!r} is not a valid {self.kind.value}")

    @staticmethod
    def of_int(value: int) -> 'ParamValue':
        return ParamValue(ValueKind.INT, value)

    @staticmethod
    def of_text(value: str) -> 'ParamValue':
        return ParamValue(ValueKind.TEXT, value)

    @staticmethod
    def of_int_set(values: Iterable[int] = ()) -> 'ParamValue':
        return ParamValue(ValueKind.INT_SET, frozenset(values))

    @staticmethod
    def of_text_set(values: Iterable[str] = ()) -> 'ParamValue':
        return ParamValue(ValueKind.TEXT_SET, frozenset(values))

    @staticmethod
    def from_python(value: Any, kind: Optional[ValueKind] = None) -> 'ParamValue':
        """Build a value from a plain Python int, str or collection"""
        if isinstance(value, ParamValue):
            return value
        if kind is not None:
            if kind in (ValueKind.INT_SET, ValueKind.TEXT_SET):
                return ParamValue(kind, frozenset(value))
            return ParamValue(kind, value)
        if isinstance(value, bool):
            raise ModelError("booleans cannot be stored as parameters")
        if isinstance(value, int):
            return ParamValue.of_int(value)
        if isinstance(value, str):
            return ParamValue.of_text(value)
        if isinstance(value, (set, frozenset, list, tuple)):
            items = list(value)
            if not items:
                raise ModelError("empty collection needs an explicit kind")
            if all(isinstance(v, int) and not isinstance(v, bool) for v in items):
                return ParamValue.of_int_set(items)
            if all(isinstance(v, str) for v in items):
                return ParamValue.of_text_set(items)
        raise ModelError(f"cannot store {value!r} as a parameter")

    def to_json(self) -> Any:
        """Plain JSON form; sets become sorted lists"""
        if self.kind in (ValueKind.INT_SET, ValueKind.TEXT_SET):
            return sorted(self.value)
        return self.value

    def __str__(self):
        if self.kind == ValueKind.TEXT:
            return f'"{self.value}"'
        if self.kind == ValueKind.INT_SET:
            return 'intset{' + ', '.join(str(v) for v in sorted(self.value)) + '}'
        if self.kind == ValueKind.TEXT_SET:
            return 'textset{' + ', '.join(f'"{v}"' for v in sorted(self.value)) + '}'
        return str(self.value)


def _conforms(kind: ValueKind, value: Any) -> bool:
    if kind == ValueKind.INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == ValueKind.TEXT:
        return isinstance(value, str)
    if not isinstance(value, frozenset):
        return False
    if kind == ValueKind.INT_SET:
        return all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    return all(isinstance(v, str) for v in value)


@dataclass(frozen=True)
class ParamSet:
    """Immutable key -> ParamValue map, entries kept sorted by key"""
    entries: Tuple[Tuple[str, ParamValue], ...] = ()
    _index: Dict[str, ParamValue] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        ordered = tuple(sorted(dict(self.entries).items()))
        if len(ordered) != len(self.entries):
            raise ModelError("duplicate keys in parameter set")
        object.__setattr__(self, 'entries', ordered)
        object.__setattr__(self, '_index', dict(ordered))

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any]) -> 'ParamSet':
        return ParamSet(tuple(
            (key, ParamValue.from_python(value)) for key, value in mapping.items()
        ))

    def get(self, key: str) -> Optional[ParamValue]:
        return self._index.get(key)

    def keys(self) -> Tuple[str, ...]:
        return tuple(key for key, _ in self.entries)

    def items(self) -> Tuple[Tuple[str, ParamValue], ...]:
        return self.entries

    def with_value(self, key: str, value: ParamValue) -> 'ParamSet':
        updated = dict(self._index)
        updated[key] = value
        return ParamSet(tuple(updated.items()))

    def without(self, key: str) -> 'ParamSet':
        return ParamSet(tuple((k, v) for k, v in self.entries if k != key))

    def to_dict(self) -> Dict[str, Any]:
        return {key: value.to_json() for key, value in self.entries}

    def __contains__(self, key: object) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keys())

    def __str__(self):
        return '{' + ', '.join(f'{k}: {v}' for k, v in self.entries) + '}'


EMPTY_PARAMS = ParamSet()


def param_get(p: ParamSet, key: str, default: ParamValue) -> ParamValue:
    """Stored value for key, or default when the key is absent"""
    stored = p.get(key)
    if stored is None:
        return default
    if stored.kind != default.kind:
        raise ParamTypeError(
            f"parameter '{key}' holds {stored.kind.value}, expected {default.kind.value}"
        )
    return stored


def param_merge(base: ParamSet, updates: ParamSet) -> ParamSet:
    """Keys in updates overwrite base, other base keys are kept"""
    if not updates.entries:
        return base
    merged = dict(base.items())
    merged.update(updates.items())
    return ParamSet(tuple(merged.items()))
