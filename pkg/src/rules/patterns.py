"""Event patterns and the rule templates built from them"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

from src.model.state import Decision
from src.statespace.graph import EdgeLabel

Bindings = Dict[str, Any]
FrozenBindings = Tuple[Tuple[str, Any], ...]


@dataclass(frozen=True)
class TermVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TermLit:
    value: Union[int, str]

    def __str__(self):
        return f'"{self.value}"' if isinstance(self.value, str) else str(self.value)


@dataclass(frozen=True)
class TermAny:
    def __str__(self):
        return '_'


Term = Union[TermVar, TermLit, TermAny]
ANY = TermAny()

_MISSING = object()


def freeze(bindings: Bindings) -> FrozenBindings:
    return tuple(sorted(bindings.items(), key=lambda kv: kv[0]))


def _match_term(term: Term, value: Any, bindings: Bindings) -> bool:
    """Match one term, extending bindings in place"""
    if isinstance(term, TermAny):
        return True
    if value is _MISSING:
        return False
    if isinstance(term, TermLit):
        return term.value == value and type(term.value) is type(value)
    if term.name in bindings:
        return bindings[term.name] == value
    bindings[term.name] = value
    return True


@dataclass(frozen=True)
class EventPattern:
    """(user, account) "action" (key = term, ...) with a decision"""
    user: Term
    account: Term
    action: str
    params: Tuple[Tuple[str, Term], ...] = ()
    decision: Decision = Decision.AUTHORIZED

    def with_decision(self, decision: Decision) -> 'EventPattern':
        return EventPattern(self.user, self.account, self.action, self.params, decision)

    def param_term(self, key: str) -> Optional[Term]:
        for k, term in self.params:
            if k == key:
                return term
        return None

    def variables(self) -> Tuple[str, ...]:
        terms = [self.user, self.account] + [t for _, t in self.params]
        return tuple(t.name for t in terms if isinstance(t, TermVar))

    def match(self, label: EdgeLabel, bindings: Optional[Bindings] = None) -> Optional[Bindings]:
        """Extended bindings when the edge matches, else None"""
        if label.action != self.action or label.decision != self.decision:
            return None
        result = dict(bindings or {})
        if not _match_term(self.user, label.user, result):
            return None
        account = label.account if label.account is not None else _MISSING
        if not _match_term(self.account, account, result):
            return None
        for key, term in self.params:
            if not _match_term(term, label_param(label, key), result):
                return None
        return result

    def __str__(self):
        params = ''
        if self.params:
            params = ' (' + ', '.join(f'{k} = {t}' for k, t in self.params) + ')'
        return f'({self.user}, {self.account}) "{self.action}"{params} ^{self.decision.value}'


def label_param(label: EdgeLabel, key: str) -> Any:
    """Request parameter, else response payload entry, as a plain value"""
    value = label.request.params.get(key)
    if value is None:
        value = label.payload.get(key)
    return _MISSING if value is None else value.value


@dataclass(frozen=True)
class Precedence:
    """target is insecure unless guard occurred earlier on the path with compatible bindings"""
    guard: EventPattern
    target: EventPattern


@dataclass(frozen=True)
class Response:
    """After the antecedents match in order, an edge matching forbidden is insecure.

    A match of `unless` after the last antecedent cancels that antecedent match.
    """
    antecedents: Tuple[EventPattern, ...]
    forbidden: EventPattern
    unless: Optional[EventPattern] = None


@dataclass(frozen=True)
class ThreeStrikes:
    """Authorizing `action` after `threshold` consecutive denials for one (user, account)"""
    action: str
    threshold: int = 3

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be at least 1")


@dataclass(frozen=True)
class Accumulation:
    """Sum of linked forms/auth pair values on one (user, account) must stay within limit"""
    forms: EventPattern
    auth: EventPattern
    link_key: str
    value_key: str
    dest_key: str
    registered: bool
    limit: int
    registry_task: str
    registry_key: str = 'registered'
    # false when prior pairs are summed whatever their destination
    sum_filtered: bool = True

    def __post_init__(self):
        if self.limit <= 0:
            raise ValueError("limit must be positive")

    @property
    def filter(self) -> str:
        return 'registered' if self.registered else 'unregistered'


Rule = Union[Precedence, Response, ThreeStrikes, Accumulation]


@dataclass(frozen=True)
class RuleSpec:
    rule_id: str
    text: str
    rule: Rule
