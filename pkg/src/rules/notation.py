"""Compiler for the communication-sequence rule notation"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

from src.model.state import Decision
from src.rules.patterns import (
    ANY, Accumulation, EventPattern, Precedence, Response, Rule, RuleSpec, Term, TermLit, TermVar,
    ThreeStrikes
)
from src.utils.errors import RuleNotationError
from src.utils.logger import get_logger

logger = get_logger('app')

IDENT = 'IDENT'
INT = 'INT'
STRING = 'STRING'
OP = 'OP'
EOF = 'EOF'

_TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"]*"|“[^”]*”)
  | (?P<op>->|=>|[→⇒¬∧∈∉Σ!()\[\]{},=^|:+>])
''', re.VERBOSE)

# unicode spellings folded onto the ASCII forms
_UNICODE_OPS = {
    '→': (OP, '->'),
    '⇒': (OP, '=>'),
    '¬': (OP, '!'),
    '∧': (IDENT, 'and'),
    '∈': (IDENT, 'in'),
    'Σ': (IDENT, 'sum'),
}
KEYWORDS = {'precedes', 'unless', 'and', 'in', 'not', 'sum', 'P_TA'}
_RULE_LINE_RE = re.compile(r'^\s*([A-Za-z0-9_\-]+)\s*:\s*(.+?)\s*$')


@dataclass(frozen=True)
class _Tok:
    kind: str
    value: str
    offset: int

    def __str__(self):
        return 'end of rule' if self.kind == EOF else repr(self.value)


def _tokenize(text: str) -> List[_Tok]:
    tokens: List[_Tok] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise RuleNotationError(f"unexpected character {text[pos]!r} at offset {pos}", text)
        kind = match.lastgroup
        value = match.group()
        if kind == 'int':
            tokens.append(_Tok(INT, value, pos))
        elif kind == 'ident':
            tokens.append(_Tok(IDENT, value, pos))
        elif kind == 'string':
            tokens.append(_Tok(STRING, value[1:-1], pos))
        elif kind == 'op':
            if value == '∉':
                tokens.append(_Tok(IDENT, 'not', pos))
                tokens.append(_Tok(IDENT, 'in', pos))
            else:
                folded_kind, folded = _UNICODE_OPS.get(value, (OP, value))
                tokens.append(_Tok(folded_kind, folded, pos))
        pos = match.end()
    tokens.append(_Tok(EOF, '', len(text)))
    return tokens


def _substitute(pattern: EventPattern, name: str, literal: TermLit) -> EventPattern:
    def sub(term: Term) -> Term:
        return literal if isinstance(term, TermVar) and term.name == name else term
    return EventPattern(
        sub(pattern.user), sub(pattern.account), pattern.action,
        tuple((k, sub(t)) for k, t in pattern.params), pattern.decision
    )


def _opposite(decision: Decision) -> Decision:
    return Decision.AUTHORIZED if decision == Decision.DENIED else Decision.DENIED


class RuleCompiler:
    """Recursive descent over one rule text"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Tok:
        return self.tokens[self.index]

    def advance(self) -> _Tok:
        token = self.current
        if token.kind != EOF:
            self.index += 1
        return token

    def error(self, message: str) -> RuleNotationError:
        return RuleNotationError(f"{message} at offset {self.current.offset}", self.text)

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        return self.current.kind == kind and (value is None or self.current.value == value)

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[_Tok]:
        return self.advance() if self.at(kind, value) else None

    def expect(self, kind: str, value: Optional[str] = None) -> _Tok:
        if not self.at(kind, value):
            wanted = repr(value) if value else kind.lower()
            raise self.error(f"expected {wanted}, found {self.current}")
        return self.advance()

    def expect_name(self, what: str) -> str:
        if not self.at(IDENT) or self.current.value in KEYWORDS:
            raise self.error(f"expected {what}, found {self.current}")
        return self.advance().value

    # events

    def parse_term(self) -> Term:
        if self.at(STRING):
            return TermLit(self.advance().value)
        if self.at(INT):
            return TermLit(int(self.advance().value))
        name = self.expect_name('term')
        return ANY if name == '_' else TermVar(name)

    def parse_decision(self) -> Decision:
        self.expect(OP, '^')
        letter = self.expect(IDENT).value
        if letter == 'A':
            return Decision.AUTHORIZED
        if letter == 'D':
            return Decision.DENIED
        raise self.error(f"decision must be A or D, found {letter!r}")

    def parse_params(self) -> List[Tuple[str, Term]]:
        params = []
        while True:
            key = self.expect(IDENT).value
            self.expect(OP, '=')
            params.append((key, self.parse_term()))
            if not self.accept(OP, ','):
                return params

    def parse_event(self, need_decision: bool = True) -> Tuple[EventPattern, bool]:
        """Pattern and whether the decision was written.

        Long form `(u, a) "action" (k = t) ^A`; short form `action^A(k = t)` leaves
        user and account unconstrained.
        """
        if self.at(IDENT) and self.current.value not in KEYWORDS:
            user, account = ANY, ANY
            action = self.advance().value
        else:
            self.expect(OP, '(')
            user = self.parse_term()
            self.expect(OP, ',')
            account = self.parse_term()
            self.expect(OP, ')')
            action = self.expect(STRING).value
        params: List[Tuple[str, Term]] = []
        decision: Optional[Decision] = None
        while True:
            if decision is None and self.at(OP, '^'):
                decision = self.parse_decision()
            elif self.at(OP, '('):
                self.advance()
                if self.at(OP, '^'):
                    if decision is not None:
                        raise self.error(f"event \"{action}\" has two decisions")
                    decision = self.parse_decision()
                else:
                    params.extend(self.parse_params())
                self.expect(OP, ')')
            else:
                break
        if decision is None and need_decision:
            raise self.error(f"event \"{action}\" has no decision")
        pattern = EventPattern(user, account, action, tuple(params), decision or Decision.AUTHORIZED)
        return pattern, decision is not None

    def parse_chain(self) -> List[EventPattern]:
        chain = [self.parse_event()[0]]
        while self.accept(OP, '->'):
            chain.append(self.parse_event()[0])
        return chain

    def parse_side_conditions(self) -> List[Tuple[str, TermLit]]:
        conditions = []
        while self.accept(OP, ','):
            name = self.expect_name('variable')
            self.expect(OP, '=')
            term = self.parse_term()
            if not isinstance(term, TermLit):
                raise self.error("side condition must bind a literal")
            conditions.append((name, term))
        return conditions

    def parse_unless(self) -> Optional[EventPattern]:
        if self.accept(IDENT, 'unless'):
            return self.parse_event()[0]
        return None

    def apply_conditions(self, patterns: List[EventPattern],
                         conditions: List[Tuple[str, TermLit]]) -> List[EventPattern]:
        for name, literal in conditions:
            if not any(name in p.variables() for p in patterns):
                raise self.error(f"side condition on unknown variable '{name}'")
            patterns = [_substitute(p, name, literal) for p in patterns]
        return patterns

    # rule forms

    def compile(self) -> Rule:
        if self.at(OP, '!'):
            rule = self.parse_negated()
        elif self.at(OP, '['):
            rule = self.parse_accumulation()
        else:
            rule = self.parse_sequence()
        if not self.at(EOF):
            raise self.error(f"unexpected {self.current} after rule")
        return rule

    def parse_negated(self) -> Response:
        self.expect(OP, '!')
        self.expect(OP, '(')
        chain = self.parse_chain()
        self.expect(OP, '=>')
        consequence = self.parse_event()[0]
        conditions = self.parse_side_conditions()
        self.expect(OP, ')')
        unless = self.parse_unless()
        patterns = self.apply_conditions(chain + [consequence], conditions)
        return Response(tuple(patterns[:-1]), patterns[-1], unless)

    def parse_sequence(self) -> Rule:
        first = self.parse_event()[0]
        if self.accept(IDENT, 'precedes'):
            return Precedence(first, self.parse_event()[0])
        if self.accept(OP, '{'):
            threshold = int(self.expect(INT).value)
            self.expect(OP, '}')
            self.expect(OP, '=>')
            second = self.parse_event()[0]
            if first.action != second.action:
                raise self.error("repeated-denial rule must name one action on both sides")
            if first.decision != Decision.DENIED or second.decision != Decision.DENIED:
                raise self.error("repeated-denial rule needs ^D on both sides")
            if threshold < 1:
                raise self.error("repetition count must be at least 1")
            return ThreeStrikes(first.action, threshold)
        chain = [first]
        while self.accept(OP, '->'):
            chain.append(self.parse_event()[0])
        if self.accept(OP, '=>'):
            consequence = self.parse_event()[0]
            conditions = self.parse_side_conditions()
            unless = self.parse_unless()
            patterns = self.apply_conditions(chain + [consequence], conditions)
            forbidden = patterns[-1].with_decision(_opposite(consequence.decision))
            return Response(tuple(patterns[:-1]), forbidden, unless)
        if len(chain) == 1 and self.at(OP, ','):
            conditions = self.parse_side_conditions()
            unless = self.parse_unless()
            event = self.apply_conditions(chain, conditions)[0]
            return Response((), event.with_decision(_opposite(event.decision)), unless)
        raise self.error("unsupported rule form")

    def parse_membership(self) -> bool:
        """True for `in`, False for `not in`"""
        negated = bool(self.accept(IDENT, 'not'))
        self.expect(IDENT, 'in')
        return not negated

    def parse_accumulation(self) -> Accumulation:
        self.expect(OP, '[')
        prior_forms = self.parse_event()[0]
        self.expect(OP, '->')
        prior_auth = self.parse_event()[0]
        self.expect(OP, ']')
        self.expect(OP, '^')
        self.expect(INT)
        self.expect(OP, '->')
        forms = self.parse_event()[0]
        self.expect(OP, '=>')
        auth = self.parse_event()[0]
        self.expect(OP, ',')

        dest_var = self.expect_name('destination variable')
        registered = self.parse_membership()
        registry_var = self.expect_name('registry variable')
        self.expect(IDENT, 'and')
        value_var = self.expect_name('value variable')
        self.expect(OP, '+')
        self.expect(IDENT, 'sum')
        self.expect(OP, '(')
        summed = self.expect_name('value variable')
        sum_filtered = bool(self.accept(OP, '|'))
        if sum_filtered:
            self.expect_name('destination variable')
            if self.parse_membership() != registered:
                raise self.error("summed pairs must use the same registry filter as the checked pair")
            if self.expect_name('registry variable') != registry_var:
                raise self.error(f"sum filter must use registry '{registry_var}'")
        self.expect(OP, ')')
        self.expect(OP, '>')
        limit = int(self.expect(INT).value)

        self.expect(OP, ':')
        self.expect(OP, '(')
        registry_key = self.expect(STRING).value
        self.expect(OP, ',')
        if self.expect_name('registry variable') != registry_var:
            raise self.error(f"registry clause must bind '{registry_var}'")
        self.expect(OP, ')')
        self.expect(IDENT, 'in')
        self.expect(IDENT, 'P_TA')
        self.expect(OP, '(')
        registry_task = self.expect_name('registry task')
        self.expect(OP, ',')
        account_var = self.expect_name('account variable')
        self.expect(OP, ')')

        if (prior_forms.action, prior_auth.action) != (forms.action, auth.action):
            raise self.error("bracketed pair must repeat the checked pair's actions")
        if forms.account != TermVar(account_var):
            raise self.error(f"registry account '{account_var}' is not the pair's account")
        if summed != value_var:
            raise self.error(f"sum must range over '{value_var}'")
        if forms.decision != Decision.AUTHORIZED or auth.decision != Decision.DENIED:
            raise self.error("accumulation rule needs forms ^A => auth ^D")

        def key_of(var: str) -> str:
            for key, term in forms.params:
                if term == TermVar(var):
                    return key
            raise self.error(f"variable '{var}' is not a parameter of \"{forms.action}\"")

        auth_vars = {t for _, t in auth.params if isinstance(t, TermVar)}
        links = [k for k, t in forms.params if isinstance(t, TermVar) and t in auth_vars]
        if len(links) != 1:
            raise self.error("forms and auth must share exactly one linking parameter")
        return Accumulation(
            forms=forms,
            auth=auth.with_decision(Decision.AUTHORIZED),
            link_key=links[0],
            value_key=key_of(value_var),
            dest_key=key_of(dest_var),
            registered=registered,
            sum_filtered=sum_filtered,
            limit=limit,
            registry_task=registry_task,
            registry_key=registry_key
        )


def compile_notation(text: str) -> Rule:
    if not text.strip():
        raise RuleNotationError("empty rule", text)
    return RuleCompiler(text).compile()


def parse_rules(source: str, origin: str = '<rules>') -> List[RuleSpec]:
    """`rule-id: notation` per line; blank lines and # comments skipped"""
    specs: List[RuleSpec] = []
    seen = set()
    for lineno, line in enumerate(source.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        match = _RULE_LINE_RE.match(stripped)
        if match is None:
            raise RuleNotationError(f"{origin}:{lineno}: expected 'rule-id: notation'", stripped)
        rule_id, text = match.groups()
        if rule_id in seen:
            raise RuleNotationError(f"{origin}:{lineno}: duplicate rule id '{rule_id}'", stripped)
        seen.add(rule_id)
        try:
            rule = compile_notation(text)
        except RuleNotationError as e:
            raise RuleNotationError(f"{origin}:{lineno}: {e}") from e
        specs.append(RuleSpec(rule_id, text, rule))
    return specs


def load_rules(path: Union[str, Path]) -> List[RuleSpec]:
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        specs = parse_rules(f.read(), origin=path.name)
    logger.info(f"Loaded {len(specs)} rules from {path.name}")
    return specs
