"""Recursive-descent parser for policy source"""

from typing import Dict, List, Optional, Tuple

from src.model.params import ParamSet, ParamValue
from src.policy.ast import (
    AccountRef, ActionSpec, Binary, Call, ClearanceRef, CloseSession, Expr, FUNCTIONS, If, Let,
    Lit, OpenSession, ParamRef, ParamScope, PolicySpec, SLOT_STATEMENTS, SetClearance, SetLit,
    SetSessParam, SetTaskParam, Slot, Stmt, Unary, UpdateBlock, UserRef, Var, Variant, VType,
    action_exprs, walk_expr
)
from src.policy.lexer import EOF, IDENT, INT, OP, STRING, Token, tokenize
from src.policy.typecheck import check_policy
from src.utils.errors import PolicySyntaxError, PolicyValidationError
from src.utils.logger import get_logger

logger = get_logger('app')

DECL_KEYWORDS = {'task', 'users', 'accounts', 'init', 'action', 'default_clearance'}
EXPR_KEYWORDS = {
    'if', 'then', 'else', 'let', 'in', 'and', 'or', 'not', 'div', 'true', 'false',
    'intset', 'textset', 'req', 'sess', 'task', 'taskof', 'clearance', 'user', 'account',
} | set(FUNCTIONS)
COMPARE_TOKENS = ('=', '!=', '<', '<=', '>', '>=')


class PolicyParser:
    """Parses one policy source text into an untyped PolicySpec"""

    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.index = 0

    # token stream helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        if token.kind != EOF:
            self.index += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> PolicySyntaxError:
        token = token or self.current
        return PolicySyntaxError(message, token.line, token.column)

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        token = self.current
        return token.kind == kind and (value is None or token.value == value)

    def at_word(self, word: str) -> bool:
        return self.at(IDENT, word)

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        if not self.at(kind, value):
            wanted = repr(value) if value else kind.lower()
            raise self.error(f"expected {wanted}, found {self.current}")
        return self.advance()

    def expect_word(self, word: str) -> Token:
        return self.expect(IDENT, word)

    def expect_name(self, what: str) -> Token:
        token = self.current
        if token.kind != IDENT or token.value in EXPR_KEYWORDS or token.value in DECL_KEYWORDS:
            raise self.error(f"expected {what} name, found {token}")
        return self.advance()

    def signed_int(self) -> int:
        negative = self.accept(OP, '-') is not None
        value = int(self.expect(INT).value)
        return -value if negative else value

    # declarations

    def parse(self) -> PolicySpec:
        tasks: List[str] = []
        users: List[str] = []
        accounts: List[int] = []
        actions: List[ActionSpec] = []
        account_params: Dict[Tuple[int, str], ParamSet] = {}
        overrides: Dict[Tuple[str, int, str], int] = {}
        default_clearance = 0
        checks: List[Tuple[str, str, Token]] = []

        while not self.at(EOF):
            token = self.current
            if self.accept(IDENT, 'task'):
                name = self.expect_name('task')
                if name.value in tasks:
                    raise PolicyValidationError(f"task '{name.value}' declared twice (line {name.line})")
                tasks.append(name.value)
            elif self.accept(IDENT, 'users'):
                first = self.expect_name('user')
                users.append(first.value)
                while self.at(IDENT) and self.current.value not in DECL_KEYWORDS:
                    users.append(self.expect_name('user').value)
            elif self.accept(IDENT, 'accounts'):
                accounts.append(int(self.expect(INT).value))
                while self.at(INT):
                    accounts.append(int(self.advance().value))
            elif self.accept(IDENT, 'default_clearance'):
                default_clearance = self.signed_int()
            elif self.accept(IDENT, 'init'):
                if self.accept(IDENT, 'clearance'):
                    user = self.expect_name('user')
                    account = int(self.expect(INT).value)
                    task = self.expect_name('task')
                    overrides[(user.value, account, task.value)] = self.signed_int()
                    checks.append(('user', user.value, user))
                    checks.append(('account', str(account), user))
                    checks.append(('task', task.value, task))
                else:
                    self.expect_word('account')
                    account_token = self.expect(INT)
                    account = int(account_token.value)
                    self.expect_word('task')
                    task = self.expect_name('task')
                    key = (account, task.value)
                    params = account_params.get(key, ParamSet())
                    for name, value in self.parse_param_entries():
                        params = params.with_value(name, value)
                    account_params[key] = params
                    checks.append(('account', str(account), account_token))
                    checks.append(('task', task.value, task))
            elif self.accept(IDENT, 'action'):
                action = self.parse_action(token)
                if any(a.action == action.action for a in actions):
                    raise PolicyValidationError(f"duplicate action '{action.action}' (line {token.line})")
                actions.append(action)
            else:
                raise self.error(f"expected a declaration, found {token}")

        spec = PolicySpec(
            tasks=tuple(tasks),
            users=tuple(users),
            accounts=tuple(accounts),
            actions=tuple(actions),
            initial_account_params=tuple(account_params.items()),
            default_clearance=default_clearance,
            clearance_overrides=tuple(overrides.items())
        )
        self.validate(spec, checks)
        return spec

    def parse_param_entries(self) -> List[Tuple[str, ParamValue]]:
        entries = []
        self.expect(OP, '{')
        while not self.accept(OP, '}'):
            key = self.expect(STRING).value
            self.expect(OP, '=')
            entries.append((key, self.parse_param_literal()))
            self.accept(OP, ',')
        return entries

    def parse_param_literal(self) -> ParamValue:
        if self.at(STRING):
            return ParamValue.of_text(self.advance().value)
        if self.accept(IDENT, 'intset'):
            self.expect(OP, '{')
            items = []
            while not self.accept(OP, '}'):
                items.append(self.signed_int())
                self.accept(OP, ',')
            return ParamValue.of_int_set(items)
        if self.accept(IDENT, 'textset'):
            self.expect(OP, '{')
            items = []
            while not self.accept(OP, '}'):
                items.append(self.expect(STRING).value)
                self.accept(OP, ',')
            return ParamValue.of_text_set(items)
        if self.at(INT) or self.at(OP, '-'):
            return ParamValue.of_int(self.signed_int())
        raise self.error(f"expected a parameter literal, found {self.current}")

    def parse_action(self, start: Token) -> ActionSpec:
        name = self.expect_name('action')
        self.expect_word('task')
        task = self.expect_name('task')
        self.expect_word('clearance')
        required = self.signed_int()
        self.expect(OP, '{')
        constraint = None
        if self.accept(IDENT, 'constraint'):
            constraint = self.parse_expr()
        variants: Dict[str, Variant] = {}
        while not self.accept(OP, '}'):
            which = self.current
            if which.kind != IDENT or which.value not in ('on_authorized', 'on_denied'):
                raise self.error(f"expected 'on_authorized', 'on_denied' or '}}', found {which}")
            self.advance()
            if which.value in variants:
                raise self.error(f"duplicate '{which.value}' block", which)
            variants[which.value] = self.parse_variant()
        return ActionSpec(
            action=name.value,
            task=task.value,
            required_clearance=required,
            constraint=constraint,
            on_authorized=variants.get('on_authorized', Variant()),
            on_denied=variants.get('on_denied', Variant()),
            pos=(start.line, start.column)
        )

    def parse_variant(self) -> Variant:
        slots: Dict[str, UpdateBlock] = {}
        self.expect(OP, '{')
        while not self.accept(OP, '}'):
            token = self.current
            try:
                slot = Slot(token.value) if token.kind == IDENT else None
            except ValueError:
                slot = None
            if slot is None:
                raise self.error(f"expected an update slot, found {token}")
            self.advance()
            if slot.value in slots:
                raise self.error(f"duplicate '{slot.value}' block", token)
            slots[slot.value] = self.parse_block(slot)
        return Variant(**slots)

    def parse_block(self, slot: Slot) -> UpdateBlock:
        statements: List[Stmt] = []
        self.expect(OP, '{')
        while not self.accept(OP, '}'):
            token = self.current
            stmt = self.parse_statement()
            if not isinstance(stmt, SLOT_STATEMENTS[slot]):
                raise self.error(f"statement not allowed in {slot.value}", token)
            statements.append(stmt)
        return UpdateBlock(tuple(statements))

    def parse_statement(self) -> Stmt:
        token = self.current
        pos = (token.line, token.column)
        if self.accept(IDENT, 'set'):
            if self.accept(IDENT, 'task'):
                task = self.expect_name('task').value
                key = self.parse_index()
                self.expect(OP, '=')
                return SetTaskParam(task, key, self.parse_expr(), pos=pos)
            if self.accept(IDENT, 'clearance'):
                task = self.expect_name('task').value
                self.expect(OP, '=')
                return SetClearance(task, self.parse_expr(), pos=pos)
            if self.accept(IDENT, 'sess'):
                key = self.parse_index()
                self.expect(OP, '=')
                return SetSessParam(key, self.parse_expr(), pos=pos)
            raise self.error(f"expected 'task', 'clearance' or 'sess' after 'set', found {self.current}")
        if self.accept(IDENT, 'open_session'):
            self.expect(OP, '(')
            user = self.parse_expr()
            self.expect(OP, ',')
            account = self.parse_expr()
            self.expect(OP, ')')
            return OpenSession(user, account, pos=pos)
        if self.accept(IDENT, 'close_session'):
            return CloseSession(pos=pos)
        raise self.error(f"expected a statement, found {token}")

    def parse_index(self) -> Expr:
        self.expect(OP, '[')
        key = self.parse_expr()
        self.expect(OP, ']')
        return key

    # expressions

    def parse_expr(self) -> Expr:
        token = self.current
        pos = (token.line, token.column)
        if self.accept(IDENT, 'if'):
            cond = self.parse_expr()
            self.expect_word('then')
            then = self.parse_expr()
            self.expect_word('else')
            return If(cond, then, self.parse_expr(), pos=pos)
        if self.accept(IDENT, 'let'):
            name = self.expect_name('variable').value
            self.expect(OP, '=')
            value = self.parse_expr()
            self.expect_word('in')
            return Let(name, value, self.parse_expr(), pos=pos)
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at_word('or'):
            token = self.advance()
            left = Binary('or', left, self.parse_and(), pos=(token.line, token.column))
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.at_word('and'):
            token = self.advance()
            left = Binary('and', left, self.parse_not(), pos=(token.line, token.column))
        return left

    def parse_not(self) -> Expr:
        if self.at_word('not'):
            token = self.advance()
            return Unary('not', self.parse_not(), pos=(token.line, token.column))
        return self.parse_compare()

    def parse_compare(self) -> Expr:
        left = self.parse_additive()
        if self.current.kind == OP and self.current.value in COMPARE_TOKENS:
            token = self.advance()
            left = Binary(token.value, left, self.parse_additive(), pos=(token.line, token.column))
            if self.current.kind == OP and self.current.value in COMPARE_TOKENS:
                raise self.error("comparisons do not chain, add parentheses")
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.at(OP, '+') or self.at(OP, '-'):
            token = self.advance()
            left = Binary(token.value, left, self.parse_multiplicative(), pos=(token.line, token.column))
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while self.at(OP, '*') or self.at_word('div'):
            token = self.advance()
            left = Binary(token.value, left, self.parse_unary(), pos=(token.line, token.column))
        return left

    def parse_unary(self) -> Expr:
        if self.at(OP, '-'):
            token = self.advance()
            return Unary('-', self.parse_unary(), pos=(token.line, token.column))
        return self.parse_primary()

    def parse_args(self) -> List[Expr]:
        self.expect(OP, '(')
        args: List[Expr] = []
        if not self.at(OP, ')'):
            args.append(self.parse_expr())
            while self.accept(OP, ','):
                args.append(self.parse_expr())
        self.expect(OP, ')')
        return args

    def arity(self, name: Token, args: List[Expr], count: int):
        if len(args) != count:
            raise self.error(f"'{name.value}' takes {count} argument(s), got {len(args)}", name)

    def parse_primary(self) -> Expr:
        token = self.current
        pos = (token.line, token.column)
        if token.kind == INT:
            self.advance()
            return Lit(int(token.value), pos=pos)
        if token.kind == STRING:
            self.advance()
            return Lit(token.value, pos=pos)
        if self.accept(OP, '('):
            inner = self.parse_expr()
            self.expect(OP, ')')
            return inner
        if token.kind != IDENT:
            raise self.error(f"expected an expression, found {token}")

        word = token.value
        if word in ('true', 'false'):
            self.advance()
            return Lit(word == 'true', pos=pos)
        if word in ('intset', 'textset'):
            self.advance()
            self.expect(OP, '{')
            items: List[Expr] = []
            if not self.at(OP, '}'):
                items.append(self.parse_expr())
                while self.accept(OP, ','):
                    items.append(self.parse_expr())
            self.expect(OP, '}')
            elem = VType.INT if word == 'intset' else VType.TEXT
            return SetLit(elem, tuple(items), pos=pos)
        if word in ('req', 'sess', 'task'):
            self.advance()
            args = self.parse_args()
            self.arity(token, args, 2)
            return ParamRef(ParamScope(word), args[0], args[1], pos=pos)
        if word == 'taskof':
            self.advance()
            self.expect(OP, '(')
            task = self.expect_name('task').value
            self.expect(OP, ',')
            key = self.parse_expr()
            self.expect(OP, ',')
            default = self.parse_expr()
            self.expect(OP, ')')
            return ParamRef(ParamScope.TASKOF, key, default, task=task, pos=pos)
        if word == 'clearance':
            self.advance()
            self.expect(OP, '(')
            task = self.expect_name('task').value
            self.expect(OP, ')')
            return ClearanceRef(task, pos=pos)
        if word in ('user', 'account'):
            self.advance()
            self.arity(token, self.parse_args(), 0)
            return UserRef(pos=pos) if word == 'user' else AccountRef(pos=pos)
        if word in FUNCTIONS:
            self.advance()
            args = self.parse_args()
            self.arity(token, args, FUNCTIONS[word])
            return Call(word, tuple(args), pos=pos)
        if word in EXPR_KEYWORDS or word in DECL_KEYWORDS:
            raise self.error(f"unexpected keyword '{word}'")
        self.advance()
        return Var(word, pos=pos)

    # validation

    def validate(self, spec: PolicySpec, checks: List[Tuple[str, str, Token]]):
        declared = {
            'task': set(spec.tasks),
            'user': set(spec.users),
            'account': {str(a) for a in spec.accounts},
        }
        for kind, value, token in checks:
            if value not in declared[kind]:
                raise PolicyValidationError(f"unknown {kind} '{value}' (line {token.line})")
        if len(set(spec.accounts)) != len(spec.accounts):
            raise PolicyValidationError("account declared twice")
        if len(set(spec.users)) != len(spec.users):
            raise PolicyValidationError("user declared twice")
        for action in spec.actions:
            line = action.pos[0]
            if action.task not in declared['task']:
                raise PolicyValidationError(
                    f"action '{action.action}' belongs to unknown task '{action.task}' (line {line})"
                )
            for task in referenced_tasks(action):
                if task not in declared['task']:
                    raise PolicyValidationError(
                        f"action '{action.action}' refers to unknown task '{task}' (line {line})"
                    )


def referenced_tasks(action: ActionSpec) -> List[str]:
    """Task names an action's constraint and updates mention"""
    names: List[str] = []
    for expr in action_exprs(action):
        for node in walk_expr(expr):
            if isinstance(node, ClearanceRef):
                names.append(node.task)
            elif isinstance(node, ParamRef) and node.task is not None:
                names.append(node.task)
    for variant in (action.on_authorized, action.on_denied):
        for _, block in variant.blocks():
            for stmt in block.statements:
                if isinstance(stmt, (SetTaskParam, SetClearance)):
                    names.append(stmt.task)
    return names


def parse_policy(source: str) -> PolicySpec:
    """Parse, validate and type-check policy source"""
    spec = PolicyParser(source).parse()
    typed = check_policy(spec)
    logger.info(f"Parsed policy: {len(typed.tasks)} tasks, {len(typed.actions)} actions")
    return typed


def parse_policy_file(path) -> PolicySpec:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_policy(f.read())
