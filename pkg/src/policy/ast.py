"""Syntax tree of the policy language"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

from src.model.params import ParamSet, ValueKind

Pos = Tuple[int, int]
NO_POS: Pos = (0, 0)


class VType(Enum):
    INT = "int"
    TEXT = "text"
    INT_SET = "intset"
    TEXT_SET = "textset"
    BOOL = "bool"

    @property
    def storable(self) -> bool:
        return self != VType.BOOL

    def to_kind(self) -> ValueKind:
        return ValueKind(self.value)


class ParamScope(Enum):
    REQ = "req"
    SESS = "sess"
    TASK = "task"
    TASKOF = "taskof"


# Expressions

@dataclass(frozen=True)
class Lit:
    value: Union[int, str, bool]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class SetLit:
    elem: VType
    items: Tuple['Expr', ...] = ()
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class ParamRef:
    """Parameter lookup with an inline default; kind is filled in by the type checker"""
    scope: ParamScope
    key: 'Expr'
    default: 'Expr'
    task: Optional[str] = None
    kind: Optional[ValueKind] = None
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class UserRef:
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class AccountRef:
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class ClearanceRef:
    task: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: 'Expr'
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: 'Expr'
    right: 'Expr'
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple['Expr', ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class If:
    cond: 'Expr'
    then: 'Expr'
    other: 'Expr'
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Let:
    name: str
    value: 'Expr'
    body: 'Expr'
    pos: Pos = field(default=NO_POS, compare=False)


Expr = Union[Lit, SetLit, ParamRef, UserRef, AccountRef, ClearanceRef, Var, Unary, Binary, Call, If, Let]

ARITH_OPS = ('+', '-', '*', 'div')
COMPARE_OPS = ('=', '!=', '<', '<=', '>', '>=')
BOOL_OPS = ('and', 'or')
FUNCTIONS = {
    'member': 2,
    'insert': 2,
    'remove': 2,
    'size': 1,
    'concat': 2,
    'totext': 1,
}


# Statements

@dataclass(frozen=True)
class SetTaskParam:
    """Write a parameter of a task of the requesting account"""
    task: str
    key: Expr
    value: Expr
    value_type: Optional[VType] = None
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class SetClearance:
    """Write the requesting (user, account) clearance for a task"""
    task: str
    value: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class OpenSession:
    user: Expr
    account: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class CloseSession:
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class SetSessParam:
    key: Expr
    value: Expr
    value_type: Optional[VType] = None
    pos: Pos = field(default=NO_POS, compare=False)


Stmt = Union[SetTaskParam, SetClearance, OpenSession, CloseSession, SetSessParam]


class Slot(Enum):
    ACCOUNT_UPDATE = "account_update"
    CLEARANCE_UPDATE = "clearance_update"
    SESSION_UPDATE = "session_update"


SLOT_STATEMENTS = {
    Slot.ACCOUNT_UPDATE: (SetTaskParam,),
    Slot.CLEARANCE_UPDATE: (SetClearance,),
    Slot.SESSION_UPDATE: (OpenSession, CloseSession, SetSessParam),
}


@dataclass(frozen=True)
class UpdateBlock:
    statements: Tuple[Stmt, ...] = ()


@dataclass(frozen=True)
class Variant:
    """Updates applied after one decision; None means identity"""
    account_update: Optional[UpdateBlock] = None
    clearance_update: Optional[UpdateBlock] = None
    session_update: Optional[UpdateBlock] = None

    def slot(self, slot: Slot) -> Optional[UpdateBlock]:
        return getattr(self, slot.value)

    def blocks(self) -> Tuple[Tuple[Slot, UpdateBlock], ...]:
        return tuple(
            (slot, self.slot(slot)) for slot in Slot if self.slot(slot) is not None
        )

    @property
    def is_identity(self) -> bool:
        return all(self.slot(slot) is None for slot in Slot)


IDENTITY = Variant()


@dataclass(frozen=True)
class ActionSpec:
    action: str
    task: str
    required_clearance: int
    constraint: Optional[Expr] = None
    on_authorized: Variant = IDENTITY
    on_denied: Variant = IDENTITY
    pos: Pos = field(default=NO_POS, compare=False)

    def variant(self, authorized: bool) -> Variant:
        return self.on_authorized if authorized else self.on_denied


@dataclass(frozen=True)
class PolicySpec:
    tasks: Tuple[str, ...]
    users: Tuple[str, ...]
    accounts: Tuple[int, ...]
    actions: Tuple[ActionSpec, ...]
    initial_account_params: Tuple[Tuple[Tuple[int, str], ParamSet], ...] = ()
    default_clearance: int = 0
    clearance_overrides: Tuple[Tuple[Tuple[str, int, str], int], ...] = ()
    _by_name: Dict[str, ActionSpec] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, 'initial_account_params', tuple(sorted(self.initial_account_params)))
        object.__setattr__(self, 'clearance_overrides', tuple(sorted(self.clearance_overrides)))
        object.__setattr__(self, '_by_name', {a.action: a for a in self.actions})

    def action(self, name: str) -> Optional[ActionSpec]:
        return self._by_name.get(name)

    @property
    def action_names(self) -> Tuple[str, ...]:
        return tuple(a.action for a in self.actions)

    def actions_of(self, task: str) -> Tuple[ActionSpec, ...]:
        return tuple(a for a in self.actions if a.task == task)

    def initial_params(self, account: int, task: str) -> ParamSet:
        return dict(self.initial_account_params).get((account, task), ParamSet())

    def initial_clearance(self, user: str, account: int, task: str) -> int:
        return dict(self.clearance_overrides).get((user, account, task), self.default_clearance)


def walk_expr(expr: Expr):
    """Yield expr and all of its sub-expressions, pre-order"""
    yield expr
    if isinstance(expr, SetLit):
        for item in expr.items:
            yield from walk_expr(item)
    elif isinstance(expr, ParamRef):
        yield from walk_expr(expr.key)
        yield from walk_expr(expr.default)
    elif isinstance(expr, Unary):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from walk_expr(arg)
    elif isinstance(expr, If):
        yield from walk_expr(expr.cond)
        yield from walk_expr(expr.then)
        yield from walk_expr(expr.other)
    elif isinstance(expr, Let):
        yield from walk_expr(expr.value)
        yield from walk_expr(expr.body)


def statement_exprs(stmt: Stmt) -> Tuple[Expr, ...]:
    if isinstance(stmt, (SetTaskParam, SetSessParam)):
        return (stmt.key, stmt.value)
    if isinstance(stmt, SetClearance):
        return (stmt.value,)
    if isinstance(stmt, OpenSession):
        return (stmt.user, stmt.account)
    return ()


def action_exprs(spec: ActionSpec):
    """Every expression appearing in an action: constraint and update statements"""
    if spec.constraint is not None:
        yield spec.constraint
    for variant in (spec.on_authorized, spec.on_denied):
        for _, block in variant.blocks():
            for stmt in block.statements:
                yield from statement_exprs(stmt)
