"""Interpreter for policy constraints and update blocks"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple, Union

from src.engine.context import EvalContext
from src.model.params import ParamValue, param_get
from src.policy.ast import (
    AccountRef, Binary, Call, ClearanceRef, CloseSession, Expr, If, Let, Lit, OpenSession,
    ParamRef, ParamScope, SetClearance, SetLit, SetSessParam, SetTaskParam, Stmt, Unary,
    UpdateBlock, UserRef, Var, VType
)
from src.utils.errors import ParamTypeError, PolicyRuntimeError

Value = Union[int, str, bool, FrozenSet[int], FrozenSet[str]]


class _Fault(Exception):
    """Evaluation failure, turned into PolicyRuntimeError at the call boundary"""


@dataclass(frozen=True)
class OpenSessionOp:
    user: str
    account: int


@dataclass(frozen=True)
class CloseSessionOp:
    pass


@dataclass(frozen=True)
class SetSessOp:
    key: str
    value: ParamValue


SessionOp = Union[OpenSessionOp, CloseSessionOp, SetSessOp]


@dataclass(frozen=True)
class StateDelta:
    """Writes produced by one update block, in statement order"""
    task_writes: Tuple[Tuple[str, str, ParamValue], ...] = ()
    clearance_writes: Tuple[Tuple[str, int], ...] = ()
    session_ops: Tuple[SessionOp, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.task_writes or self.clearance_writes or self.session_ops)

    def merge(self, other: 'StateDelta') -> 'StateDelta':
        return StateDelta(
            task_writes=self.task_writes + other.task_writes,
            clearance_writes=self.clearance_writes + other.clearance_writes,
            session_ops=self.session_ops + other.session_ops
        )


EMPTY_DELTA = StateDelta()


def to_param(value: Value, value_type: VType) -> ParamValue:
    return ParamValue(value_type.to_kind(), value)


def _lookup(expr: ParamRef, ctx: EvalContext, env: Dict[str, Value]) -> Value:
    key = _eval(expr.key, ctx, env)
    default = ParamValue(expr.kind, _eval(expr.default, ctx, env))
    if expr.scope == ParamScope.REQ:
        source = ctx.request_params
    elif expr.scope == ParamScope.SESS:
        source = ctx.session_params
    elif expr.scope == ParamScope.TASK:
        source = ctx.task_params(ctx.task)
    else:
        source = ctx.task_params(expr.task)
    try:
        return param_get(source, key, default).value
    except ParamTypeError as e:
        raise _Fault(str(e)) from e


def _compare(op: str, left: Value, right: Value) -> bool:
    if op == '=':
        return left == right
    if op == '!=':
        return left != right
    if op == '<':
        return left < right
    if op == '<=':
        return left <= right
    if op == '>':
        return left > right
    return left >= right


def _eval(expr: Expr, ctx: EvalContext, env: Dict[str, Value]) -> Value:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, SetLit):
        return frozenset(_eval(item, ctx, env) for item in expr.items)
    if isinstance(expr, ParamRef):
        return _lookup(expr, ctx, env)
    if isinstance(expr, UserRef):
        return ctx.user
    if isinstance(expr, AccountRef):
        if ctx.account is None:
            raise _Fault("no account is bound to the request")
        return ctx.account
    if isinstance(expr, ClearanceRef):
        if expr.task not in ctx.clearance_snapshot:
            raise _Fault(f"no clearance for task '{expr.task}'")
        return ctx.clearance_snapshot[expr.task]
    if isinstance(expr, Var):
        return env[expr.name]

    if isinstance(expr, Unary):
        operand = _eval(expr.operand, ctx, env)
        return (not operand) if expr.op == 'not' else -operand

    if isinstance(expr, Binary):
        if expr.op == 'and':
            return bool(_eval(expr.left, ctx, env)) and bool(_eval(expr.right, ctx, env))
        if expr.op == 'or':
            return bool(_eval(expr.left, ctx, env)) or bool(_eval(expr.right, ctx, env))
        left = _eval(expr.left, ctx, env)
        right = _eval(expr.right, ctx, env)
        if expr.op == '+':
            return left + right
        if expr.op == '-':
            return left - right
        if expr.op == '*':
            return left * right
        if expr.op == 'div':
            if right == 0:
                raise _Fault("division by zero")
            return left // right
        return _compare(expr.op, left, right)

    if isinstance(expr, Call):
        args = [_eval(arg, ctx, env) for arg in expr.args]
        if expr.func == 'member':
            return args[0] in args[1]
        if expr.func == 'insert':
            return args[0] | {args[1]}
        if expr.func == 'remove':
            return args[0] - {args[1]}
        if expr.func == 'size':
            return len(args[0])
        if expr.func == 'concat':
            return args[0] + args[1]
        if expr.func == 'totext':
            return str(args[0])
        raise _Fault(f"unknown function '{expr.func}'")

    if isinstance(expr, If):
        branch = expr.then if _eval(expr.cond, ctx, env) else expr.other
        return _eval(branch, ctx, env)

    if isinstance(expr, Let):
        inner = dict(env)
        inner[expr.name] = _eval(expr.value, ctx, env)
        return _eval(expr.body, ctx, inner)

    raise _Fault(f"cannot evaluate {type(expr).__name__}")


def _where(node, label: str) -> str:
    line = getattr(node, 'pos', (0, 0))[0]
    return f"{label} (line {line})" if line else label


def eval_expr(expr: Expr, ctx: EvalContext, label: str = 'expression') -> Value:
    try:
        return _eval(expr, ctx, {})
    except _Fault as e:
        raise PolicyRuntimeError(ctx.action, _where(expr, label), str(e)) from e


def eval_constraint(expr: Optional[Expr], ctx: EvalContext) -> bool:
    """Constraint value; an absent constraint is constant true"""
    if expr is None:
        return True
    return bool(eval_expr(expr, ctx, 'constraint'))


def _eval_statement(stmt: Stmt, ctx: EvalContext) -> StateDelta:
    if isinstance(stmt, SetTaskParam):
        key = _eval(stmt.key, ctx, {})
        value = to_param(_eval(stmt.value, ctx, {}), stmt.value_type)
        return StateDelta(task_writes=((stmt.task, key, value),))
    if isinstance(stmt, SetClearance):
        return StateDelta(clearance_writes=((stmt.task, _eval(stmt.value, ctx, {})),))
    if isinstance(stmt, OpenSession):
        user = _eval(stmt.user, ctx, {})
        account = _eval(stmt.account, ctx, {})
        return StateDelta(session_ops=(OpenSessionOp(user, account),))
    if isinstance(stmt, CloseSession):
        return StateDelta(session_ops=(CloseSessionOp(),))
    if isinstance(stmt, SetSessParam):
        key = _eval(stmt.key, ctx, {})
        value = to_param(_eval(stmt.value, ctx, {}), stmt.value_type)
        return StateDelta(session_ops=(SetSessOp(key, value),))
    raise _Fault(f"unknown statement {type(stmt).__name__}")


def statement_label(stmt: Stmt) -> str:
    names = {
        SetTaskParam: 'set task',
        SetClearance: 'set clearance',
        OpenSession: 'open_session',
        CloseSession: 'close_session',
        SetSessParam: 'set sess',
    }
    label = names.get(type(stmt), type(stmt).__name__)
    if isinstance(stmt, (SetTaskParam, SetClearance)):
        label = f"{label} {stmt.task}"
    return label


def eval_update(block: Optional[UpdateBlock], ctx: EvalContext) -> StateDelta:
    """Writes of one update block; every statement reads the same pre-state"""
    if block is None:
        return EMPTY_DELTA
    delta = EMPTY_DELTA
    for stmt in block.statements:
        try:
            delta = delta.merge(_eval_statement(stmt, ctx))
        except _Fault as e:
            raise PolicyRuntimeError(ctx.action, _where(stmt, statement_label(stmt)), str(e)) from e
    return delta
