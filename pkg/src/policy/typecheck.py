"""Static typing of policy expressions and statements"""

from dataclasses import replace
from typing import Dict, Optional

from src.policy.ast import (
    ARITH_OPS, AccountRef, ActionSpec, Binary, BOOL_OPS, COMPARE_OPS, Call, ClearanceRef,
    CloseSession, Expr, If, Let, Lit, OpenSession, ParamRef, PolicySpec, SetClearance, SetLit,
    SetSessParam, SetTaskParam, Stmt, Unary, UpdateBlock, UserRef, Var, Variant, VType
)
from src.utils.errors import PolicyTypeError

Env = Dict[str, VType]

SET_OF = {VType.INT: VType.INT_SET, VType.TEXT: VType.TEXT_SET}
ELEMENT_OF = {VType.INT_SET: VType.INT, VType.TEXT_SET: VType.TEXT}


def _fail(node, message: str) -> PolicyTypeError:
    line, column = getattr(node, 'pos', (0, 0))
    return PolicyTypeError(message, line, column)


def _expect(node, actual: VType, wanted: VType, what: str):
    if actual != wanted:
        raise _fail(node, f"{what} must be {wanted.value}, got {actual.value}")


def annotate(expr: Expr, env: Env):
    """(type, expression with ParamRef kinds filled in)"""
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return VType.BOOL, expr
        if isinstance(expr.value, int):
            return VType.INT, expr
        return VType.TEXT, expr

    if isinstance(expr, SetLit):
        items = []
        for item in expr.items:
            item_type, typed = annotate(item, env)
            _expect(item, item_type, expr.elem, "set element")
            items.append(typed)
        return SET_OF[expr.elem], replace(expr, items=tuple(items))

    if isinstance(expr, ParamRef):
        key_type, key = annotate(expr.key, env)
        _expect(expr.key, key_type, VType.TEXT, "parameter key")
        default_type, default = annotate(expr.default, env)
        if not default_type.storable:
            raise _fail(expr.default, "parameter default cannot be bool")
        return default_type, replace(expr, key=key, default=default, kind=default_type.to_kind())

    if isinstance(expr, UserRef):
        return VType.TEXT, expr
    if isinstance(expr, (AccountRef, ClearanceRef)):
        return VType.INT, expr

    if isinstance(expr, Var):
        if expr.name not in env:
            raise _fail(expr, f"unbound variable '{expr.name}'")
        return env[expr.name], expr

    if isinstance(expr, Unary):
        operand_type, operand = annotate(expr.operand, env)
        wanted = VType.BOOL if expr.op == 'not' else VType.INT
        _expect(expr.operand, operand_type, wanted, f"operand of '{expr.op}'")
        return wanted, replace(expr, operand=operand)

    if isinstance(expr, Binary):
        left_type, left = annotate(expr.left, env)
        right_type, right = annotate(expr.right, env)
        typed = replace(expr, left=left, right=right)
        if expr.op in ARITH_OPS:
            _expect(expr.left, left_type, VType.INT, f"operand of '{expr.op}'")
            _expect(expr.right, right_type, VType.INT, f"operand of '{expr.op}'")
            return VType.INT, typed
        if expr.op in BOOL_OPS:
            _expect(expr.left, left_type, VType.BOOL, f"operand of '{expr.op}'")
            _expect(expr.right, right_type, VType.BOOL, f"operand of '{expr.op}'")
            return VType.BOOL, typed
        if expr.op in COMPARE_OPS:
            if left_type != right_type:
                raise _fail(expr, f"cannot compare {left_type.value} with {right_type.value}")
            if expr.op in ('<', '<=', '>', '>=') and left_type != VType.INT:
                raise _fail(expr, f"ordering '{expr.op}' needs int operands, got {left_type.value}")
            return VType.BOOL, typed
        raise _fail(expr, f"unknown operator '{expr.op}'")

    if isinstance(expr, Call):
        typed_args = [annotate(arg, env) for arg in expr.args]
        types = [t for t, _ in typed_args]
        typed = replace(expr, args=tuple(a for _, a in typed_args))
        if expr.func in ('member', 'insert', 'remove'):
            if expr.func == 'member':
                element, container = expr.args
                element_type, container_type = types
            else:
                container, element = expr.args
                container_type, element_type = types
            if container_type not in ELEMENT_OF:
                raise _fail(container, f"'{expr.func}' needs a set, got {container_type.value}")
            _expect(element, element_type, ELEMENT_OF[container_type], f"element of '{expr.func}'")
            return (VType.BOOL if expr.func == 'member' else container_type), typed
        if expr.func == 'size':
            if types[0] not in ELEMENT_OF:
                raise _fail(expr.args[0], f"'size' needs a set, got {types[0].value}")
            return VType.INT, typed
        if expr.func == 'concat':
            for arg, arg_type in zip(expr.args, types):
                _expect(arg, arg_type, VType.TEXT, "operand of 'concat'")
            return VType.TEXT, typed
        if expr.func == 'totext':
            _expect(expr.args[0], types[0], VType.INT, "operand of 'totext'")
            return VType.TEXT, typed
        raise _fail(expr, f"unknown function '{expr.func}'")

    if isinstance(expr, If):
        cond_type, cond = annotate(expr.cond, env)
        _expect(expr.cond, cond_type, VType.BOOL, "condition")
        then_type, then = annotate(expr.then, env)
        other_type, other = annotate(expr.other, env)
        if then_type != other_type:
            raise _fail(expr, f"branches differ: {then_type.value} and {other_type.value}")
        return then_type, replace(expr, cond=cond, then=then, other=other)

    if isinstance(expr, Let):
        value_type, value = annotate(expr.value, env)
        inner = dict(env)
        inner[expr.name] = value_type
        body_type, body = annotate(expr.body, inner)
        return body_type, replace(expr, value=value, body=body)

    raise _fail(expr, f"unknown expression {type(expr).__name__}")


def _storable(node, expr: Expr) -> tuple:
    value_type, typed = annotate(expr, {})
    if not value_type.storable:
        raise _fail(node, "cannot store a bool parameter")
    return value_type, typed


def annotate_statement(stmt: Stmt) -> Stmt:
    if isinstance(stmt, SetTaskParam):
        key_type, key = annotate(stmt.key, {})
        _expect(stmt.key, key_type, VType.TEXT, "parameter key")
        value_type, value = _storable(stmt, stmt.value)
        return replace(stmt, key=key, value=value, value_type=value_type)
    if isinstance(stmt, SetSessParam):
        key_type, key = annotate(stmt.key, {})
        _expect(stmt.key, key_type, VType.TEXT, "session key")
        value_type, value = _storable(stmt, stmt.value)
        return replace(stmt, key=key, value=value, value_type=value_type)
    if isinstance(stmt, SetClearance):
        value_type, value = annotate(stmt.value, {})
        _expect(stmt.value, value_type, VType.INT, "clearance")
        return replace(stmt, value=value)
    if isinstance(stmt, OpenSession):
        user_type, user = annotate(stmt.user, {})
        _expect(stmt.user, user_type, VType.TEXT, "session user")
        account_type, account = annotate(stmt.account, {})
        _expect(stmt.account, account_type, VType.INT, "session account")
        return replace(stmt, user=user, account=account)
    if isinstance(stmt, CloseSession):
        return stmt
    raise _fail(stmt, f"unknown statement {type(stmt).__name__}")


def _annotate_block(block: Optional[UpdateBlock]) -> Optional[UpdateBlock]:
    if block is None:
        return None
    return UpdateBlock(tuple(annotate_statement(s) for s in block.statements))


def _annotate_variant(variant: Variant) -> Variant:
    return Variant(
        account_update=_annotate_block(variant.account_update),
        clearance_update=_annotate_block(variant.clearance_update),
        session_update=_annotate_block(variant.session_update)
    )


def check_action(action: ActionSpec) -> ActionSpec:
    constraint = action.constraint
    if constraint is not None:
        constraint_type, constraint = annotate(constraint, {})
        _expect(action.constraint, constraint_type, VType.BOOL, f"constraint of '{action.action}'")
    return replace(
        action,
        constraint=constraint,
        on_authorized=_annotate_variant(action.on_authorized),
        on_denied=_annotate_variant(action.on_denied)
    )


def check_policy(spec: PolicySpec) -> PolicySpec:
    """Type-check every action; returns the spec with resolved parameter kinds"""
    return replace(spec, actions=tuple(check_action(a) for a in spec.actions))
