"""Renders a PolicySpec back to policy source"""

from typing import List, Optional

from src.model.params import ParamValue, ValueKind
from src.policy.ast import (
    AccountRef, ActionSpec, Binary, Call, ClearanceRef, CloseSession, Expr, If, Let, Lit,
    OpenSession, ParamRef, ParamScope, PolicySpec, SetClearance, SetLit, SetSessParam,
    SetTaskParam, Slot, Stmt, Unary, UpdateBlock, UserRef, Var, Variant, VType
)
from src.policy.lexer import escape_text

INDENT = '    '


def print_expr(expr: Expr) -> str:
    """Fully parenthesized rendering"""
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return 'true' if expr.value else 'false'
        if isinstance(expr.value, int):
            return str(expr.value) if expr.value >= 0 else f'(-{-expr.value})'
        return escape_text(expr.value)
    if isinstance(expr, SetLit):
        word = 'intset' if expr.elem == VType.INT else 'textset'
        return word + '{' + ', '.join(print_expr(item) for item in expr.items) + '}'
    if isinstance(expr, ParamRef):
        if expr.scope == ParamScope.TASKOF:
            return f'taskof({expr.task}, {print_expr(expr.key)}, {print_expr(expr.default)})'
        return f'{expr.scope.value}({print_expr(expr.key)}, {print_expr(expr.default)})'
    if isinstance(expr, UserRef):
        return 'user()'
    if isinstance(expr, AccountRef):
        return 'account()'
    if isinstance(expr, ClearanceRef):
        return f'clearance({expr.task})'
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == 'not':
            return f'(not {print_expr(expr.operand)})'
        return f'(-{print_expr(expr.operand)})'
    if isinstance(expr, Binary):
        return f'({print_expr(expr.left)} {expr.op} {print_expr(expr.right)})'
    if isinstance(expr, Call):
        return f'{expr.func}(' + ', '.join(print_expr(arg) for arg in expr.args) + ')'
    if isinstance(expr, If):
        return (f'(if {print_expr(expr.cond)} then {print_expr(expr.then)} '
                f'else {print_expr(expr.other)})')
    if isinstance(expr, Let):
        return f'(let {expr.name} = {print_expr(expr.value)} in {print_expr(expr.body)})'
    raise TypeError(f"cannot print {type(expr).__name__}")


def print_statement(stmt: Stmt) -> str:
    if isinstance(stmt, SetTaskParam):
        return f'set task {stmt.task}[{print_expr(stmt.key)}] = {print_expr(stmt.value)}'
    if isinstance(stmt, SetClearance):
        return f'set clearance {stmt.task} = {print_expr(stmt.value)}'
    if isinstance(stmt, OpenSession):
        return f'open_session({print_expr(stmt.user)}, {print_expr(stmt.account)})'
    if isinstance(stmt, CloseSession):
        return 'close_session'
    if isinstance(stmt, SetSessParam):
        return f'set sess[{print_expr(stmt.key)}] = {print_expr(stmt.value)}'
    raise TypeError(f"cannot print {type(stmt).__name__}")


def print_param_value(value: ParamValue) -> str:
    if value.kind == ValueKind.TEXT:
        return escape_text(value.value)
    if value.kind == ValueKind.INT_SET:
        return 'intset{' + ', '.join(str(v) for v in sorted(value.value)) + '}'
    if value.kind == ValueKind.TEXT_SET:
        return 'textset{' + ', '.join(escape_text(v) for v in sorted(value.value)) + '}'
    return str(value.value)


def _print_block(name: str, block: Optional[UpdateBlock], depth: int) -> List[str]:
    if block is None:
        return []
    pad = INDENT * depth
    lines = [f'{pad}{name} {{']
    lines.extend(f'{pad}{INDENT}{print_statement(s)}' for s in block.statements)
    lines.append(f'{pad}}}')
    return lines


def _print_variant(name: str, variant: Variant) -> List[str]:
    if variant.is_identity:
        return []
    lines = [f'{INDENT}{name} {{']
    for slot in Slot:
        lines.extend(_print_block(slot.value, variant.slot(slot), 2))
    lines.append(f'{INDENT}}}')
    return lines


def print_action(action: ActionSpec) -> str:
    lines = [f'action {action.action} task {action.task} clearance {action.required_clearance} {{']
    if action.constraint is not None:
        lines.append(f'{INDENT}constraint {print_expr(action.constraint)}')
    lines.extend(_print_variant('on_authorized', action.on_authorized))
    lines.extend(_print_variant('on_denied', action.on_denied))
    lines.append('}')
    return '\n'.join(lines)


def print_policy(spec: PolicySpec) -> str:
    """Source text that parses back to an equal PolicySpec"""
    out: List[str] = []
    for task in spec.tasks:
        out.append(f'task {task}')
    if spec.users:
        out.append('users ' + ' '.join(spec.users))
    if spec.accounts:
        out.append('accounts ' + ' '.join(str(a) for a in spec.accounts))
    out.append(f'default_clearance {spec.default_clearance}')
    for (user, account, task), level in spec.clearance_overrides:
        out.append(f'init clearance {user} {account} {task} {level}')
    for (account, task), params in spec.initial_account_params:
        out.append(f'init account {account} task {task} {{')
        for key, value in params.items():
            out.append(f'{INDENT}{escape_text(key)} = {print_param_value(value)}')
        out.append('}')
    for action in spec.actions:
        out.append('')
        out.append(print_action(action))
    return '\n'.join(out) + '\n'
