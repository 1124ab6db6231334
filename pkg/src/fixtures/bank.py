"""Internet-banking scenario: policy, rules, workloads and the mutation catalog"""

import json
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Any, Callable, Dict, List, Tuple

from src.config.settings import (
    BANK_POLICY_PATH, BANK_RULES_PATH, EXPECTED_REPORT_PATH, MUTATIONS_DIR, TABLE2_DIR
)
from src.policy.ast import ActionSpec, If, Lit, PolicySpec, SetClearance, UpdateBlock, walk_expr
from src.policy.parser import parse_policy
from src.policy.typecheck import check_policy
from src.rules.notation import load_rules
from src.rules.patterns import RuleSpec
from src.statespace.workload import Workload, load_workload
from src.utils.errors import UnknownMutationError
from src.utils.logger import get_logger

logger = get_logger('app')

# Table II rows in the order they are reported
TABLE2_ROWS = (
    'base',
    'wrong_login_password',
    'wrong_eft_password',
    'helper',
    'eft_500',
    'plus_auth_other_tid',
    'combined',
    'misc',
    'helper_same_acc',
    'master_other_acc',
)


@dataclass(frozen=True)
class BankScenario:
    policy_source: str
    policy: PolicySpec
    rules: Tuple[RuleSpec, ...]
    workloads: Dict[str, Workload]
    expected: Dict[str, Any]


def build_bank_policy() -> PolicySpec:
    return parse_policy(BANK_POLICY_PATH.read_text(encoding='utf-8'))


def bank_rules() -> List[RuleSpec]:
    return load_rules(BANK_RULES_PATH)


def table2_workloads() -> Dict[str, Workload]:
    return {name: load_workload(TABLE2_DIR / f'{name}.workload') for name in TABLE2_ROWS}


def mutation_workloads() -> Dict[str, Workload]:
    return {mutation_id: load_workload(MUTATIONS_DIR / f'{mutation_id}.workload')
            for mutation_id in MUTATIONS}


def expected_report() -> Dict[str, Any]:
    with open(EXPECTED_REPORT_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def load_bank_scenario() -> BankScenario:
    source = BANK_POLICY_PATH.read_text(encoding='utf-8')
    return BankScenario(
        policy_source=source,
        policy=parse_policy(source),
        rules=tuple(bank_rules()),
        workloads=table2_workloads(),
        expected=expected_report()
    )


# mutations

def _replace_node(node: Any, target: Any, replacement: Any) -> Any:
    """Copy of the tree with `target` (by identity) swapped for `replacement`"""
    if node is target:
        return replacement
    if not is_dataclass(node) or isinstance(node, type):
        return node
    changes = {}
    for f in fields(node):
        if not f.init:
            continue
        value = getattr(node, f.name)
        if isinstance(value, tuple):
            items = tuple(_replace_node(item, target, replacement) for item in value)
            if any(a is not b for a, b in zip(items, value)):
                changes[f.name] = items
        else:
            new = _replace_node(value, target, replacement)
            if new is not value:
                changes[f.name] = new
    return replace(node, **changes) if changes else node


def _limit_branch(action: ActionSpec) -> If:
    for node in walk_expr(action.constraint):
        if isinstance(node, If):
            return node
    raise UnknownMutationError(f"action '{action.action}' has no limit check")


def _drop_unregistered_limit(action: ActionSpec) -> ActionSpec:
    branch = _limit_branch(action)
    return _replace_node(action, branch, replace(branch, other=Lit(True)))


def _drop_registered_limit(action: ActionSpec) -> ActionSpec:
    branch = _limit_branch(action)
    return _replace_node(action, branch, replace(branch, then=Lit(True)))


def _drop_failure_count(action: ActionSpec) -> ActionSpec:
    return replace(action, on_denied=replace(action.on_denied, account_update=None))


def _drop_login_floor(action: ActionSpec) -> ActionSpec:
    return replace(action, required_clearance=-1)


def _full_eft_clearance(action: ActionSpec) -> ActionSpec:
    block = action.on_authorized.clearance_update or UpdateBlock()
    statements = tuple(
        replace(stmt, value=Lit(2)) if isinstance(stmt, SetClearance) and stmt.task == 'eft' else stmt
        for stmt in block.statements
    )
    return replace(action, on_authorized=replace(
        action.on_authorized, clearance_update=UpdateBlock(statements)
    ))


@dataclass(frozen=True)
class Mutation:
    mutation_id: str
    description: str
    action: str
    targets: Tuple[str, ...]
    rewrite: Callable[[ActionSpec], ActionSpec]


MUTATIONS: Dict[str, Mutation] = {
    m.mutation_id: m for m in (
        Mutation('drop-limit-6', "transf_auth no longer checks the unregistered-destination limit",
                 'transf_auth', ('rule6',), _drop_unregistered_limit),
        Mutation('drop-limit-7', "transf_auth no longer checks the registered-destination limit",
                 'transf_auth', ('rule7',), _drop_registered_limit),
        Mutation('drop-three-strikes', "Denied auth no longer counts failed logins",
                 'auth', ('rule2',), _drop_failure_count),
        Mutation('drop-login-guard', "balance no longer requires the post-login clearance",
                 'balance', ('rule3',), _drop_login_floor),
        Mutation('allow-helper-auth', "Every user reaches the approval clearance after login",
                 'auth', ('rule5',), _full_eft_clearance),
    )
}


def mutate_policy(spec: PolicySpec, mutation_id: str) -> PolicySpec:
    mutation = MUTATIONS.get(mutation_id)
    if mutation is None:
        raise UnknownMutationError(
            f"unknown mutation '{mutation_id}', expected one of {sorted(MUTATIONS)}"
        )
    actions = tuple(
        mutation.rewrite(a) if a.action == mutation.action else a for a in spec.actions
    )
    logger.info(f"Applied mutation {mutation_id} to action '{mutation.action}'")
    return check_policy(replace(spec, actions=actions))
