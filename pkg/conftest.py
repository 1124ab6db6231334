"""Shared fixtures: the bank scenario, tiny policies and workload builders"""

from typing import Any, Dict, Optional

import pytest

from src.fixtures.bank import bank_rules, build_bank_policy, mutate_policy
from src.model.params import ParamSet
from src.model.state import RequestMsg
from src.policy.parser import parse_policy
from src.statespace.explorer import explore
from src.statespace.workload import Workload, workload_from_dict

# one task, no constraints and no updates
NOOP_POLICY = """
task t
users u1 u2 u3
accounts 1
action noop task t clearance 0 { }
"""

# forms/auth pair without any limit, for accumulation checks on hand-made graphs
PAYMENT_POLICY = """
task pay
users alice
accounts 1
init account 1 task pay {
    "registered" = intset{7}
}
action forms task pay clearance 0 { }
action auth task pay clearance 0 { }
"""

# task b writes what an action of task a reads
COUPLED_POLICY = """
task a
task b
task c
users u
accounts 1
action read_b task a clearance 0 {
    constraint taskof(b, "y", 0) = 0
}
action touch_a task b clearance 0 {
    on_authorized { account_update { set task a["x"] = 1 } }
}
action write_b task b clearance 0 {
    on_authorized { account_update { set task b["y"] = 1 } }
}
action idle task c clearance 0 { }
"""


@pytest.fixture(scope="session")
def bank_policy():
    return build_bank_policy()


@pytest.fixture(scope="session")
def bank_rule_specs():
    return {spec.rule_id: spec for spec in bank_rules()}


@pytest.fixture(scope="session")
def noop_policy():
    return parse_policy(NOOP_POLICY)


@pytest.fixture(scope="session")
def payment_policy():
    return parse_policy(PAYMENT_POLICY)


@pytest.fixture(scope="session")
def coupled_policy():
    return parse_policy(COUPLED_POLICY)


@pytest.fixture
def make_workload():
    """Build a Workload from a {client_id: spec} mapping in the .workload JSON layout"""
    def build(name: str, clients: Dict[str, Dict[str, Any]], stop_on_deny: bool = False) -> Workload:
        return workload_from_dict({'name': name, 'stop_on_deny': stop_on_deny, 'clients': clients})
    return build


@pytest.fixture
def make_request():
    def build(action: str, user: str = 'master', client: str = 'c1', **params) -> RequestMsg:
        return RequestMsg(client, user, action, ParamSet.from_mapping(params))
    return build


@pytest.fixture
def bank_graph(bank_policy):
    """Explore a workload against the bank policy, optionally mutated"""
    def build(workload: Workload, mutation: Optional[str] = None):
        policy = mutate_policy(bank_policy, mutation) if mutation else bank_policy
        return explore(policy, None, workload)
    return build


@pytest.fixture
def transfer_requests():
    """Ordered request list: login, then one home/forms/auth round per (tid, dest, val)"""
    def build(transfers, password: str = 'm1-token', login: str = 'm1-secret'):
        requests = [
            {'action': 'idtf', 'params': {'acc': '$acc'}},
            {'action': 'auth', 'params': {'sess': '$sess', 'pass': login}},
        ]
        for tid, dest, val in transfers:
            requests.extend([
                {'action': 'transf_home', 'params': {'sess': '$sess'}},
                {'action': 'transf_forms', 'params': {'sess': '$sess', 'tid': tid, 'dest': dest, 'val': val}},
                {'action': 'transf_auth', 'params': {'sess': '$sess', 'tid': tid, 'pass': password}},
            ])
        return requests
    return build
