"""Client workloads: request templates, queue modes and the initial state they induce"""

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from src.engine.engine import step
from src.model.params import ParamSet, ParamValue
from src.model.state import ClientQueue, Decision, RequestMsg, ResponseMsg, SystemState
from src.policy.ast import PolicySpec
from src.utils.errors import ModelError, WorkloadFormatError
from src.utils.logger import get_logger

logger = get_logger('app')

SESSION_PLACEHOLDER = '$sess'
ACCOUNT_PLACEHOLDER = '$acc'
USER_PLACEHOLDER = '$user'


class QueueMode(Enum):
    ORDERED = "ordered"
    FREE = "free"
    CYCLIC = "cyclic"

    @staticmethod
    def get_description(mode: 'QueueMode') -> str:
        descriptions = {
            QueueMode.ORDERED: "Requests are sent strictly head-first",
            QueueMode.FREE: "Any request not yet sent may be sent next",
            QueueMode.CYCLIC: "Head-first, each sent request re-queued at the back"
        }
        return descriptions.get(mode, "Unknown mode")


@dataclass(frozen=True)
class RequestTemplate:
    """Action plus raw JSON parameters, placeholders still unresolved"""
    action: str
    params: Tuple[Tuple[str, Any], ...] = ()

    @staticmethod
    def of(action: str, params: Optional[Mapping[str, Any]] = None) -> 'RequestTemplate':
        frozen = tuple(
            (key, tuple(value) if isinstance(value, list) else value)
            for key, value in sorted((params or {}).items())
        )
        return RequestTemplate(action, frozen)


@dataclass(frozen=True)
class ClientSpec:
    client_id: str
    user: str
    account: Optional[int]
    requests: Tuple[RequestTemplate, ...] = ()
    mode: QueueMode = QueueMode.ORDERED


@dataclass(frozen=True)
class Workload:
    name: str
    clients: Tuple[ClientSpec, ...] = ()
    stop_on_deny: bool = False
    description: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'clients', tuple(sorted(self.clients, key=lambda c: c.client_id)))

    def client(self, client_id: str) -> ClientSpec:
        for spec in self.clients:
            if spec.client_id == client_id:
                return spec
        raise KeyError(client_id)

    @property
    def request_count(self) -> int:
        return sum(len(c.requests) for c in self.clients)

    def with_requests(self, keep) -> 'Workload':
        """Copy keeping only templates for which keep(client, template) is true"""
        clients = tuple(
            replace(c, requests=tuple(t for t in c.requests if keep(c, t)))
            for c in self.clients
        )
        return replace(self, clients=clients)


def _param_value(raw: Any, key: str) -> ParamValue:
    if isinstance(raw, tuple):
        raw = list(raw)
    try:
        if isinstance(raw, list) and not raw:
            return ParamValue.of_int_set()
        return ParamValue.from_python(raw)
    except ModelError as e:
        raise WorkloadFormatError(f"parameter '{key}': {e}") from e


def instantiate(template: RequestTemplate, client: ClientSpec, queue: ClientQueue) -> RequestMsg:
    """Resolve placeholders against the client and the session id it holds"""
    entries: List[Tuple[str, ParamValue]] = []
    for key, raw in template.params:
        if raw == SESSION_PLACEHOLDER:
            if queue.session is None:
                continue
            entries.append((key, ParamValue.of_int(queue.session)))
        elif raw == ACCOUNT_PLACEHOLDER:
            if client.account is None:
                continue
            entries.append((key, ParamValue.of_int(client.account)))
        elif raw == USER_PLACEHOLDER:
            entries.append((key, ParamValue.of_text(client.user)))
        else:
            entries.append((key, _param_value(raw, key)))
    return RequestMsg(client.client_id, client.user, template.action, ParamSet(tuple(entries)))


def eligible_positions(queue: ClientQueue, mode: QueueMode) -> Tuple[int, ...]:
    """Positions in the pending tuple that may be sent next"""
    if queue.halted or not queue.pending:
        return ()
    if mode == QueueMode.FREE:
        return tuple(range(len(queue.pending)))
    return (0,)


def advance_queue(queue: ClientQueue, position: int, mode: QueueMode, response: ResponseMsg,
                  stop_on_deny: bool) -> ClientQueue:
    """Queue after sending pending[position] and receiving response"""
    pending = list(queue.pending)
    sent = pending.pop(position)
    if mode == QueueMode.CYCLIC:
        pending.append(sent)
    session = queue.session
    opened = response.payload.get('sess')
    if opened is not None:
        session = opened.value
    if stop_on_deny and response.decision != Decision.AUTHORIZED:
        return ClientQueue((), session, True)
    return ClientQueue(tuple(pending), session, queue.halted)


def initial_state(policy: PolicySpec, workload: Workload) -> SystemState:
    params = {
        (account, task): policy.initial_params(account, task)
        for account in policy.accounts for task in policy.tasks
    }
    clearances = {
        (user, account, task): policy.initial_clearance(user, account, task)
        for user in policy.users for account in policy.accounts for task in policy.tasks
    }
    queues = {
        client.client_id: ClientQueue(tuple(range(len(client.requests))))
        for client in workload.clients
    }
    return SystemState.build(account_task_params=params, clearances=clearances, client_queues=queues)


def validate_workload(workload: Workload, policy: PolicySpec):
    for client in workload.clients:
        for template in client.requests:
            if policy.action(template.action) is None:
                raise WorkloadFormatError(
                    f"workload '{workload.name}', client '{client.client_id}': "
                    f"unknown action '{template.action}'"
                )


def simulate_workload(policy: PolicySpec, workload: Workload,
                      state: Optional[SystemState] = None) -> List[Tuple[SystemState, ResponseMsg]]:
    """Deliver every client's requests in listed order, client by client"""
    state = state or initial_state(policy, workload)
    transcript: List[Tuple[SystemState, ResponseMsg]] = []
    for client in workload.clients:
        for _ in range(len(client.requests)):
            queue = state.queue(client.client_id)
            if queue.halted or not queue.pending:
                break
            template = client.requests[queue.pending[0]]
            request = instantiate(template, client, queue)
            state, response = step(state, request, policy)
            queue = advance_queue(queue, 0, QueueMode.ORDERED, response, workload.stop_on_deny)
            state = state.with_queue(client.client_id, queue)
            transcript.append((state, response))
    return transcript


# file format

def workload_from_dict(data: Mapping[str, Any], default_name: str = '') -> Workload:
    try:
        clients = []
        for client_id, spec in sorted(data.get('clients', {}).items()):
            mode = QueueMode(spec.get('mode', 'ordered'))
            requests = tuple(
                RequestTemplate.of(item['action'], item.get('params', {}))
                for item in spec.get('requests', [])
            )
            account = spec.get('account')
            if account is not None and not isinstance(account, int):
                raise WorkloadFormatError(f"client '{client_id}': account must be an integer")
            clients.append(ClientSpec(str(client_id), spec['user'], account, requests, mode))
        return Workload(
            name=data.get('name', default_name),
            clients=tuple(clients),
            stop_on_deny=bool(data.get('stop_on_deny', False)),
            description=data.get('description', '')
        )
    except WorkloadFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise WorkloadFormatError(f"malformed workload '{default_name}': {e}") from e


def workload_to_dict(workload: Workload) -> Dict[str, Any]:
    return {
        'name': workload.name,
        'description': workload.description,
        'stop_on_deny': workload.stop_on_deny,
        'clients': {
            c.client_id: {
                'user': c.user,
                'account': c.account,
                'mode': c.mode.value,
                'requests': [
                    {'action': t.action,
                     'params': {k: list(v) if isinstance(v, tuple) else v for k, v in t.params}}
                    for t in c.requests
                ],
            }
            for c in workload.clients
        },
    }


def load_workload(path: Union[str, Path]) -> Workload:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise WorkloadFormatError(f"{path.name}: line {e.lineno}: {e.msg}") from e
    workload = workload_from_dict(data, default_name=path.stem)
    logger.info(f"Loaded workload '{workload.name}': {len(workload.clients)} clients, "
                f"{workload.request_count} requests")
    return workload


def with_stop_on_deny(workload: Workload, stop_on_deny: bool) -> Workload:
    return replace(workload, stop_on_deny=stop_on_deny)
