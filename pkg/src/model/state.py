"""Requests, responses, sessions and the canonical system state"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Tuple

from src.model.params import EMPTY_PARAMS, ParamSet, ValueKind
from src.utils.errors import ModelError

Clearance = int

AccountTaskKey = Tuple[int, str]
ClearanceKey = Tuple[str, int, str]


class Decision(Enum):
    AUTHORIZED = "A"
    DENIED = "D"
    INVALID_SESSION = "I"

    @staticmethod
    def get_description(decision: 'Decision') -> str:
        descriptions = {
            Decision.AUTHORIZED: "Request authorized, authorized-variant updates applied",
            Decision.DENIED: "Request denied, denied-variant updates applied",
            Decision.INVALID_SESSION: "Session id not open, request dropped"
        }
        return descriptions.get(decision, "Unknown decision")


@dataclass(frozen=True)
class RequestMsg:
    """One message sent by a client to the workflow server"""
    client: str
    user: str
    action: str
    params: ParamSet = EMPTY_PARAMS

    def __post_init__(self):
        sess = self.params.get('sess')
        if sess is not None and sess.kind != ValueKind.INT:
            raise ModelError(f"request parameter 'sess' must be an integer, got {sess}")

    @property
    def session_id(self) -> Optional[int]:
        sess = self.params.get('sess')
        return None if sess is None else sess.value

    def __str__(self):
        return f"{self.client}:{self.user}:{self.action}{self.params}"


@dataclass(frozen=True)
class ResponseMsg:
    request: RequestMsg
    decision: Decision
    payload: ParamSet = EMPTY_PARAMS


@dataclass(frozen=True)
class SessionRec:
    id: int
    user: str
    account: int
    params: ParamSet = EMPTY_PARAMS


@dataclass(frozen=True)
class ClientQueue:
    """Remaining workload items of one client and the session id it last learned"""
    pending: Tuple[int, ...] = ()
    session: Optional[int] = None
    halted: bool = False


@dataclass(frozen=True)
class SystemState:
    """Snapshot of sessions, account-task parameters, clearances and client queues.

    All collections are stored as key-sorted tuples so equal states compare and hash equal
    regardless of construction order.
    """
    open_sessions: Tuple[SessionRec, ...] = ()
    account_task_params: Tuple[Tuple[AccountTaskKey, ParamSet], ...] = ()
    clearances: Tuple[Tuple[ClearanceKey, Clearance], ...] = ()
    client_queues: Tuple[Tuple[str, ClientQueue], ...] = ()
    _sessions: Dict[int, SessionRec] = field(default=None, init=False, repr=False, compare=False, hash=False)
    _params: Dict[AccountTaskKey, ParamSet] = field(default=None, init=False, repr=False, compare=False, hash=False)
    _clearances: Dict[ClearanceKey, Clearance] = field(default=None, init=False, repr=False, compare=False, hash=False)
    _queues: Dict[str, ClientQueue] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        sessions = tuple(sorted(self.open_sessions, key=lambda s: s.id))
        if len({s.id for s in sessions}) != len(sessions):
            raise ModelError("open session ids must be unique")
        object.__setattr__(self, 'open_sessions', sessions)
        object.__setattr__(self, '_sessions', {s.id: s for s in sessions})

        for name, index in (('account_task_params', '_params'),
                            ('clearances', '_clearances'),
                            ('client_queues', '_queues')):
            entries = tuple(getattr(self, name))
            mapping = dict(entries)
            if len(mapping) != len(entries):
                raise ModelError(f"duplicate keys in {name}")
            object.__setattr__(self, name, tuple(sorted(mapping.items())))
            object.__setattr__(self, index, mapping)

    @staticmethod
    def build(
        sessions: Iterable[SessionRec] = (),
        account_task_params: Optional[Mapping[AccountTaskKey, ParamSet]] = None,
        clearances: Optional[Mapping[ClearanceKey, Clearance]] = None,
        client_queues: Optional[Mapping[str, ClientQueue]] = None
    ) -> 'SystemState':
        return SystemState(
            open_sessions=tuple(sessions),
            account_task_params=tuple((account_task_params or {}).items()),
            clearances=tuple((clearances or {}).items()),
            client_queues=tuple((client_queues or {}).items())
        )

    @property
    def next_session_id(self) -> int:
        """Smallest id above every open session"""
        return self.open_sessions[-1].id + 1 if self.open_sessions else 1

    def session(self, session_id: int) -> Optional[SessionRec]:
        return self._sessions.get(session_id)

    def params_of(self, account: int, task: str) -> Optional[ParamSet]:
        return self._params.get((account, task))

    def clearance(self, user: str, account: int, task: str) -> Optional[Clearance]:
        return self._clearances.get((user, account, task))

    def queue(self, client: str) -> Optional[ClientQueue]:
        return self._queues.get(client)

    def account_params(self, account: int) -> Dict[str, ParamSet]:
        """All task parameter sets of one account"""
        return {task: p for (acc, task), p in self.account_task_params if acc == account}

    def clearance_snapshot(self, user: str, account: int) -> Dict[str, Clearance]:
        """All task clearances of one (user, account) pair"""
        return {task: c for (u, acc, task), c in self.clearances if u == user and acc == account}

    def with_queue(self, client: str, queue: ClientQueue) -> 'SystemState':
        queues = dict(self._queues)
        queues[client] = queue
        return SystemState(
            open_sessions=self.open_sessions,
            account_task_params=self.account_task_params,
            clearances=self.clearances,
            client_queues=tuple(queues.items())
        )

    def replace(self, **changes) -> 'SystemState':
        """Copy with whole collections replaced (mappings or tuples accepted)"""
        values = {
            'open_sessions': self.open_sessions,
            'account_task_params': self.account_task_params,
            'clearances': self.clearances,
            'client_queues': self.client_queues,
        }
        for key, value in changes.items():
            if key not in values:
                raise ModelError(f"unknown state field '{key}'")
            values[key] = tuple(value.items()) if isinstance(value, Mapping) else tuple(value)
        return SystemState(**values)
