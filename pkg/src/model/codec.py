"""Canonical byte encoding of system states, used as node identity"""

import hashlib
import json
from typing import Any, Dict, List

from src.model.params import ParamSet, ParamValue, ValueKind
from src.model.state import ClientQueue, SessionRec, SystemState
from src.utils.errors import ModelError


def _param_set_to_json(p: ParamSet) -> List[List[Any]]:
    return [[key, value.kind.value, value.to_json()] for key, value in p.items()]


def _param_set_from_json(items: List[List[Any]]) -> ParamSet:
    entries = []
    for key, kind, raw in items:
        value_kind = ValueKind(kind)
        entries.append((key, ParamValue.from_python(raw, value_kind)))
    return ParamSet(tuple(entries))


def state_to_json(state: SystemState) -> Dict[str, Any]:
    """Tagged, order-fixed structure mirroring the state"""
    return {
        'sessions': [
            [s.id, s.user, s.account, _param_set_to_json(s.params)]
            for s in state.open_sessions
        ],
        'params': [
            [acc, task, _param_set_to_json(p)]
            for (acc, task), p in state.account_task_params
        ],
        'clearances': [
            [user, acc, task, level]
            for (user, acc, task), level in state.clearances
        ],
        'queues': [
            [client, list(q.pending), q.session, q.halted]
            for client, q in state.client_queues
        ],
    }


def state_from_json(data: Dict[str, Any]) -> SystemState:
    try:
        return SystemState.build(
            sessions=[
                SessionRec(sid, user, acc, _param_set_from_json(params))
                for sid, user, acc, params in data['sessions']
            ],
            account_task_params={
                (acc, task): _param_set_from_json(params)
                for acc, task, params in data['params']
            },
            clearances={
                (user, acc, task): level
                for user, acc, task, level in data['clearances']
            },
            client_queues={
                client: ClientQueue(tuple(pending), session, halted)
                for client, pending, session, halted in data['queues']
            }
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"malformed state encoding: {e}") from e


def canonical_bytes(state: SystemState) -> bytes:
    """Compact sorted-key JSON; equal states give identical bytes"""
    return json.dumps(
        state_to_json(state),
        sort_keys=True,
        separators=(',', ':'),
        ensure_ascii=False
    ).encode('utf-8')


def state_from_bytes(data: bytes) -> SystemState:
    return state_from_json(json.loads(data.decode('utf-8')))


def state_digest(state: SystemState) -> str:
    return hashlib.sha256(canonical_bytes(state)).hexdigest()
