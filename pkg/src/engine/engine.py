"""Request processing: session resolution, two-stage authorization, variant updates"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from src.engine.context import EvalContext
from src.model.params import EMPTY_PARAMS, ParamSet, ParamValue
from src.model.state import (
    Decision, RequestMsg, ResponseMsg, SessionRec, SystemState
)
from src.policy.ast import ActionSpec, PolicySpec, Variant
from src.policy.evaluator import (
    CloseSessionOp, OpenSessionOp, SetSessOp, StateDelta, eval_constraint, eval_update
)
from src.utils.errors import ModelError, PolicyRuntimeError
from src.utils.logger import get_logger

logger = get_logger('app')


class SessionStatus(Enum):
    EXISTING = "existing"
    NEW = "new"
    INVALID = "invalid"


@dataclass(frozen=True)
class SessionResolution:
    status: SessionStatus
    session: Optional[SessionRec] = None


@dataclass(frozen=True)
class Binding:
    """(user, account) a request acts for, plus its open session if any"""
    user: str
    account: Optional[int]
    session: Optional[SessionRec] = None

    @property
    def session_id(self) -> Optional[int]:
        return None if self.session is None else self.session.id


def resolve_session(state: SystemState, r: RequestMsg) -> SessionResolution:
    sess = r.session_id
    if sess is None:
        return SessionResolution(SessionStatus.NEW)
    session = state.session(sess)
    if session is None:
        return SessionResolution(SessionStatus.INVALID)
    return SessionResolution(SessionStatus.EXISTING, session)


def session_binding(r: RequestMsg, resolution: SessionResolution) -> Binding:
    if resolution.status == SessionStatus.EXISTING:
        session = resolution.session
        return Binding(session.user, session.account, session)
    if resolution.status == SessionStatus.NEW:
        acc = r.params.get('acc')
        account = acc.value if acc is not None and isinstance(acc.value, int) else None
        return Binding(r.user, account)
    return Binding(r.user, None)


def _action(policy: PolicySpec, r: RequestMsg) -> ActionSpec:
    action = policy.action(r.action)
    if action is None:
        raise ModelError(f"request names undeclared action '{r.action}'")
    return action


def _declared(policy: PolicySpec, binding: Binding) -> bool:
    return binding.user in policy.users and binding.account in policy.accounts


def check_clearance(state: SystemState, r: RequestMsg, binding: Binding, policy: PolicySpec) -> bool:
    """Clearance comparison: stored level for (user, account, task) against the action's floor"""
    action = _action(policy, r)
    if binding.account is None:
        return False
    level = state.clearance(binding.user, binding.account, action.task)
    if level is None:
        return False
    return level >= action.required_clearance


def build_context(state: SystemState, r: RequestMsg, binding: Binding, action: ActionSpec) -> EvalContext:
    has_account = binding.account is not None
    return EvalContext(
        request_params=r.params,
        session_params=binding.session.params if binding.session else EMPTY_PARAMS,
        account_task_params=state.account_params(binding.account) if has_account else {},
        clearance_snapshot=state.clearance_snapshot(binding.user, binding.account) if has_account else {},
        user=binding.user,
        account=binding.account,
        task=action.task,
        action=action.action
    )


def authorize(state: SystemState, r: RequestMsg, binding: Binding, policy: PolicySpec) -> Decision:
    """Authorized iff the clearance check and the action's constraint both hold"""
    if not check_clearance(state, r, binding, policy):
        return Decision.DENIED
    action = _action(policy, r)
    ctx = build_context(state, r, binding, action)
    return Decision.AUTHORIZED if eval_constraint(action.constraint, ctx) else Decision.DENIED


def variant_delta(state: SystemState, r: RequestMsg, binding: Binding, policy: PolicySpec,
                  variant: Variant) -> StateDelta:
    """Account, clearance and session writes of one variant, all read from the pre-state"""
    action = _action(policy, r)
    ctx = build_context(state, r, binding, action)
    delta = StateDelta()
    if _declared(policy, binding):
        delta = delta.merge(eval_update(variant.account_update, ctx))
        delta = delta.merge(eval_update(variant.clearance_update, ctx))
    return delta.merge(eval_update(variant.session_update, ctx))


def apply_delta(state: SystemState, binding: Binding, policy: PolicySpec, delta: StateDelta,
                action_name: str = '') -> Tuple[SystemState, ParamSet]:
    """Successor state and response payload; session ops run in statement order"""
    if delta.is_empty:
        return state, EMPTY_PARAMS

    changes = {}
    if delta.task_writes:
        params: Dict[Tuple[int, str], ParamSet] = dict(state.account_task_params)
        for task, key, value in delta.task_writes:
            current = params.get((binding.account, task), EMPTY_PARAMS)
            params[(binding.account, task)] = current.with_value(key, value)
        changes['account_task_params'] = params
    if delta.clearance_writes:
        clearances = dict(state.clearances)
        for task, level in delta.clearance_writes:
            clearances[(binding.user, binding.account, task)] = level
        changes['clearances'] = clearances

    payload = EMPTY_PARAMS
    if delta.session_ops:
        sessions: Dict[int, SessionRec] = {s.id: s for s in state.open_sessions}
        current = binding.session_id
        for op in delta.session_ops:
            if isinstance(op, OpenSessionOp):
                if op.user not in policy.users or op.account not in policy.accounts:
                    raise PolicyRuntimeError(
                        action_name, 'open_session',
                        f"undeclared user or account ({op.user}, {op.account})"
                    )
                new_id = max(sessions) + 1 if sessions else 1
                sessions[new_id] = SessionRec(new_id, op.user, op.account, EMPTY_PARAMS)
                current = new_id
                payload = payload.with_value('sess', ParamValue.of_int(new_id))
            elif isinstance(op, CloseSessionOp):
                if current is not None:
                    sessions.pop(current, None)
                current = None
            elif isinstance(op, SetSessOp):
                if current is not None and current in sessions:
                    rec = sessions[current]
                    sessions[current] = SessionRec(rec.id, rec.user, rec.account,
                                                   rec.params.with_value(op.key, op.value))
        changes['open_sessions'] = tuple(sessions.values())

    return state.replace(**changes), payload


def apply_variant(state: SystemState, r: RequestMsg, policy: PolicySpec,
                  authorized: bool) -> SystemState:
    """Apply one variant's updates without deciding; an invalid session changes nothing"""
    resolution = resolve_session(state, r)
    if resolution.status == SessionStatus.INVALID:
        return state
    binding = session_binding(r, resolution)
    action = _action(policy, r)
    delta = variant_delta(state, r, binding, policy, action.variant(authorized))
    successor, _ = apply_delta(state, binding, policy, delta, action.action)
    return successor


def step(state: SystemState, r: RequestMsg, policy: PolicySpec) -> Tuple[SystemState, ResponseMsg]:
    """Process one request; client queues are left to the caller"""
    action = _action(policy, r)
    resolution = resolve_session(state, r)
    if resolution.status == SessionStatus.INVALID:
        return state, ResponseMsg(r, Decision.INVALID_SESSION)

    binding = session_binding(r, resolution)
    decision = authorize(state, r, binding, policy)
    variant = action.variant(decision == Decision.AUTHORIZED)
    delta = variant_delta(state, r, binding, policy, variant)
    successor, payload = apply_delta(state, binding, policy, delta, action.action)
    return successor, ResponseMsg(r, decision, payload)


def step_with_binding(state: SystemState, r: RequestMsg,
                      policy: PolicySpec) -> Tuple[SystemState, ResponseMsg, Binding]:
    """step, also returning the (user, account, session) the request acted for"""
    resolution = resolve_session(state, r)
    binding = session_binding(r, resolution)
    successor, response = step(state, r, policy)
    return successor, response, binding


def run_sequence(initial: SystemState, rs: Sequence[RequestMsg], policy: PolicySpec) -> List[ResponseMsg]:
    responses: List[ResponseMsg] = []
    state = initial
    for index, r in enumerate(rs):
        state, response = step(state, r, policy)
        logger.debug(f"#{index} {r.client} {r.action} -> {response.decision.value}")
        responses.append(response)
    return responses
