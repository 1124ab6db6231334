"""Per-task subdivision: which actions can be left out when analysing one task"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from src.config.settings import DEFAULT_NODE_BUDGET, DEFAULT_PATH_BUDGET
from src.engine.engine import apply_variant
from src.model.params import ParamSet, ParamValue
from src.model.state import RequestMsg, SystemState
from src.policy.analysis import SESS, TASK, action_footprint, conflicting_writes
from src.policy.ast import PolicySpec
from src.rules.checker import run_rule
from src.rules.patterns import RuleSpec
from src.statespace.explorer import explore, successors
from src.statespace.graph import StateGraph
from src.statespace.workload import Workload, initial_state
from src.utils.errors import BudgetExceededError, InconclusiveAnalysisError
from src.utils.logger import get_logger

logger = get_logger('app')

PROBE_CLIENT = 'probe'


class DependencyReason(Enum):
    OWN_TASK = "own-task"
    TASK_PARAMS_CHANGED = "task-params-changed"
    SESSION_PARAMS_CHANGED = "session-params-changed"
    INDIRECT_INFLUENCE = "indirect-influence"

    @staticmethod
    def get_description(reason: 'DependencyReason') -> str:
        descriptions = {
            DependencyReason.OWN_TASK: "Action belongs to the analysed task",
            DependencyReason.TASK_PARAMS_CHANGED: "Action alters the task's account parameters",
            DependencyReason.SESSION_PARAMS_CHANGED: "Action alters session parameters",
            DependencyReason.INDIRECT_INFLUENCE: "Action writes a value read by an action of the task"
        }
        return descriptions.get(reason, "Unknown reason")


@dataclass(frozen=True)
class ProbeResult:
    independent: bool
    reason: Optional[DependencyReason] = None
    detail: str = ''


@dataclass
class IndependenceReport:
    task: str
    independent_actions: Tuple[str, ...] = ()
    exceptions: List[Tuple[str, DependencyReason, str]] = field(default_factory=list)

    def is_independent(self, action: str) -> bool:
        return action in self.independent_actions


def _probe_requests(policy: PolicySpec, action: str, state: SystemState) -> List[RequestMsg]:
    """One request per open session, plus a fresh one per declared (user, account)"""
    requests = [
        RequestMsg(PROBE_CLIENT, s.user, action, _params(sess=s.id))
        for s in state.open_sessions
    ]
    requests.extend(
        RequestMsg(PROBE_CLIENT, user, action, _params(acc=account))
        for user in policy.users for account in policy.accounts
    )
    return requests


def _params(**values: int) -> ParamSet:
    return ParamSet(tuple((k, ParamValue.of_int(v)) for k, v in values.items()))


def _session_params(state: SystemState) -> Dict[int, Any]:
    return {s.id: (s.user, s.account, s.params) for s in state.open_sessions}


def _static_probe(policy: PolicySpec, task: str, action: str) -> Optional[ProbeResult]:
    footprint = action_footprint(policy.action(action))
    for write in sorted(footprint.writes):
        if write.kind == TASK and write.task == task:
            return ProbeResult(False, DependencyReason.TASK_PARAMS_CHANGED, f"writes {write}")
        if write.kind == SESS:
            return ProbeResult(False, DependencyReason.SESSION_PARAMS_CHANGED, f"writes {write}")
    readers = [action_footprint(a) for a in policy.actions_of(task)]
    hits = conflicting_writes(footprint, readers)
    if hits:
        return ProbeResult(False, DependencyReason.INDIRECT_INFLUENCE,
                           "writes " + ', '.join(str(h) for h in hits))
    return None


def probe_task_independence(policy: PolicySpec, task: str, action: str,
                            states: Iterable[SystemState]) -> ProbeResult:
    """Independent iff neither variant of `action` touches what `task` observes"""
    spec = policy.action(action)
    if spec is None:
        raise KeyError(action)
    if spec.task == task:
        return ProbeResult(False, DependencyReason.OWN_TASK)

    static = _static_probe(policy, task, action)
    if static is not None:
        return static

    for state in states:
        for request in _probe_requests(policy, action, state):
            for authorized in (True, False):
                after = apply_variant(state, request, policy, authorized)
                for account in policy.accounts:
                    if state.params_of(account, task) != after.params_of(account, task):
                        return ProbeResult(False, DependencyReason.TASK_PARAMS_CHANGED,
                                           f"account {account}")
                if _session_params(state) != _session_params(after):
                    return ProbeResult(False, DependencyReason.SESSION_PARAMS_CHANGED)
    return ProbeResult(True)


def sample_states(policy: PolicySpec, workload: Workload,
                  graph: Optional[StateGraph] = None) -> List[SystemState]:
    """Every state of the graph if given, else the initial state and its two-step successors"""
    if graph is not None:
        return list(graph.states)
    root = initial_state(policy, workload)
    sample = [root]
    for first in successors(policy, workload, root):
        sample.append(first.state)
        sample.extend(second.state for second in successors(policy, workload, first.state))
    return sample


def build_independence_report(policy: PolicySpec, task: str,
                              states: Sequence[SystemState]) -> IndependenceReport:
    report = IndependenceReport(task)
    independent = []
    for action in policy.action_names:
        result = probe_task_independence(policy, task, action, states)
        if result.independent:
            independent.append(action)
        else:
            report.exceptions.append((action, result.reason, result.detail))
    report.independent_actions = tuple(independent)
    logger.info(f"Task '{task}': independent actions {list(report.independent_actions)}")
    return report


def project_workload(w: Workload, report: IndependenceReport) -> Workload:
    return w.with_requests(lambda client, template: not report.is_independent(template.action))


def _verdicts(graph: StateGraph, rules: Sequence[RuleSpec], budget: int, label: str) -> Dict[str, bool]:
    verdicts = {}
    for spec in rules:
        result = run_rule(graph, spec, budget)
        if result.partial and not result.violations:
            raise InconclusiveAnalysisError(f"rule {spec.rule_id} on the {label} graph exceeded its budget")
        verdicts[spec.rule_id] = bool(result.violations)
    return verdicts


def verify_equivalence(policy: PolicySpec, w: Workload, task: str, rules: Sequence[RuleSpec],
                       budget: int = DEFAULT_NODE_BUDGET,
                       path_budget: int = DEFAULT_PATH_BUDGET) -> bool:
    """Rule verdicts on the whole graph agree with those on the task's projected graph"""
    try:
        whole = explore(policy, None, w, budget)
    except BudgetExceededError as e:
        raise InconclusiveAnalysisError(f"whole graph: {e}") from e
    report = build_independence_report(policy, task, sample_states(policy, w, whole))
    projected_workload = project_workload(w, report)
    try:
        projected = explore(policy, None, projected_workload, budget)
    except BudgetExceededError as e:
        raise InconclusiveAnalysisError(f"projected graph: {e}") from e

    full_verdicts = _verdicts(whole, rules, path_budget, 'whole')
    projected_verdicts = _verdicts(projected, rules, path_budget, 'projected')
    agree = full_verdicts == projected_verdicts
    logger.info(
        f"Subdivision of '{task}' on '{w.name}': {whole.node_count} -> {projected.node_count} nodes, "
        f"verdicts {'agree' if agree else 'differ'}"
    )
    return agree


def report_to_dict(report: IndependenceReport) -> Dict[str, Any]:
    return {
        'task': report.task,
        'independent_actions': list(report.independent_actions),
        'exceptions': [
            {'action': action, 'reason': reason.value, 'detail': detail}
            for action, reason, detail in report.exceptions
        ],
    }
