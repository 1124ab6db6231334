"""Path queries for security rules over a reachability graph.

Each rule template is an automaton advanced edge by edge along a path. On an acyclic
graph every path is simple, so the automaton is propagated forward over
(node, automaton state) pairs. Graphs with cycles fall back to enumerating simple paths.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Hashable, List, Optional, Sequence, Set, Tuple

from src.config.settings import DEFAULT_NODE_BUDGET, DEFAULT_PATH_BUDGET
from src.engine.engine import step
from src.model.state import Decision, SystemState
from src.policy.ast import PolicySpec
from src.rules.patterns import (
    Accumulation, EventPattern, FrozenBindings, Precedence, Response, Rule, RuleSpec, ThreeStrikes,
    freeze, label_param
)
from src.statespace.graph import (
    Edge, EdgeLabel, StateGraph, acyclic_paths_to_root, nodes_on_cycles
)
from src.utils.errors import PathBudgetExceededError
from src.utils.logger import get_logger

logger = get_logger('app')


@dataclass(frozen=True)
class Violation:
    insecure_state: int
    rule: str
    witness: Tuple[Edge, ...]
    accumulated: Optional[int] = None


@dataclass
class RuleResult:
    rule_id: str
    notation: str
    violations: List[Violation] = field(default_factory=list)
    partial: bool = False

    @property
    def status(self) -> str:
        if self.violations:
            return 'violated'
        return 'partial' if self.partial else 'clean'


@dataclass(frozen=True)
class _Hit:
    amount: Optional[int] = None


# automata

class _ResponseAutomaton:
    """State: set of (antecedents matched, bindings)"""

    def __init__(self, rule: Response):
        self.rule = rule
        self.k = len(rule.antecedents)

    def start(self) -> FrozenSet[Tuple[int, FrozenBindings]]:
        return frozenset({(0, ())})

    def step(self, state, label: EdgeLabel, target: SystemState):
        rule = self.rule
        hit = None
        if any(i == self.k and rule.forbidden.match(label, dict(b)) is not None for i, b in state):
            hit = _Hit()
        nxt: Set[Tuple[int, FrozenBindings]] = set()
        for i, bindings in state:
            if (i == self.k and self.k > 0 and rule.unless is not None
                    and rule.unless.match(label, dict(bindings)) is not None):
                continue
            nxt.add((i, bindings))
            if i < self.k:
                matched = rule.antecedents[i].match(label, dict(bindings))
                if matched is not None:
                    nxt.add((i + 1, freeze(matched)))
        return frozenset(nxt), hit


def _compatible(guard: FrozenBindings, bindings: Dict[str, Any]) -> bool:
    return all(bindings.get(name, value) == value for name, value in guard)


class _PrecedenceAutomaton:
    """State: bindings of every guard occurrence seen so far"""

    def __init__(self, rule: Precedence):
        self.rule = rule

    def start(self) -> FrozenSet[FrozenBindings]:
        return frozenset()

    def step(self, state, label: EdgeLabel, target: SystemState):
        hit = None
        matched = self.rule.target.match(label)
        if matched is not None and not any(_compatible(g, matched) for g in state):
            hit = _Hit()
        guard = self.rule.guard.match(label)
        if guard is not None:
            state = state | {freeze(guard)}
        return state, hit


class _StrikesAutomaton:
    """State: consecutive denial count per (user, account), capped at the threshold"""

    def __init__(self, rule: ThreeStrikes):
        self.rule = rule

    def start(self) -> FrozenSet[Tuple[Tuple[str, Optional[int]], int]]:
        return frozenset()

    def step(self, state, label: EdgeLabel, target: SystemState):
        if label.action != self.rule.action:
            return state, None
        key = (label.user, label.account)
        counts = dict(state)
        count = counts.pop(key, 0)
        hit = None
        if label.decision == Decision.DENIED:
            counts[key] = min(count + 1, self.rule.threshold)
        elif label.decision == Decision.AUTHORIZED:
            if count >= self.rule.threshold:
                hit = _Hit()
        else:
            counts[key] = count
        return frozenset(counts.items()), hit


class _AccumulationAutomaton:
    """State: (open forms keyed by (user, account, link), sorted authorized pairs)"""

    def __init__(self, rule: Accumulation):
        self.rule = rule

    def start(self):
        return frozenset(), ()

    def registry(self, state: SystemState, account: int) -> Set[Any]:
        params = state.params_of(account, self.rule.registry_task)
        value = params.get(self.rule.registry_key) if params is not None else None
        if value is None or not isinstance(value.value, frozenset):
            return set()
        return set(value.value)

    def passes(self, dest: Any, registry: Set[Any]) -> bool:
        return (dest in registry) == self.rule.registered

    def summable(self, dest: Any, registry: Set[Any]) -> bool:
        return not self.rule.sum_filtered or self.passes(dest, registry)

    def step(self, state, label: EdgeLabel, target: SystemState):
        rule = self.rule
        open_forms, pairs = state
        if rule.forms.match(label) is not None:
            link = label_param(label, rule.link_key)
            forms = dict(open_forms)
            forms[(label.user, label.account, link)] = (
                label_param(label, rule.dest_key), label_param(label, rule.value_key)
            )
            return (frozenset(forms.items()), pairs), None
        if rule.auth.match(label) is None:
            return state, None
        key = (label.user, label.account, label_param(label, rule.link_key))
        forms = dict(open_forms)
        if key not in forms:
            return state, None
        dest, value = forms.pop(key)
        if not isinstance(value, int):
            return (frozenset(forms.items()), pairs), None
        registry = self.registry(target, label.account)
        hit = None
        if self.passes(dest, registry):
            total = value + sum(
                v for u, b, d, v in pairs
                if (u, b) == (label.user, label.account) and self.summable(d, registry)
            )
            hit = _Hit(total)
        pairs = tuple(sorted(pairs + ((label.user, label.account, dest, value),), key=repr))
        return (frozenset(forms.items()), pairs), hit


def _automaton(rule: Rule):
    if isinstance(rule, Response):
        return _ResponseAutomaton(rule)
    if isinstance(rule, Precedence):
        return _PrecedenceAutomaton(rule)
    if isinstance(rule, ThreeStrikes):
        return _StrikesAutomaton(rule)
    if isinstance(rule, Accumulation):
        return _AccumulationAutomaton(rule)
    raise TypeError(f"unsupported rule {type(rule).__name__}")


def _may_trigger(rule: Rule, label: EdgeLabel) -> bool:
    """Cheap filter for edges that could complete a violation"""
    if isinstance(rule, Response):
        pattern: EventPattern = rule.forbidden
    elif isinstance(rule, Precedence):
        pattern = rule.target
    elif isinstance(rule, ThreeStrikes):
        return label.action == rule.action and label.decision == Decision.AUTHORIZED
    else:
        pattern = rule.auth
    return label.action == pattern.action and label.decision == pattern.decision


# search strategies

class _HitLog:
    """Best hit per insecure node; first found, or largest amount when keep_max"""

    def __init__(self, keep_max: bool):
        self.keep_max = keep_max
        self.best: Dict[int, Tuple[Optional[int], Tuple[Edge, ...]]] = {}

    def record(self, node: int, hit: _Hit, witness_fn):
        current = self.best.get(node)
        if current is None:
            self.best[node] = (hit.amount, witness_fn())
        elif self.keep_max and hit.amount is not None and (
                current[0] is None or hit.amount > current[0]):
            self.best[node] = (hit.amount, witness_fn())


def _propagate_dag(g: StateGraph, automaton, log: _HitLog, budget: int):
    start = (g.root, automaton.start())
    ids: Dict[Tuple[int, Hashable], int] = {start: 0}
    entries: List[Tuple[int, Hashable]] = [start]
    parents: List[Optional[Tuple[int, int]]] = [None]

    def witness(pid: int, last: Edge) -> Tuple[Edge, ...]:
        edges = [last]
        link = parents[pid]
        while link is not None:
            pid, edge_index = link
            edges.append(g.edges[edge_index])
            link = parents[pid]
        return tuple(reversed(edges))

    queue = deque([0])
    while queue:
        pid = queue.popleft()
        node, astate = entries[pid]
        for edge_index in g.out_edges[node]:
            edge = g.edges[edge_index]
            nxt, hit = automaton.step(astate, edge.label, g.states[edge.target])
            if hit is not None:
                log.record(edge.target, hit, lambda p=pid, e=edge: witness(p, e))
            key = (edge.target, nxt)
            if key not in ids:
                if len(entries) >= budget:
                    raise PathBudgetExceededError(
                        f"rule automaton exceeds {budget} (node, state) pairs"
                    )
                ids[key] = len(entries)
                entries.append(key)
                parents.append((pid, edge_index))
                queue.append(ids[key])


def _walk_paths(g: StateGraph, rule: Rule, automaton, log: _HitLog, budget: int,
                skip: Set[int] = frozenset()):
    """Simple paths ending in each candidate edge, automaton replayed along each"""
    for edge in g.edges:
        if edge.target in skip or not _may_trigger(rule, edge.label):
            continue
        for prefix in acyclic_paths_to_root(g, edge.source, budget):
            visited = {g.root} | {e.target for e in prefix}
            if edge.target in visited:
                continue
            path = tuple(prefix) + (edge,)
            astate = automaton.start()
            hit = None
            for e in path:
                astate, hit = automaton.step(astate, e.label, g.states[e.target])
            if hit is not None:
                log.record(edge.target, hit, lambda p=path: p)


def _shortest_witness(g: StateGraph, edge: Edge) -> Tuple[Edge, ...]:
    parent: Dict[int, Optional[Edge]] = {g.root: None}
    queue = deque([g.root])
    while queue and edge.source not in parent:
        node = queue.popleft()
        for out in g.outgoing(node):
            if out.target not in parent:
                parent[out.target] = out
                queue.append(out.target)
    edges = [edge]
    node = edge.source
    while parent.get(node) is not None:
        edges.append(parent[node])
        node = parent[node].source
    return tuple(reversed(edges))


def _search(g: StateGraph, rule: Rule, log: _HitLog, path_budget: int,
            skip: Set[int] = frozenset()):
    automaton = _automaton(rule)
    if g.is_acyclic():
        _propagate_dag(g, automaton, log, DEFAULT_NODE_BUDGET)
    else:
        _walk_paths(g, rule, automaton, log, path_budget, skip)


# public queries

def check_accumulation(g: StateGraph, rule: Accumulation, rule_id: str = '',
                       budget: int = DEFAULT_PATH_BUDGET) -> List[Violation]:
    """Insecure nodes where the accumulated value of linked pairs exceeds the limit.

    An authorized auth edge into a node on a cycle is insecure whatever the sum.
    """
    violations: List[Violation] = []
    cyclic = nodes_on_cycles(g)
    flagged: Set[int] = set()
    for edge in g.edges:
        if edge.target in cyclic and edge.target not in flagged and rule.auth.match(edge.label) is not None:
            flagged.add(edge.target)
            violations.append(Violation(edge.target, rule_id, _shortest_witness(g, edge)))

    log = _HitLog(keep_max=True)
    _search(g, rule, log, budget, flagged)
    for node, (amount, witness) in log.best.items():
        if node in flagged or amount is None:
            continue
        if amount > rule.limit:
            violations.append(Violation(node, rule_id, witness, amount))
    return sorted(violations, key=lambda v: v.insecure_state)


def check_rule(g: StateGraph, rule: Rule, rule_id: str = '',
               budget: int = DEFAULT_PATH_BUDGET) -> List[Violation]:
    """One Violation per insecure node, each with a witness path from the root"""
    if isinstance(rule, Accumulation):
        return check_accumulation(g, rule, rule_id, budget)
    log = _HitLog(keep_max=False)
    _search(g, rule, log, budget)
    return sorted(
        (Violation(node, rule_id, witness) for node, (_, witness) in log.best.items()),
        key=lambda v: v.insecure_state
    )


def run_rule(g: StateGraph, spec: RuleSpec, budget: int = DEFAULT_PATH_BUDGET) -> RuleResult:
    """check_rule with budget overruns and truncated graphs reported as partial"""
    result = RuleResult(spec.rule_id, spec.text, partial=not g.complete)
    try:
        result.violations = check_rule(g, spec.rule, spec.rule_id, budget)
    except PathBudgetExceededError as e:
        logger.warning(f"Rule {spec.rule_id}: {e}")
        result.partial = True
    logger.info(f"Rule {spec.rule_id}: {result.status} ({len(result.violations)} violations)")
    return result


def check_rules(g: StateGraph, specs: Sequence[RuleSpec],
                budget: int = DEFAULT_PATH_BUDGET) -> List[RuleResult]:
    return [run_rule(g, spec, budget) for spec in specs]


def replay_witness(policy: PolicySpec, root_state: SystemState, witness: Sequence[Edge]) -> bool:
    """Re-deliver every request of the witness; true when every decision is reproduced"""
    state = root_state
    for edge in witness:
        state, response = step(state, edge.label.request, policy)
        if response.decision != edge.label.decision:
            logger.warning(
                f"Replay diverged at edge {edge.index}: expected {edge.label.decision.value}, "
                f"got {response.decision.value}"
            )
            return False
    return True
