"""Reachability graph and the queries the rule checker runs over it"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple

from src.model.codec import state_digest
from src.model.params import EMPTY_PARAMS, ParamSet
from src.model.state import Decision, RequestMsg, SystemState
from src.utils.errors import PathBudgetExceededError, UnknownNodeError
from src.config.settings import DEFAULT_PATH_BUDGET


@dataclass(frozen=True)
class EdgeLabel:
    """Who sent what, the decision, and the (user, account, session) it acted for"""
    client: str
    request: RequestMsg
    decision: Decision
    user: str
    account: Optional[int]
    session: Optional[int] = None
    payload: ParamSet = EMPTY_PARAMS

    @property
    def action(self) -> str:
        return self.request.action


@dataclass(frozen=True)
class Edge:
    index: int
    source: int
    target: int
    label: EdgeLabel


class StateGraph:
    """Nodes deduplicated by canonical state digest, numbered in discovery order"""

    def __init__(self):
        self.states: List[SystemState] = []
        self.edges: List[Edge] = []
        self.out_edges: List[List[int]] = []
        self.in_edges: List[List[int]] = []
        self._ids: Dict[str, int] = {}
        self.root = 0
        self.complete = True

    @property
    def node_count(self) -> int:
        return len(self.states)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def nodes(self) -> range:
        return range(len(self.states))

    def state(self, node: int) -> SystemState:
        self.require(node)
        return self.states[node]

    def require(self, node: int):
        if not isinstance(node, int) or node < 0 or node >= len(self.states):
            raise UnknownNodeError(f"node {node} is not in the graph")

    def find(self, state: SystemState) -> Optional[int]:
        return self._ids.get(state_digest(state))

    def add_node(self, state: SystemState) -> Tuple[int, bool]:
        """(node id, whether it was new)"""
        digest = state_digest(state)
        existing = self._ids.get(digest)
        if existing is not None:
            return existing, False
        node = len(self.states)
        self._ids[digest] = node
        self.states.append(state)
        self.out_edges.append([])
        self.in_edges.append([])
        return node, True

    def add_edge(self, source: int, target: int, label: EdgeLabel) -> Edge:
        edge = Edge(len(self.edges), source, target, label)
        self.edges.append(edge)
        self.out_edges[source].append(edge.index)
        self.in_edges[target].append(edge.index)
        return edge

    def outgoing(self, node: int) -> List[Edge]:
        self.require(node)
        return [self.edges[i] for i in self.out_edges[node]]

    def incoming(self, node: int) -> List[Edge]:
        self.require(node)
        return [self.edges[i] for i in self.in_edges[node]]

    def successors(self, node: int) -> List[int]:
        return [self.edges[i].target for i in self.out_edges[node]]

    def is_acyclic(self) -> bool:
        return not cyclic_components(self)


def filter_nodes(g: StateGraph, pred: Callable[[int], bool]) -> List[int]:
    """All nodes satisfying pred, in id order"""
    return [node for node in g.nodes() if pred(node)]


def authorized_into(g: StateGraph, action: str) -> Callable[[int], bool]:
    """Predicate: some edge into the node authorized `action`"""
    def pred(node: int) -> bool:
        return any(
            e.label.action == action and e.label.decision == Decision.AUTHORIZED
            for e in g.incoming(node)
        )
    return pred


def sccs(g: StateGraph) -> List[List[int]]:
    """Maximal strongly connected components, iterative Tarjan.

    Components come out in reverse topological order; nodes inside a component are sorted.
    """
    index_of: Dict[int, int] = {}
    lowlink: Dict[int, int] = {}
    on_stack: Set[int] = set()
    stack: List[int] = []
    result: List[List[int]] = []
    counter = 0

    for start in g.nodes():
        if start in index_of:
            continue
        work: List[Tuple[int, int]] = [(start, 0)]
        while work:
            node, child = work.pop()
            if child == 0:
                index_of[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            successors = g.successors(node)
            recurse = False
            for i in range(child, len(successors)):
                succ = successors[i]
                if succ not in index_of:
                    work.append((node, i + 1))
                    work.append((succ, 0))
                    recurse = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index_of[succ])
            if recurse:
                continue
            if lowlink[node] == index_of[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                result.append(sorted(component))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return result


def cyclic_components(g: StateGraph) -> List[List[int]]:
    """Components that contain a cycle: size above one, or a self-loop"""
    cyclic = []
    for component in sccs(g):
        if len(component) > 1:
            cyclic.append(component)
        elif component[0] in g.successors(component[0]):
            cyclic.append(component)
    return sorted(cyclic)


def nodes_on_cycles(g: StateGraph) -> Set[int]:
    return {node for component in cyclic_components(g) for node in component}


def predecessors(g: StateGraph, n: int) -> List[int]:
    """Distinct sources of the in-edges of n, sorted"""
    return sorted({e.source for e in g.incoming(n)})


def acyclic_paths_to_root(g: StateGraph, n: int,
                          budget: int = DEFAULT_PATH_BUDGET) -> Iterator[List[Edge]]:
    """Every simple path root -> n, as edge lists; deterministic order"""
    g.require(n)
    if n == g.root:
        yield []
        return
    emitted = 0
    # backward depth-first search; each frame is (node, in-edge cursor)
    path: List[Edge] = []
    visited: Set[int] = {n}
    frames: List[Tuple[int, int]] = [(n, 0)]
    while frames:
        node, cursor = frames[-1]
        incoming = g.in_edges[node]
        if cursor >= len(incoming):
            frames.pop()
            visited.discard(node)
            if path:
                path.pop()
            continue
        frames[-1] = (node, cursor + 1)
        edge = g.edges[incoming[cursor]]
        if edge.source in visited:
            continue
        if edge.source == g.root:
            emitted += 1
            if emitted > budget:
                raise PathBudgetExceededError(f"more than {budget} paths lead to node {n}")
            yield list(reversed(path + [edge]))
            continue
        path.append(edge)
        visited.add(edge.source)
        frames.append((edge.source, 0))


def count_paths(g: StateGraph, n: int, budget: int = DEFAULT_PATH_BUDGET) -> int:
    return sum(1 for _ in acyclic_paths_to_root(g, n, budget))


def terminal_nodes(g: StateGraph) -> List[int]:
    return [node for node in g.nodes() if not g.out_edges[node]]
