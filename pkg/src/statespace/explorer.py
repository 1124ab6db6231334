"""Breadth-first exploration of every request interleaving of a workload"""

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

from src.config.settings import DEFAULT_NODE_BUDGET
from src.engine.engine import Binding, step_with_binding
from src.model.state import RequestMsg, ResponseMsg, SystemState
from src.policy.ast import PolicySpec
from src.statespace.graph import EdgeLabel, StateGraph
from src.statespace.workload import (
    Workload, advance_queue, eligible_positions, initial_state, instantiate, validate_workload
)
from src.utils.errors import BudgetExceededError
from src.utils.logger import get_logger

logger = get_logger('app')

PROGRESS_EVERY = 10_000


@dataclass(frozen=True)
class Successor:
    client: str
    template_index: int
    request: RequestMsg
    state: SystemState
    response: ResponseMsg
    binding: Binding

    def label(self) -> EdgeLabel:
        return EdgeLabel(
            client=self.client,
            request=self.request,
            decision=self.response.decision,
            user=self.binding.user,
            account=self.binding.account,
            session=self.binding.session_id,
            payload=self.response.payload
        )


def successors(policy: PolicySpec, workload: Workload, state: SystemState) -> Iterator[Successor]:
    """Every eligible delivery from state, in (client id, template index) order"""
    for client in workload.clients:
        queue = state.queue(client.client_id)
        if queue is None:
            continue
        options = sorted(
            (queue.pending[position], position)
            for position in eligible_positions(queue, client.mode)
        )
        for template_index, position in options:
            request = instantiate(client.requests[template_index], client, queue)
            after, response, binding = step_with_binding(state, request, policy)
            new_queue = advance_queue(queue, position, client.mode, response, workload.stop_on_deny)
            yield Successor(
                client=client.client_id,
                template_index=template_index,
                request=request,
                state=after.with_queue(client.client_id, new_queue),
                response=response,
                binding=binding
            )


def explore(policy: PolicySpec, initial: Optional[SystemState], workload: Workload,
            budget: int = DEFAULT_NODE_BUDGET) -> StateGraph:
    """Reachability graph of all interleavings; raises BudgetExceededError past `budget` nodes"""
    validate_workload(workload, policy)
    if initial is None:
        initial = initial_state(policy, workload)

    graph = StateGraph()
    root, _ = graph.add_node(initial)
    graph.root = root
    frontier = deque([root])

    logger.info(f"Exploring workload '{workload.name}' (budget {budget} nodes)")
    while frontier:
        node = frontier.popleft()
        for succ in successors(policy, workload, graph.states[node]):
            target = graph.find(succ.state)
            if target is None:
                if graph.node_count >= budget:
                    graph.complete = False
                    logger.warning(
                        f"Node budget {budget} exhausted on '{workload.name}' "
                        f"({graph.node_count} nodes, {graph.edge_count} edges)"
                    )
                    raise BudgetExceededError(
                        f"state space of '{workload.name}' exceeds {budget} nodes", partial=graph
                    )
                target, _ = graph.add_node(succ.state)
                frontier.append(target)
                if graph.node_count % PROGRESS_EVERY == 0:
                    logger.info(f"... {graph.node_count} nodes, {len(frontier)} in frontier")
            graph.add_edge(node, target, succ.label())

    logger.info(f"Explored '{workload.name}': {graph.node_count} nodes, {graph.edge_count} edges")
    return graph
