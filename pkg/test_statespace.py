import itertools
import math

import pytest

from src.config.settings import TABLE2_DIR
from src.model.state import ClientQueue, Decision
from src.statespace.dot_export import to_dot, write_dot
from src.statespace.explorer import explore, successors
from src.statespace.graph import (
    acyclic_paths_to_root, authorized_into, count_paths, cyclic_components, filter_nodes,
    nodes_on_cycles, predecessors, sccs, terminal_nodes
)
from src.statespace.workload import (
    ClientSpec, QueueMode, RequestTemplate, Workload, initial_state, instantiate, load_workload,
    simulate_workload, workload_from_dict, workload_to_dict
)
from src.utils.errors import (
    BudgetExceededError, PathBudgetExceededError, UnknownNodeError, WorkloadFormatError
)

NOOP = {'action': 'noop', 'params': {'acc': '$acc'}}


def _noop_clients(k, mode='ordered', per_client=1):
    return {
        f'c{i}': {'user': f'u{i}', 'account': 1, 'mode': mode, 'requests': [NOOP] * per_client}
        for i in range(1, k + 1)
    }


def _brute_force_nodes(k):
    """Distinct sets of delivered clients over every delivery order"""
    seen = set()
    for order in itertools.permutations(range(k)):
        for cut in range(k + 1):
            seen.add(frozenset(order[:cut]))
    return len(seen)


class TestInterleavings:
    """Independent clients: one node per delivered subset, one path per order"""

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_clients_interleave(self, noop_policy, make_workload, k):
        graph = explore(noop_policy, None, make_workload(f'noop{k}', _noop_clients(k)))
        assert graph.node_count == _brute_force_nodes(k)
        [terminal] = terminal_nodes(graph)
        assert count_paths(graph, terminal) == math.factorial(k)
        assert graph.is_acyclic()

    def test_free_mode_orders(self, noop_policy, make_workload):
        clients = {'c1': {'user': 'u1', 'account': 1, 'mode': 'free', 'requests': [NOOP] * 3}}
        graph = explore(noop_policy, None, make_workload('free', clients))
        assert graph.node_count == 8
        [terminal] = terminal_nodes(graph)
        assert count_paths(graph, terminal) == 6

    def test_successor_order(self, noop_policy, make_workload):
        workload = make_workload('noop3', _noop_clients(3))
        root = initial_state(noop_policy, workload)
        order = [(s.client, s.template_index) for s in successors(noop_policy, workload, root)]
        assert order == [('c1', 0), ('c2', 0), ('c3', 0)]


class TestCycles:
    def test_cyclic_queue_closes(self, noop_policy, make_workload):
        clients = {'c1': {'user': 'u1', 'account': 1, 'mode': 'cyclic', 'requests': [NOOP, NOOP]}}
        graph = explore(noop_policy, None, make_workload('cyclic', clients))
        assert graph.node_count == 2
        assert cyclic_components(graph) == [[0, 1]]
        assert not graph.is_acyclic()
        assert nodes_on_cycles(graph) == {0, 1}

    def test_self_loop(self, noop_policy, make_workload):
        clients = {'c1': {'user': 'u1', 'account': 1, 'mode': 'cyclic', 'requests': [NOOP]}}
        graph = explore(noop_policy, None, make_workload('loop', clients))
        assert (graph.node_count, graph.edge_count) == (1, 1)
        assert cyclic_components(graph) == [[0]]

    def test_login_logout_cycle(self, bank_policy, make_workload):
        clients = {'c1': {'user': 'master', 'account': 1, 'mode': 'cyclic', 'requests': [
            {'action': 'idtf', 'params': {'acc': '$acc'}},
            {'action': 'auth', 'params': {'sess': '$sess', 'pass': 'm1-secret'}},
            {'action': 'logout', 'params': {'sess': '$sess'}},
        ]}}
        graph = explore(bank_policy, None, make_workload('relogin', clients))
        assert len(cyclic_components(graph)) == 1
        assert all(e.label.decision == Decision.AUTHORIZED for e in graph.edges)

    def test_components_partition_nodes(self, bank_policy, bank_graph):
        graph = bank_graph(load_workload(TABLE2_DIR / 'base.workload'))
        components = sccs(graph)
        assert sorted(n for c in components for n in c) == list(graph.nodes())


class TestExplore:
    def test_deterministic(self, bank_policy):
        workload = load_workload(TABLE2_DIR / 'helper.workload')
        first = explore(bank_policy, None, workload)
        second = explore(bank_policy, None, workload)
        assert to_dot(first) == to_dot(second)
        assert [s for s in first.states] == [s for s in second.states]

    def test_budget(self, noop_policy, make_workload):
        with pytest.raises(BudgetExceededError) as exc:
            explore(noop_policy, None, make_workload('noop3', _noop_clients(3)), budget=3)
        partial = exc.value.partial
        assert partial.node_count == 3
        assert not partial.complete

    def test_stop_on_deny_halts(self, bank_policy, make_workload):
        clients = {'c1': {'user': 'master', 'account': 1, 'requests': [
            {'action': 'balance', 'params': {'sess': '$sess'}},
            {'action': 'idtf', 'params': {'acc': '$acc'}},
        ]}}
        graph = explore(bank_policy, None, make_workload('halt', clients, stop_on_deny=True))
        assert graph.edge_count == 1
        assert graph.edges[0].label.decision == Decision.DENIED
        assert graph.state(1).queue('c1') == ClientQueue((), None, True)

    def test_unknown_action(self, noop_policy, make_workload):
        clients = {'c1': {'user': 'u1', 'account': 1, 'requests': [{'action': 'missing'}]}}
        with pytest.raises(WorkloadFormatError):
            explore(noop_policy, None, make_workload('bad', clients))

    def test_edge_labels_carry_binding(self, bank_policy, bank_graph):
        graph = bank_graph(load_workload(TABLE2_DIR / 'base.workload'))
        idtf = next(e for e in graph.edges if e.label.action == 'idtf')
        assert (idtf.label.user, idtf.label.account, idtf.label.session) == ('master', 1, None)
        assert idtf.label.payload.get('sess').value == 1
        auth = next(e for e in graph.edges
                    if e.label.action == 'auth' and e.label.decision == Decision.AUTHORIZED)
        assert auth.label.session == 1


class TestGraphQueries:
    def test_unknown_node(self, noop_policy, make_workload):
        graph = explore(noop_policy, None, make_workload('noop1', _noop_clients(1)))
        with pytest.raises(UnknownNodeError):
            graph.state(5)

    def test_path_budget(self, noop_policy, make_workload):
        graph = explore(noop_policy, None, make_workload('noop3', _noop_clients(3)))
        [terminal] = terminal_nodes(graph)
        with pytest.raises(PathBudgetExceededError):
            list(acyclic_paths_to_root(graph, terminal, budget=5))

    def test_paths_start_at_root(self, noop_policy, make_workload):
        graph = explore(noop_policy, None, make_workload('noop2', _noop_clients(2)))
        [terminal] = terminal_nodes(graph)
        paths = list(acyclic_paths_to_root(graph, terminal))
        assert len(paths) == 2
        for path in paths:
            assert path[0].source == graph.root
            assert path[-1].target == terminal
            assert all(a.target == b.source for a, b in zip(path, path[1:]))
        assert predecessors(graph, terminal) == sorted({p[-1].source for p in paths})

    def test_filter_nodes(self, bank_policy, bank_graph):
        graph = bank_graph(load_workload(TABLE2_DIR / 'base.workload'))
        logged = filter_nodes(graph, authorized_into(graph, 'auth'))
        assert logged
        assert logged == sorted(logged)
        for node in logged:
            assert graph.state(node).params_of(1, 'login').get('logged_master').value == 1
        assert filter_nodes(graph, lambda node: False) == []


class TestWorkload:
    def test_placeholders(self):
        client = ClientSpec('c1', 'master', 1)
        template = RequestTemplate.of('auth', {'sess': '$sess', 'acc': '$acc', 'who': '$user', 'tid': 3})
        fresh = instantiate(template, client, ClientQueue((0,)))
        assert 'sess' not in fresh.params
        assert fresh.params.to_dict() == {'acc': 1, 'who': 'master', 'tid': 3}
        learned = instantiate(template, client, ClientQueue((0,), session=4))
        assert learned.session_id == 4

    @pytest.mark.parametrize("data", [
        {'clients': {'c1': {'account': 1}}},
        {'clients': {'c1': {'user': 'u', 'mode': 'random'}}},
        {'clients': {'c1': {'user': 'u', 'account': 'one'}}},
        {'clients': {'c1': {'user': 'u', 'requests': [{'params': {}}]}}},
    ])
    def test_malformed(self, data):
        with pytest.raises(WorkloadFormatError):
            workload_from_dict(data, 'bad')

    def test_dict_form(self):
        workload = load_workload(TABLE2_DIR / 'plus_auth_other_tid.workload')
        assert workload_from_dict(workload_to_dict(workload)) == workload
        assert workload.client('c1').mode == QueueMode.FREE
        assert workload.request_count == 8

    def test_with_requests(self):
        workload = load_workload(TABLE2_DIR / 'base.workload')
        kept = workload.with_requests(lambda client, t: t.action != 'balance')
        assert kept.request_count == 6
        assert isinstance(kept, Workload)

    def test_simulate_base(self, bank_policy):
        transcript = simulate_workload(bank_policy, load_workload(TABLE2_DIR / 'base.workload'))
        assert [r.decision for _, r in transcript] == [Decision.AUTHORIZED] * 7
        final, _ = transcript[-1]
        assert final.open_sessions == ()


class TestDot:
    def test_dot_text(self, noop_policy, make_workload, tmp_path):
        graph = explore(noop_policy, None, make_workload('noop1', _noop_clients(1)))
        text = to_dot(graph, 'noop')
        assert text.startswith('digraph "noop" {')
        assert 'n0 -> n1 [label="c1/noop/A"];' in text
        path = write_dot(graph, tmp_path / 'out' / 'g.dot', 'noop')
        assert path.read_text(encoding='utf-8') == text
