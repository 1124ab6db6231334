import pytest

from src.fixtures.bank import (
    MUTATIONS, TABLE2_ROWS, expected_report, load_bank_scenario, mutate_policy,
    mutation_workloads, table2_workloads
)
from src.policy.parser import parse_policy
from src.policy.printer import print_policy
from src.rules.checker import check_rules
from src.statespace.explorer import explore
from src.utils.errors import UnknownMutationError

# rows whose graphs run into thousands of nodes
LARGE_ROWS = ('misc', 'helper_same_acc', 'master_other_acc')


def _verdicts(graph, specs):
    return {r.rule_id: bool(r.violations) for r in check_rules(graph, specs)}


@pytest.fixture(scope="module")
def workloads():
    return table2_workloads()


@pytest.fixture(scope="module")
def expected():
    return expected_report()


class TestScenario:
    def test_load(self):
        scenario = load_bank_scenario()
        assert scenario.policy.action_names[0] == 'idtf'
        assert [r.rule_id for r in scenario.rules] == [
            'rule1', 'rule2', 'rule3', 'rule3p', 'rule4', 'rule4p', 'rule5', 'rule6', 'rule7', 'rule8'
        ]
        assert tuple(scenario.workloads) == TABLE2_ROWS
        assert set(scenario.expected['table2']) == set(TABLE2_ROWS)

    @pytest.mark.parametrize("row, count", [
        ('base', 7),
        ('wrong_login_password', 7),
        ('wrong_eft_password', 7),
        ('helper', 7),
        ('eft_500', 7),
        ('plus_auth_other_tid', 8),
        ('combined', 8),
        ('misc', 14),
        ('helper_same_acc', 14),
        ('master_other_acc', 14),
    ])
    def test_request_counts(self, workloads, row, count):
        assert workloads[row].request_count == count

    def test_two_client_rows(self, workloads):
        assert len(workloads['helper_same_acc'].clients) == 2
        assert len(workloads['master_other_acc'].clients) == 2


class TestMutations:
    def test_catalog_matches_expected(self, expected):
        assert set(MUTATIONS) == set(expected['mutations'])
        for mutation_id, mutation in MUTATIONS.items():
            assert list(mutation.targets) == expected['mutations'][mutation_id]['targets']

    def test_unknown_mutation(self, bank_policy):
        with pytest.raises(UnknownMutationError):
            mutate_policy(bank_policy, 'drop-everything')

    def test_mutant_differs_only_in_target(self, bank_policy):
        mutant = mutate_policy(bank_policy, 'drop-login-guard')
        assert mutant.action('balance').required_clearance == -1
        assert mutant.action('transf_auth') == bank_policy.action('transf_auth')
        assert parse_policy(print_policy(mutant)) == mutant

    def test_mutation_leaves_original(self, bank_policy):
        before = print_policy(bank_policy)
        mutate_policy(bank_policy, 'drop-limit-6')
        assert print_policy(bank_policy) == before

    @pytest.mark.parametrize("mutation_id", sorted(MUTATIONS))
    def test_kill_matrix(self, bank_policy, bank_rule_specs, expected, mutation_id):
        """Baseline obeys every rule; the mutant breaks exactly its target"""
        workload = mutation_workloads()[mutation_id]
        specs = list(bank_rule_specs.values())
        entry = expected['mutations'][mutation_id]
        baseline = explore(bank_policy, None, workload)
        assert _verdicts(baseline, specs) == entry['baseline']
        mutant = explore(mutate_policy(bank_policy, mutation_id), None, workload)
        assert _verdicts(mutant, specs) == entry['mutant']


class TestTable2:
    @pytest.mark.parametrize("row", [r for r in TABLE2_ROWS if r not in LARGE_ROWS])
    def test_rows_are_clean(self, bank_policy, bank_rule_specs, workloads, expected, row):
        graph = explore(bank_policy, None, workloads[row])
        assert graph.complete
        assert _verdicts(graph, list(bank_rule_specs.values())) == expected['table2'][row]

    @pytest.mark.slow
    @pytest.mark.parametrize("row", LARGE_ROWS)
    def test_large_rows_are_clean(self, bank_policy, bank_rule_specs, workloads, expected, row):
        graph = explore(bank_policy, None, workloads[row])
        assert _verdicts(graph, list(bank_rule_specs.values())) == expected['table2'][row]

    def test_failed_login_shrinks_graph(self, bank_policy, workloads):
        base = explore(bank_policy, None, workloads['base'])
        wrong = explore(bank_policy, None, workloads['wrong_login_password'])
        assert wrong.node_count < base.node_count

    @pytest.mark.slow
    def test_separate_accounts_interleave_more(self, bank_policy, workloads):
        same = explore(bank_policy, None, workloads['helper_same_acc'])
        other = explore(bank_policy, None, workloads['master_other_acc'])
        assert other.node_count > same.node_count
