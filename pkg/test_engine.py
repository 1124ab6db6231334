import random

import pytest

from src.engine.engine import (
    SessionStatus, apply_variant, authorize, check_clearance, resolve_session, run_sequence,
    session_binding, step
)
from src.model.params import ParamSet
from src.model.state import ClientQueue, Decision, RequestMsg
from src.policy.parser import parse_policy
from src.statespace.workload import Workload, initial_state


def _run(policy, state, requests):
    responses = []
    for r in requests:
        state, response = step(state, r, policy)
        responses.append(response)
    return state, responses


@pytest.fixture
def root(bank_policy):
    return initial_state(bank_policy, Workload('empty'))


@pytest.fixture
def logged_in(bank_policy, root, make_request):
    """master on account 1, session 1, authenticated"""
    state, responses = _run(bank_policy, root, [
        make_request('idtf', acc=1),
        make_request('auth', sess=1, **{'pass': 'm1-secret'}),
    ])
    assert [r.decision for r in responses] == [Decision.AUTHORIZED, Decision.AUTHORIZED]
    return state


def _transfer(make_request, tid, dest, val, user='master', token='m1-token'):
    return [
        make_request('transf_home', user=user, sess=1),
        make_request('transf_forms', user=user, sess=1, tid=tid, dest=dest, val=val),
        make_request('transf_auth', user=user, sess=1, tid=tid, **{'pass': token}),
    ]


class TestSessions:
    def test_identification_opens_session(self, bank_policy, root, make_request):
        state, response = step(root, make_request('idtf', acc=1), bank_policy)
        assert response.decision == Decision.AUTHORIZED
        assert response.payload.get('sess').value == 1
        session = state.session(1)
        assert (session.user, session.account) == ('master', 1)
        assert session.params.get('uid').value == 'master'
        assert state.clearance('master', 1, 'eft') == -1

    def test_unknown_session_is_invalid(self, bank_policy, root, make_request):
        request = make_request('balance', sess=9)
        assert resolve_session(root, request).status == SessionStatus.INVALID
        state, response = step(root, request, bank_policy)
        assert response.decision == Decision.INVALID_SESSION
        assert state == root

    def test_no_account_is_denied(self, bank_policy, root, make_request):
        request = make_request('balance')
        binding = session_binding(request, resolve_session(root, request))
        assert binding.account is None
        assert step(root, request, bank_policy)[1].decision == Decision.DENIED

    def test_undeclared_account_changes_nothing(self, bank_policy, root, make_request):
        state, response = step(root, make_request('idtf', acc=3), bank_policy)
        assert response.decision == Decision.DENIED
        assert state == root

    def test_logout_closes_and_id_is_reused(self, bank_policy, logged_in, make_request):
        state, responses = _run(bank_policy, logged_in, [
            make_request('logout', sess=1),
            make_request('idtf', acc=1),
        ])
        assert [r.decision for r in responses] == [Decision.AUTHORIZED, Decision.AUTHORIZED]
        assert responses[1].payload.get('sess').value == 1
        assert state.params_of(1, 'login').get('logged_master').value == 0

    def test_step_leaves_queues_alone(self, bank_policy, make_request):
        state = initial_state(bank_policy, Workload('empty')).with_queue('c1', ClientQueue((0, 1)))
        after, _ = step(state, make_request('idtf', acc=1), bank_policy)
        assert after.queue('c1') == ClientQueue((0, 1))


class TestLogin:
    """Clearances granted at login and the failed-login counter"""

    @pytest.mark.parametrize("user, password, eft_level", [
        ('master', 'm1-secret', 2),
        ('helper', 'h1-secret', 1),
    ])
    def test_login_clearances(self, bank_policy, root, make_request, user, password, eft_level):
        state, responses = _run(bank_policy, root, [
            make_request('idtf', user=user, acc=1),
            make_request('auth', user=user, sess=1, **{'pass': password}),
        ])
        assert responses[-1].decision == Decision.AUTHORIZED
        assert state.clearance(user, 1, 'eft') == eft_level
        assert state.clearance(user, 1, 'balance') == 1
        assert state.clearance(user, 2, 'eft') == 0

    def test_login_twice_is_denied(self, bank_policy, logged_in, make_request):
        _, response = step(logged_in, make_request('auth', sess=1, **{'pass': 'm1-secret'}), bank_policy)
        assert response.decision == Decision.DENIED

    @pytest.mark.parametrize("failures, expected", [
        (0, Decision.AUTHORIZED),
        (2, Decision.AUTHORIZED),
        (3, Decision.DENIED),
        (4, Decision.DENIED),
    ])
    def test_three_strikes(self, bank_policy, root, make_request, failures, expected):
        requests = [make_request('idtf', acc=1)]
        requests += [make_request('auth', sess=1, **{'pass': 'wrong'}) for _ in range(failures)]
        requests.append(make_request('auth', sess=1, **{'pass': 'm1-secret'}))
        _, responses = _run(bank_policy, root, requests)
        assert responses[-1].decision == expected

    def test_wrong_password_counted(self, bank_policy, root, make_request):
        state, responses = _run(bank_policy, root, [
            make_request('idtf', acc=1),
            make_request('auth', sess=1, **{'pass': 'm2-secret'}),
        ])
        assert responses[-1].decision == Decision.DENIED
        assert state.params_of(1, 'login').get('failcount_master').value == 1
        assert state.params_of(2, 'login').get('failcount_master') is None

    def test_failures_are_per_user(self, bank_policy, root, make_request):
        requests = [make_request('idtf', acc=1), make_request('idtf', user='helper', acc=1)]
        requests += [make_request('auth', sess=1, **{'pass': 'wrong'}) for _ in range(3)]
        requests.append(make_request('auth', user='helper', sess=2, **{'pass': 'h1-secret'}))
        _, responses = _run(bank_policy, root, requests)
        assert responses[-1].decision == Decision.AUTHORIZED


class TestDecision:
    """Clearance check alone, then clearance and constraint together"""

    def test_balance_before_login(self, bank_policy, root, make_request):
        state, _ = step(root, make_request('idtf', acc=1), bank_policy)
        request = make_request('balance', sess=1)
        binding = session_binding(request, resolve_session(state, request))
        assert not check_clearance(state, request, binding, bank_policy)
        assert authorize(state, request, binding, bank_policy) == Decision.DENIED

    @pytest.mark.parametrize("user", ['master', 'helper'])
    def test_session_acts_for_its_owner(self, bank_policy, logged_in, make_request, user):
        request = make_request('balance', user=user, sess=1)
        binding = session_binding(request, resolve_session(logged_in, request))
        assert (binding.user, binding.account, binding.session_id) == ('master', 1, 1)
        assert check_clearance(logged_in, request, binding, bank_policy)
        assert authorize(logged_in, request, binding, bank_policy) == Decision.AUTHORIZED


class TestTransfers:
    def test_transfer_within_limit(self, bank_policy, logged_in, make_request):
        state, responses = _run(bank_policy, logged_in, _transfer(make_request, 1, 5, 25000))
        assert [r.decision for r in responses] == [Decision.AUTHORIZED] * 3
        eft = state.params_of(1, 'eft')
        assert eft.get('spentUnreg').value == 25000
        assert eft.get('spentReg').value == 0
        assert eft.get('pending').value == frozenset()

    def test_accumulated_unregistered_limit(self, bank_policy, logged_in, make_request):
        requests = _transfer(make_request, 1, 5, 30000) + _transfer(make_request, 2, 5, 25000)
        state, responses = _run(bank_policy, logged_in, requests)
        assert responses[2].decision == Decision.AUTHORIZED
        assert responses[5].decision == Decision.DENIED
        assert state.params_of(1, 'eft').get('pending').value == frozenset({2})

    @pytest.mark.parametrize("second, expected", [
        (50000, Decision.AUTHORIZED),
        (50001, Decision.DENIED),
    ])
    def test_registered_limit_boundary(self, bank_policy, logged_in, make_request, second, expected):
        requests = _transfer(make_request, 1, 7, 100000) + _transfer(make_request, 2, 9, second)
        _, responses = _run(bank_policy, logged_in, requests)
        assert responses[-1].decision == expected

    def test_forms_needs_home(self, bank_policy, logged_in, make_request):
        request = make_request('transf_forms', sess=1, tid=1, dest=5, val=10)
        assert step(logged_in, request, bank_policy)[1].decision == Decision.DENIED

    def test_wrong_token_denied(self, bank_policy, logged_in, make_request):
        _, responses = _run(bank_policy, logged_in, _transfer(make_request, 1, 5, 100, token='h1-token'))
        assert responses[-1].decision == Decision.DENIED

    def test_helper_cannot_approve(self, bank_policy, root, make_request):
        state, _ = _run(bank_policy, root, [
            make_request('idtf', user='helper', acc=1),
            make_request('auth', user='helper', sess=1, **{'pass': 'h1-secret'}),
        ])
        _, responses = _run(bank_policy, state,
                            _transfer(make_request, 1, 5, 100, user='helper', token='h1-token'))
        assert [r.decision for r in responses] == [
            Decision.AUTHORIZED, Decision.AUTHORIZED, Decision.DENIED
        ]


class TestVariants:
    def test_apply_denied_variant(self, bank_policy, root, make_request):
        state, _ = step(root, make_request('idtf', acc=1), bank_policy)
        request = make_request('auth', sess=1, **{'pass': 'm1-secret'})
        after = apply_variant(state, request, bank_policy, authorized=False)
        assert after.params_of(1, 'login').get('failcount_master').value == 1
        assert after.clearance('master', 1, 'eft') == -1

    def test_apply_variant_invalid_session(self, bank_policy, root, make_request):
        assert apply_variant(root, make_request('logout', sess=5), bank_policy, True) == root

    def test_run_sequence(self, bank_policy, root, make_request):
        responses = run_sequence(root, [
            make_request('balance', sess=1),
            make_request('idtf', acc=2),
            make_request('auth', sess=1, **{'pass': 'm2-secret'}),
            make_request('balance', sess=1),
        ], bank_policy)
        assert [r.decision for r in responses] == [
            Decision.INVALID_SESSION, Decision.AUTHORIZED, Decision.AUTHORIZED, Decision.AUTHORIZED
        ]


def _random_request(rng, state, policy):
    user = rng.choice(policy.users + ('intruder',))
    action = rng.choice(policy.action_names)
    params = {}
    open_ids = [s.id for s in state.open_sessions]
    if open_ids and rng.random() < 0.8:
        params['sess'] = rng.choice(open_ids + [99])
    else:
        params['acc'] = rng.choice([1, 2, 3])
    params['pass'] = rng.choice(['m1-secret', 'h2-secret', 'm2-token', 'm1-token', 'x'])
    params['tid'] = rng.choice([1, 2])
    params['dest'] = rng.choice([5, 7])
    params['val'] = rng.choice([100, 40000, 120000])
    return RequestMsg('c1', user, action, ParamSet.from_mapping(params))


def _assert_local_step(policy, state, request):
    binding = session_binding(request, resolve_session(state, request))
    after, _ = step(state, request, policy)
    for account in policy.accounts:
        if account == binding.account:
            continue
        for task in policy.tasks:
            assert after.params_of(account, task) == state.params_of(account, task)
    for (user, account, task), level in state.clearances:
        if (user, account) != (binding.user, binding.account):
            assert after.clearance(user, account, task) == level
    return after


@pytest.mark.slow
def test_step_only_touches_the_bound_pair(bank_policy):
    """Random walks: other accounts' parameters and other pairs' clearances never change"""
    rng = random.Random(20240611)
    root = initial_state(bank_policy, Workload('empty'))
    state = root
    for index in range(10_000):
        if index % 60 == 0:
            state = root
        request = _random_request(rng, state, bank_policy)
        state = _assert_local_step(bank_policy, state, request)


TASKS = ('t0', 't1', 't2')
SLOTS = ('account_update', 'clearance_update', 'session_update')


def _random_block(rng, slot):
    statements = []
    for _ in range(rng.randint(1, 3)):
        task = rng.choice(TASKS)
        key = f'"k{rng.randint(0, 2)}"'
        if slot == 'account_update':
            statements.append(f'set task {task}[{key}] = task({key}, 0) + req("x", 0)')
        elif slot == 'clearance_update':
            statements.append(f'set clearance {task} = req("x", 0) - {rng.randint(0, 1)}')
        else:
            statements.append(rng.choice([
                'open_session(user(), account())',
                'close_session',
                f'set sess[{key}] = req("x", 0)',
            ]))
    return f'{slot} {{ ' + ' '.join(statements) + ' }'


def _random_policy(rng):
    lines = [f'task {task}' for task in TASKS]
    lines += ['users u v', 'accounts 1 2', 'default_clearance 0']
    for index in range(4):
        lines.append(f'action a{index} task {rng.choice(TASKS)} clearance {rng.randint(0, 1)} {{')
        if rng.random() < 0.5:
            lines.append(f'constraint req("x", 0) >= {rng.randint(0, 2)}')
        for variant in ('on_authorized', 'on_denied'):
            slots = [s for s in SLOTS if rng.random() < 0.6]
            if slots:
                lines.append(f'{variant} {{ ' + ' '.join(_random_block(rng, s) for s in slots) + ' }')
        lines.append('}')
    return parse_policy('\n'.join(lines) + '\n')


@pytest.mark.slow
def test_random_policies_only_touch_the_bound_pair():
    """Locality holds for generated policies, not only the bank"""
    rng = random.Random(4099)
    for _ in range(40):
        policy = _random_policy(rng)
        state = initial_state(policy, Workload('empty'))
        for _ in range(250):
            params = {'x': rng.randint(0, 2)}
            open_ids = [s.id for s in state.open_sessions]
            if open_ids and rng.random() < 0.7:
                params['sess'] = rng.choice(open_ids + [99])
            else:
                params['acc'] = rng.choice(policy.accounts)
            request = RequestMsg('c1', rng.choice(policy.users), rng.choice(policy.action_names),
                                 ParamSet.from_mapping(params))
            state = _assert_local_step(policy, state, request)
