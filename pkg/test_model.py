import random

import pytest

from src.model.codec import canonical_bytes, state_digest, state_from_bytes
from src.model.params import ParamSet, ParamValue, ValueKind, param_get, param_merge
from src.model.state import ClientQueue, RequestMsg, SessionRec, SystemState
from src.utils.errors import ModelError, ParamTypeError


class TestParamValue:
    """Value variants and inference from plain Python values"""

    @pytest.mark.parametrize("raw, kind", [
        (5, ValueKind.INT),
        ("abc", ValueKind.TEXT),
        ({1, 2}, ValueKind.INT_SET),
        (["x", "y"], ValueKind.TEXT_SET),
    ])
    def test_from_python_infers_kind(self, raw, kind):
        assert ParamValue.from_python(raw).kind == kind

    @pytest.mark.parametrize("raw", [True, [], 1.5, [1, "a"]])
    def test_from_python_rejects(self, raw):
        with pytest.raises(ModelError):
            ParamValue.from_python(raw)

    def test_empty_set_needs_explicit_kind(self):
        assert ParamValue.from_python([], ValueKind.INT_SET) == ParamValue.of_int_set()

    def test_constructor_checks_variant(self):
        with pytest.raises(ModelError):
            ParamValue(ValueKind.INT, "7")

    def test_sets_serialize_sorted(self):
        assert ParamValue.of_int_set([9, 7]).to_json() == [7, 9]


class TestParamSet:
    def test_order_independent_equality(self):
        a = ParamSet.from_mapping({"b": 1, "a": "x"})
        b = ParamSet.from_mapping({"a": "x", "b": 1})
        assert a == b
        assert hash(a) == hash(b)
        assert a.keys() == ("a", "b")

    def test_with_value_leaves_original(self):
        p = ParamSet.from_mapping({"a": 1})
        q = p.with_value("a", ParamValue.of_int(2))
        assert p.get("a").value == 1
        assert q.get("a").value == 2

    def test_duplicate_keys_rejected(self):
        with pytest.raises(ModelError):
            ParamSet((("a", ParamValue.of_int(1)), ("a", ParamValue.of_int(2))))

    def test_param_get_default_and_type(self):
        p = ParamSet.from_mapping({"n": 3, "t": "x"})
        assert param_get(p, "n", ParamValue.of_int(0)).value == 3
        assert param_get(p, "missing", ParamValue.of_int(42)).value == 42
        with pytest.raises(ParamTypeError):
            param_get(p, "t", ParamValue.of_int(0))

    def test_param_merge_is_associative(self):
        rng = random.Random(7)
        for _ in range(300):
            a, b, c = (_random_params(rng) for _ in range(3))
            assert param_merge(param_merge(a, b), c) == param_merge(a, param_merge(b, c))

    def test_param_merge_overwrites(self):
        base = ParamSet.from_mapping({"a": 1, "b": 2})
        merged = param_merge(base, ParamSet.from_mapping({"b": 3, "c": 4}))
        assert merged.to_dict() == {"a": 1, "b": 3, "c": 4}


class TestRequestMsg:
    def test_session_id(self):
        r = RequestMsg("c1", "u", "act", ParamSet.from_mapping({"sess": 4}))
        assert r.session_id == 4
        assert RequestMsg("c1", "u", "act").session_id is None

    def test_text_session_rejected(self):
        with pytest.raises(ModelError):
            RequestMsg("c1", "u", "act", ParamSet.from_mapping({"sess": "4"}))


def _random_value(rng):
    kind = rng.choice(list(ValueKind))
    if kind == ValueKind.INT:
        return ParamValue.of_int(rng.randint(-5, 5))
    if kind == ValueKind.TEXT:
        return ParamValue.of_text(rng.choice(["", "a", "b", "ab"]))
    if kind == ValueKind.INT_SET:
        return ParamValue.of_int_set(rng.sample(range(6), rng.randint(0, 3)))
    return ParamValue.of_text_set(rng.sample(["x", "y", "z"], rng.randint(0, 2)))


def _random_params(rng):
    keys = rng.sample(["a", "b", "c", "d", "e"], rng.randint(0, 3))
    return ParamSet(tuple((key, _random_value(rng)) for key in keys))


def _random_state(rng):
    users = ["u", "v"]
    sessions = [
        SessionRec(sid, rng.choice(users), rng.randint(1, 2), _random_params(rng))
        for sid in rng.sample(range(1, 6), rng.randint(0, 2))
    ]
    params = {(acc, task): _random_params(rng)
              for acc in (1, 2) for task in ("t", "s") if rng.random() < 0.5}
    clearances = {(user, acc, "t"): rng.randint(-1, 2)
                  for user in users for acc in (1, 2) if rng.random() < 0.5}
    queues = {
        client: ClientQueue(tuple(sorted(rng.sample(range(4), rng.randint(0, 2)))),
                            rng.choice([None, 1, 2]), rng.random() < 0.2)
        for client in ("c1", "c2") if rng.random() < 0.7
    }
    return SystemState.build(sessions, params, clearances, queues)


def _state(session_order=(1, 2), param_order=((1, "t"), (2, "t"))):
    sessions = {
        1: SessionRec(1, "u", 1, ParamSet.from_mapping({"uid": "u"})),
        2: SessionRec(2, "v", 2),
    }
    params = {key: ParamSet.from_mapping({"k": key[0]}) for key in param_order}
    return SystemState.build(
        sessions=[sessions[i] for i in session_order],
        account_task_params=params,
        clearances={("u", 1, "t"): 1, ("v", 2, "t"): 0},
        client_queues={"c1": ClientQueue((0, 2), 1)}
    )


class TestSystemState:
    """Canonical ordering, identity and encoding"""

    def test_construction_order_does_not_matter(self):
        a = _state()
        b = _state(session_order=(2, 1), param_order=((2, "t"), (1, "t")))
        assert a == b
        assert canonical_bytes(a) == canonical_bytes(b)
        assert state_digest(a) == state_digest(b)

    def test_digest_separates_states(self):
        a = _state()
        b = a.with_queue("c1", ClientQueue((2,), 1))
        assert state_digest(a) != state_digest(b)

    def test_clearance_change_changes_bytes(self):
        state = _state()
        raised = state.replace(clearances={("u", 1, "t"): 2, ("v", 2, "t"): 0})
        assert state.clearance("u", 1, "t") == 1
        assert canonical_bytes(raised) != canonical_bytes(state)
        assert state_digest(raised) != state_digest(state)

    def test_decode_inverts_encode(self):
        state = _state()
        assert state_from_bytes(canonical_bytes(state)) == state

    def test_next_session_id(self):
        assert SystemState().next_session_id == 1
        assert _state().next_session_id == 3

    def test_duplicate_session_ids_rejected(self):
        with pytest.raises(ModelError):
            SystemState.build(sessions=[SessionRec(1, "u", 1), SessionRec(1, "v", 1)])

    def test_lookups(self):
        state = _state()
        assert state.session(1).user == "u"
        assert state.session(9) is None
        assert state.clearance("u", 1, "t") == 1
        assert state.clearance_snapshot("v", 2) == {"t": 0}
        assert state.params_of(2, "t").get("k").value == 2

    def test_replace_rejects_unknown_field(self):
        with pytest.raises(ModelError):
            _state().replace(queues={})


class TestRandomStates:
    """Canonical encoding over generated states"""

    @pytest.fixture(scope="class")
    def states(self):
        rng = random.Random(1009)
        distinct = set()
        while len(distinct) < 1000:
            distinct.add(_random_state(rng))
        return sorted(distinct, key=canonical_bytes)

    def test_distinct_states_distinct_bytes(self, states):
        assert len({canonical_bytes(s) for s in states}) == len(states)
        assert len({state_digest(s) for s in states}) == len(states)

    def test_decode_inverts_encode(self, states):
        for state in states:
            assert state_from_bytes(canonical_bytes(state)) == state

    def test_rebuilt_state_encodes_identically(self, states):
        for state in states[:200]:
            rebuilt = SystemState.build(
                reversed(state.open_sessions),
                dict(reversed(state.account_task_params)),
                dict(reversed(state.clearances)),
                dict(reversed(state.client_queues))
            )
            assert canonical_bytes(rebuilt) == canonical_bytes(state)
