import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbreval.core import Basket, EvalCohort, EvalInstance, GroundTruth, RankedPrediction, UserHistory, partition_basket

item_sets = st.frozensets(st.integers(0, 30), max_size=12)


class TestPartition:
    def test_mixed(self):
        # oracle: explicit membership loop
        items, rep_set = {1, 2, 5}, {1, 2, 3}
        expected = ({i for i in items if i in rep_set}, {i for i in items if i not in rep_set})
        assert expected == ({1, 2}, {5})
        assert partition_basket(items, rep_set) == expected

    def test_empty_items(self):
        assert partition_basket(set(), {1}) == (frozenset(), frozenset())

    def test_no_history(self):
        assert partition_basket({4}, frozenset()) == (frozenset(), frozenset({4}))

    @given(item_sets, item_sets)
    def test_disjoint_cover(self, items, rep_set):
        rep, expl = partition_basket(items, rep_set)
        assert rep | expl == items
        assert not rep & expl
        assert rep <= rep_set and not expl & rep_set

    @given(item_sets, item_sets)
    def test_idempotent_and_order_free(self, items, rep_set):
        rep, expl = partition_basket(items, rep_set)
        assert partition_basket(rep, rep_set) == (rep, frozenset())
        assert partition_basket(sorted(items, reverse=True), rep_set) == (rep, expl)


class TestUserHistory:
    def test_repeat_set_is_union(self):
        h = UserHistory("u", (Basket(0, {1, 2}), Basket(1, {2, 3})))
        assert h.repeat_set == {1, 2, 3}

    @given(st.lists(st.frozensets(st.integers(0, 20), min_size=1, max_size=5), max_size=8), st.frozensets(st.integers(0, 20), min_size=1))
    def test_repeat_set_monotone(self, baskets, extra):
        h = UserHistory("u", tuple(Basket(t, b) for t, b in enumerate(baskets)))
        longer = h.extended(Basket(len(baskets), extra))
        assert longer.repeat_set >= h.repeat_set
        assert longer.repeat_set == h.repeat_set | extra

    def test_rejects_unordered(self):
        with pytest.raises(ValueError):
            UserHistory("u", (Basket(5, {1}), Basket(2, {1})))

    def test_equal_timestamps_allowed(self):
        assert len(UserHistory("u", (Basket(1, {1}), Basket(1, {2})))) == 2

    def test_empty_basket_rejected(self):
        with pytest.raises(ValueError):
            Basket(0, set())

    def test_immutable(self):
        h = UserHistory("u", (Basket(0, {1}),))
        with pytest.raises(Exception):
            h.user_id = "v"


class TestRankedPrediction:
    def test_valid(self):
        p = RankedPrediction("u", 4, (3, 1), (2.0, 1.0))
        assert p.items == (3, 1) and p.key == ("u", 0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(capacity=1, items=(1, 2)),
            dict(capacity=3, items=(1, 1)),
            dict(capacity=3, items=(1, 2), scores=(1.0,)),
            dict(capacity=3, items=(1, 2), scores=(1.0, 2.0)),
            dict(capacity=0, items=()),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RankedPrediction("u", **kwargs)

    def test_truncate(self):
        p = RankedPrediction("u", 5, (1, 2, 3), (3.0, 2.0, 1.0), target=2)
        t = p.truncate(2)
        assert (t.capacity, t.items, t.scores, t.target) == (2, (1, 2), (3.0, 2.0), 2)
        with pytest.raises(ValueError):
            p.truncate(6)


class TestInstancesAndCohort:
    def test_truth_uses_history_only(self):
        inst = EvalInstance.from_baskets("u", [Basket(0, {1, 2})], Basket(1, {2, 9}))
        assert inst.truth == GroundTruth(frozenset({2, 9}), frozenset({2}), frozenset({9}))
        rep, expl = partition_basket(inst.truth.target, inst.history.repeat_set)
        assert (rep, expl) == (inst.truth.repeat_part, inst.truth.explore_part)

    def test_population_counts(self):
        insts = [
            EvalInstance.from_baskets("a", [Basket(0, {1})], Basket(1, {1})),  # all repeat
            EvalInstance.from_baskets("b", [Basket(0, {1})], Basket(1, {2})),  # all explore
            EvalInstance.from_baskets("c", [Basket(0, {1})], Basket(1, {1, 2})),  # both
        ]
        cohort = EvalCohort(tuple(reversed(insts)))
        assert (cohort.N, cohort.N_r, cohort.N_e) == (3, 2, 2)
        assert cohort.keys() == [("a", 0), ("b", 0), ("c", 0)]

    def test_duplicate_keys_rejected(self):
        inst = EvalInstance.from_baskets("a", [Basket(0, {1})], Basket(1, {1}))
        with pytest.raises(ValueError):
            EvalCohort((inst, inst))
