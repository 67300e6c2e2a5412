import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pif_by_direct_sum, rank_scores, tifuknn_scores_exhaustive
from nbreval.baselines.tifuknn import TIFUKNN, TifuknnParams, build_pif
from nbreval.core import Basket, EvalInstance
from nbreval.errors import ConfigError


def baskets(*sets):
    return [Basket(t, frozenset(s)) for t, s in enumerate(sets)]


def instance(user, hist):
    return EvalInstance.from_baskets(user, hist, Basket(10**6, {0}))


class TestPIF:
    def test_frozen_example(self):
        # two groups of two: weights 0.7/4 and 1/4, within-group 0.9 for the older basket
        pif = build_pif(baskets({0, 1}, {1}, {0, 2}, {2}), 2, 0.9, 0.7)
        assert pif == pytest.approx({0: 0.3825, 1: 0.3325, 2: 0.475}, abs=1e-12)

    def test_no_decay_is_scaled_frequency(self):
        hist = baskets({0}, {0, 1}, {0}, {2}, {1, 0})
        pif = build_pif(hist, 3, 1.0, 1.0)
        # 5 baskets, m=3 -> 2 groups; each basket weighs 1 / (2 * 3)
        assert pif == pytest.approx({0: 4 / 6, 1: 2 / 6, 2: 1 / 6})

    def test_oldest_group_is_the_short_one(self):
        pif = build_pif(baskets({0}, {1}, {2}), 2, 0.5, 0.5)
        # groups: [{0}], [{1}, {2}]
        assert pif == pytest.approx({0: 0.5 / 4, 1: 0.5 / 4, 2: 1 / 4})

    @settings(max_examples=60)
    @given(
        st.lists(st.frozensets(st.integers(0, 6), min_size=1, max_size=4), min_size=1, max_size=15),
        st.integers(1, 6),
        st.floats(0.1, 1.0),
        st.floats(0.1, 1.0),
    )
    def test_matches_direct_sum(self, sets, m, r_b, r_g):
        got = build_pif(baskets(*sets), m, r_b, r_g)
        want = pif_by_direct_sum(sets, m, r_b, r_g)
        assert got.keys() == want.keys()
        for i in want:
            assert got[i] == pytest.approx(want[i], rel=1e-12)

    def test_params_validated(self):
        with pytest.raises(ConfigError):
            TifuknnParams(alpha=1.5)
        with pytest.raises(ConfigError):
            TifuknnParams(group_size=0)


class TestModel:
    def test_alpha_one_is_personal_ranking(self):
        hist = {"u": baskets({0, 1}, {1}, {0, 2}, {2}), "v": baskets({3}, {3}, {3})}
        model = TIFUKNN(TifuknnParams(alpha=1.0, group_size=2, k_neighbors=1)).fit(hist, 4)
        assert model.predict(instance("u", hist["u"]), 3).items == (2, 0, 1)

    def test_identical_users(self):
        same = baskets({0, 1}, {1, 2}, {0})
        hist = {"u": same, "v": same}
        model = TIFUKNN(TifuknnParams(alpha=0.3, k_neighbors=1)).fit(hist, 3)
        own = build_pif(same, 7, 0.9, 0.7)
        s = model.scores(instance("u", same))
        assert s == pytest.approx([own[0], own[1], own[2]])

    def test_excludes_self(self):
        hist = {"u": baskets({0}, {0}), "v": baskets({1}, {1}), "w": baskets({2}, {2}, {2})}
        model = TIFUKNN(TifuknnParams(k_neighbors=1)).fit(hist, 3)
        nn = model.neighbors(model.pif[0].toarray().ravel(), "u")
        assert model.users[nn[0]] != "u"

    def test_few_candidates_warns_once(self, caplog):
        hist = {"u": baskets({0}), "v": baskets({1})}
        TIFUKNN(TifuknnParams(k_neighbors=5)).fit(hist, 2)
        assert caplog.text.count("candidate neighbours") == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_exhaustive_oracle(self, seed):
        rng = random.Random(seed)
        n_items = 8
        users = [f"u{i}" for i in range(rng.randint(3, 7))]
        hist = {u: baskets(*[set(rng.sample(range(n_items), rng.randint(1, 3))) for _ in range(rng.randint(1, 9))]) for u in users}
        params = TifuknnParams(k_neighbors=rng.randint(1, 4), group_size=rng.randint(1, 4), alpha=rng.choice([0.0, 0.3, 0.7]))
        model = TIFUKNN(params).fit(hist, n_items)
        pifs = {u: pif_by_direct_sum([set(b.items) for b in hist[u]], params.group_size, params.within_decay, params.group_decay) for u in users}
        for u in users:
            want = tifuknn_scores_exhaustive(u, pifs, pifs[u], params.k_neighbors, params.alpha)
            got = model.scores(instance(u, hist[u]))
            for i in range(n_items):
                assert got[i] == pytest.approx(want.get(i, 0.0), abs=1e-12)
            assert list(model.predict(instance(u, hist[u]), 4).items) == rank_scores(
                {i: float(got[i]) for i in range(n_items)}, 4
            )
