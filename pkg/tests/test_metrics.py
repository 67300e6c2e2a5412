import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import metrics_by_enumeration
from nbreval.core import Basket, EvalCohort, EvalInstance, GroundTruth, RankedPrediction
from nbreval.errors import MissingInstancesError
from nbreval.metrics import (
    PerUserMetrics,
    aggregate,
    evaluate,
    evaluate_instance,
    ndcg_at_k,
    phr,
    phr_expl,
    phr_rep,
    precision_at_k,
    recall_at_k,
    recall_expl,
    recall_rep,
    rep_expl_ratio,
    to_csv,
)


class TestConventional:
    def test_recall(self):
        assert recall_at_k([1, 2, 3, 4], {2, 4, 9}, 4, exact=True) == Fraction(2, 3)

    def test_ndcg_second_rank(self):
        assert ndcg_at_k([5, 2], {2}, 2) == pytest.approx(0.6309297535714575, abs=1e-15)

    def test_ndcg_idcg_truncated_at_k(self):
        # |T| = 5 > K = 2: the ideal list holds 2 hits, so a perfect prefix scores 1
        assert ndcg_at_k([1, 2, 3], {1, 2, 3, 4, 5}, 2) == 1.0

    def test_empty_slots(self):
        pred = RankedPrediction("u", 4, (1,))
        assert recall_at_k(pred, {1, 2}) == 0.5
        assert precision_at_k(pred, {1, 2}, exact=True) == Fraction(1, 4)

    def test_empty_target_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k([1], set())

    def test_phr(self):
        assert phr([([1], {1}), ([2], {3}), ([3, 4], {4})]) == pytest.approx(2 / 3)
        with pytest.raises(ValueError):
            phr([])

    @given(
        st.lists(st.integers(0, 20), unique=True, max_size=8),
        st.frozensets(st.integers(0, 20), min_size=1, max_size=6),
        st.integers(1, 8),
    )
    def test_identities(self, pred, target, k):
        hits = len(set(pred[:k]) & target)
        r = recall_at_k(pred, target, k, exact=True)
        p = precision_at_k(pred, target, k, exact=True)
        assert r * len(target) == p * k == hits
        n = ndcg_at_k(pred, target, k)
        assert 0.0 <= n <= 1.0 + 1e-12
        assert (n == 0.0) == (hits == 0)
        if len(pred[:k]) == min(len(target), k) and set(pred[:k]) <= target:
            assert n == pytest.approx(1.0)


class TestRepeatExplore:
    def test_ratio_half_half(self):
        assert rep_expl_ratio([1, 9], {1, 2}, 2, exact=True) == (Fraction(1, 2), Fraction(1, 2))

    def test_ratio_with_empty_slot(self):
        pred = RankedPrediction("u", 2, (1,))
        assert rep_expl_ratio(pred, {1}) == (0.5, 0.0)

    def test_split_recall(self):
        truth = GroundTruth.from_target({1, 2, 9}, {1, 2, 3})
        assert recall_rep([1, 3], truth, 2) == 0.5
        assert recall_expl([1, 3], truth, 2) == 0.0

    def test_undefined_population(self):
        truth = GroundTruth.from_target({1}, {1})
        assert recall_expl([1], truth) is None
        assert phr_expl([([1], truth)]) is None
        assert phr_rep([([1], truth)]) == 1.0

    @settings(max_examples=200)
    @given(
        st.lists(st.integers(0, 9), unique=True, max_size=5),
        st.frozensets(st.integers(0, 9), min_size=1, max_size=5),
        st.frozensets(st.integers(0, 9), max_size=6),
        st.integers(1, 5),
    )
    def test_decomposition_identities(self, pred, target, history, k):
        truth = GroundTruth.from_target(target, history)
        rep, expl = rep_expl_ratio(pred, history, k, exact=True)
        assert rep + expl == Fraction(len(pred[:k]), k)
        hits = recall_at_k(pred, target, k, exact=True) * len(target)
        rr, re = recall_rep(pred, truth, k), recall_expl(pred, truth, k)
        h_rep = round(rr * len(truth.repeat_part)) if rr is not None else 0
        h_expl = round(re * len(truth.explore_part)) if re is not None else 0
        assert h_rep + h_expl == hits

    def test_matches_enumeration_oracle(self):
        universe = tuple(range(6))
        pred, target, history, k = [0, 4, 2], {0, 3, 4}, {0, 1, 2}, 3
        want = metrics_by_enumeration(pred, target, history, k, universe)
        truth = GroundTruth.from_target(target, history)
        assert recall_at_k(pred, target, k, exact=True) == want["recall"]
        assert recall_rep(pred, truth, k) == want["recall_rep"]
        assert recall_expl(pred, truth, k) == want["recall_expl"]
        assert rep_expl_ratio(pred, history, k, exact=True) == (want["repr"], want["explr"])
        assert ndcg_at_k(pred, target, k) == pytest.approx(want["ndcg"], abs=1e-15)


def _inst(user, history_sets, target):
    hist = [Basket(t, frozenset(s)) for t, s in enumerate(history_sets)]
    return EvalInstance.from_baskets(user, hist, Basket(99, frozenset(target)))


class TestAggregate:
    def test_population_means(self):
        rows = [
            PerUserMetrics("a", 0, 2, 0.2, 0.1, True, 0.5, 0.5, recall_rep=0.2, hit_rep=True),
            PerUserMetrics("b", 0, 2, 0.6, 0.3, False, 1.0, 0.0, recall_rep=0.6, hit_rep=False, recall_expl=0.0, hit_expl=False),
        ]
        rep = aggregate(rows)
        assert rep.recall == pytest.approx(0.4)
        assert rep.recall_rep == pytest.approx(0.4)
        assert rep.recall_expl == 0.0 and rep.phr_expl == 0.0
        assert (rep.n, rep.n_r, rep.n_e) == (2, 2, 1)
        assert rep.phr == 0.5

    def test_no_explore_population_is_none(self):
        rows = [PerUserMetrics("a", 0, 1, 1.0, 1.0, True, 1.0, 0.0, recall_rep=1.0, hit_rep=True)]
        rep = aggregate(rows)
        assert rep.recall_expl is None and rep.phr_expl is None
        assert to_csv([rep]).splitlines()[1].split(",")[7] == ""

    def test_mixed_k_rejected(self):
        a = PerUserMetrics("a", 0, 1, 1.0, 1.0, True, 1.0, 0.0)
        b = PerUserMetrics("b", 0, 2, 1.0, 1.0, True, 1.0, 0.0)
        with pytest.raises(ValueError):
            aggregate([a, b])

    def test_evaluate_per_k_truncation(self):
        cohort = EvalCohort([_inst("u", [{1, 2}], {2, 5}), _inst("v", [{3}], {3})])
        preds = [RankedPrediction("u", 3, (1, 2, 5)), RankedPrediction("v", 3, (3,))]
        reports = evaluate(preds, cohort, ks=(1, 3))
        assert reports[1].recall == pytest.approx((0 + 1) / 2)
        assert reports[3].recall == 1.0
        assert reports[3].recall_expl == 1.0 and reports[3].n_e == 1
        assert reports[1].repr == pytest.approx(1.0)

    def test_missing_prediction(self):
        cohort = EvalCohort([_inst("u", [{1}], {1})])
        with pytest.raises(MissingInstancesError):
            evaluate([], cohort)

    def test_evaluate_instance_uses_history(self):
        m = evaluate_instance(RankedPrediction("u", 2, (1, 4)), _inst("u", [{1, 2}], {1, 4}), 2)
        assert (m.rep_ratio, m.expl_ratio, m.recall_rep, m.recall_expl) == (0.5, 0.5, 1.0, 1.0)
        assert m.ndcg == 1.0

    def test_report_roundtrip(self):
        cohort = EvalCohort([_inst("u", [{1}], {1})])
        rep = evaluate([RankedPrediction("u", 1, (1,))], cohort, ks=(1,), method="m", dataset="d")[1]
        assert type(rep).from_dict(rep.to_dict()) == rep
        assert math.isclose(rep.ndcg, 1.0)
