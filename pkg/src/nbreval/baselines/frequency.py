"""Global, personal and combined top-frequency baselines."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from nbreval.baselines.base import Recommender
from nbreval.core import Basket, EvalInstance, RankedPrediction
from nbreval.errors import ConfigError

logger = logging.getLogger(__name__)


def personal_counts(baskets: Iterable[Basket]) -> Counter:
    """Number of baskets containing each item."""
    counts: Counter = Counter()
    for b in baskets:
        counts.update(b.items)
    return counts


def _rank_counts(counts: Mapping[int, int]) -> list[tuple[int, int]]:
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class GlobalFreqModel:
    """Every vocabulary item, most frequent first (ties by ascending id)."""

    ranked_items: tuple[int, ...]
    counts: tuple[int, ...] = ()

    @classmethod
    def fit(cls, histories: Iterable[Sequence[Basket]], n_items: int) -> GlobalFreqModel:
        counts = [0] * n_items
        for baskets in histories:
            for b in baskets:
                for i in b.items:
                    counts[i] += 1
        ranked = sorted(range(n_items), key=lambda i: (-counts[i], i))
        return cls(tuple(ranked), tuple(counts[i] for i in ranked))


@dataclass(frozen=True)
class PersonalFreqTable:
    counts: Mapping[str, Counter]

    @classmethod
    def from_histories(cls, histories: Mapping[str, Sequence[Basket]]) -> PersonalFreqTable:
        return cls({u: personal_counts(bs) for u, bs in histories.items()})


def g_topfreq(model: GlobalFreqModel, k: int, user_id: str = "", target: int = 0) -> RankedPrediction:
    if k < 1:
        raise ConfigError("K must be >= 1")
    if k > len(model.ranked_items):
        logger.warning("K=%d exceeds the vocabulary size %d; prediction truncated", k, len(model.ranked_items))
    scores = tuple(float(c) for c in model.counts[:k]) if model.counts else None
    return RankedPrediction(user_id, k, model.ranked_items[:k], scores, target)


def p_topfreq(table: PersonalFreqTable, user: str, k: int, target: int = 0) -> RankedPrediction:
    """Up to ``k`` most frequent items of the user's own history; may leave slots empty."""
    if user not in table.counts:
        raise KeyError(f"unknown user {user!r}")
    ranked = _rank_counts(table.counts[user])[:k]
    return RankedPrediction(user, k, tuple(i for i, _ in ranked), tuple(float(c) for _, c in ranked), target)


def gp_topfreq(table: PersonalFreqTable, model: GlobalFreqModel, user: str, k: int, target: int = 0) -> RankedPrediction:
    """P-TopFreq, with empty slots filled from the global ranking."""
    personal = p_topfreq(table, user, k, target).items
    items = list(personal)
    seen = set(personal)
    for i in model.ranked_items:
        if len(items) >= k:
            break
        if i not in seen:
            items.append(i)
            seen.add(i)
    return RankedPrediction(user, k, tuple(items), None, target)


class _FrequencyRecommender(Recommender):
    def __init__(self):
        self.model: GlobalFreqModel | None = None

    def fit(self, histories, n_items):
        self.model = GlobalFreqModel.fit(histories.values(), n_items)
        return self

    @staticmethod
    def _table(instance: EvalInstance) -> PersonalFreqTable:
        return PersonalFreqTable({instance.user_id: personal_counts(instance.history.baskets)})


class GTopFreq(_FrequencyRecommender):
    name = "g-topfreq"

    def predict(self, instance, k):
        return g_topfreq(self.model, k, instance.user_id, instance.target_index)


class PTopFreq(_FrequencyRecommender):
    name = "p-topfreq"

    def predict(self, instance, k):
        return p_topfreq(self._table(instance), instance.user_id, k, instance.target_index)


class GPTopFreq(_FrequencyRecommender):
    name = "gp-topfreq"

    def predict(self, instance, k):
        return gp_topfreq(self._table(instance), self.model, instance.user_id, k, instance.target_index)
