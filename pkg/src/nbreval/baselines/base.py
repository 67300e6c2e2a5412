from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from nbreval._io import ordered_map
from nbreval.core import Basket, EvalCohort, EvalInstance, RankedPrediction


def top_k(scores: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and values of the ``k`` largest positive scores.

    Ties are broken by ascending index; zero-score items are never returned.
    """
    idx = np.flatnonzero(scores > 0)
    if idx.size == 0:
        return idx, scores[idx]
    vals = scores[idx]
    if idx.size > 4 * k:
        # keep everything tied with the k-th value so the tie-break stays exact
        kth = np.partition(vals, idx.size - k)[idx.size - k]
        mask = vals >= kth
        idx, vals = idx[mask], vals[mask]
    order = np.lexsort((idx, -vals))[:k]
    return idx[order], vals[order]


class Recommender:
    """A basket recommender fit on per-user histories.

    Subclasses set ``name`` and implement ``fit`` and ``predict``. ``fit``
    receives every user's baskets preceding the evaluated segment;
    ``predict`` scores one instance using its own history for the user's
    personal part.
    """

    name = "recommender"

    def fit(self, histories: Mapping[str, Sequence[Basket]], n_items: int) -> Recommender:
        raise NotImplementedError

    def predict(self, instance: EvalInstance, k: int) -> RankedPrediction:
        raise NotImplementedError

    def predict_cohort(self, cohort: EvalCohort, k: int, workers: int = 1) -> list[RankedPrediction]:
        return ordered_map(lambda inst: self.predict(inst, k), list(cohort), workers)
