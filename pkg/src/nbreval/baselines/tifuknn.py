"""Temporal item-frequency user kNN.

Each user is represented by a personalized item frequency (PIF) vector in
which older baskets and older groups of baskets are decayed. The prediction
blends the user's own PIF with the mean PIF of the nearest users.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from nbreval.baselines.base import Recommender, top_k
from nbreval.core import Basket, EvalInstance, RankedPrediction
from nbreval.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TifuknnParams:
    k_neighbors: int = 300
    group_size: int = 7
    within_decay: float = 0.9
    group_decay: float = 0.7
    alpha: float = 0.7

    def __post_init__(self):
        if self.k_neighbors < 1 or self.group_size < 1:
            raise ConfigError("k_neighbors and group_size must be >= 1")
        if not (0 < self.within_decay <= 1 and 0 < self.group_decay <= 1):
            raise ConfigError("decay rates must lie in (0, 1]")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")


def build_pif(baskets: Sequence[Basket], group_size: int, within_decay: float, group_decay: float) -> dict[int, float]:
    """Time-decayed item frequencies of one user, as a sparse ``{item: weight}``.

    Baskets are cut into ``ceil(t / m)`` consecutive groups so that all groups
    but the oldest hold exactly ``m`` baskets. Inside a group of size ``s`` the
    j-th basket weighs ``r_b ** (s - j)``; the G-th of ``n`` groups weighs
    ``r_g ** (n - G)``. Group sums are divided by ``m`` and the total by ``n``.
    """
    if group_size < 1:
        raise ConfigError("group_size must be >= 1")
    t = len(baskets)
    if t == 0:
        return {}
    n_groups = math.ceil(t / group_size)
    first = t - (n_groups - 1) * group_size
    bounds = [(0, first)] + [(first + g * group_size, first + (g + 1) * group_size) for g in range(n_groups - 1)]
    pif: dict[int, float] = {}
    for g, (lo, hi) in enumerate(bounds, start=1):
        g_weight = group_decay ** (n_groups - g) / (n_groups * group_size)
        size = hi - lo
        for j, basket in enumerate(baskets[lo:hi], start=1):
            w = g_weight * within_decay ** (size - j)
            for i in basket.items:
                pif[i] = pif.get(i, 0.0) + w
    return pif


def _dense(pif: Mapping[int, float], n_items: int) -> np.ndarray:
    vec = np.zeros(n_items)
    if pif:
        vec[list(pif)] = list(pif.values())
    return vec


class TIFUKNN(Recommender):
    name = "tifuknn"

    def __init__(self, params: TifuknnParams | None = None):
        self.params = params or TifuknnParams()
        self.users: list[str] = []
        self.pif: sp.csr_matrix | None = None

    def fit(self, histories: Mapping[str, Sequence[Basket]], n_items: int) -> TIFUKNN:
        p = self.params
        self.n_items = n_items
        self.users = sorted(histories)
        self._row = {u: r for r, u in enumerate(self.users)}
        rows, cols, vals = [], [], []
        for r, u in enumerate(self.users):
            pif = build_pif(histories[u], p.group_size, p.within_decay, p.group_decay)
            for i in sorted(pif):
                rows.append(r)
                cols.append(i)
                vals.append(pif[i])
        self.pif = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.users), n_items))
        self._sq_norms = np.asarray(self.pif.multiply(self.pif).sum(axis=1)).ravel()
        if len(self.users) - 1 < p.k_neighbors:
            logger.warning("only %d candidate neighbours for k_neighbors=%d; using all", len(self.users) - 1, p.k_neighbors)
        return self

    def neighbors(self, query: np.ndarray, user_id: str) -> np.ndarray:
        """Rows of the nearest fitted users by Euclidean distance, excluding ``user_id``."""
        d2 = self._sq_norms + float(query @ query) - 2.0 * (self.pif @ query)
        d2 = np.maximum(d2, 0.0)
        rows = np.arange(len(self.users))
        own = self._row.get(user_id)
        if own is not None:
            keep = rows != own
            rows, d2 = rows[keep], d2[keep]
        order = np.lexsort((rows, d2))[: self.params.k_neighbors]
        return rows[order]

    def scores(self, instance: EvalInstance) -> np.ndarray:
        p = self.params
        own = _dense(build_pif(instance.history.baskets, p.group_size, p.within_decay, p.group_decay), self.n_items)
        if p.alpha >= 1.0:
            return own
        nn = self.neighbors(own, instance.user_id)
        if nn.size == 0:
            return p.alpha * own
        mean = np.asarray(self.pif[nn].mean(axis=0)).ravel()
        return p.alpha * own + (1.0 - p.alpha) * mean

    def predict(self, instance: EvalInstance, k: int) -> RankedPrediction:
        items, vals = top_k(self.scores(instance), k)
        return RankedPrediction(instance.user_id, k, tuple(int(i) for i in items), tuple(float(v) for v in vals), instance.target_index)


def tifuknn_predict(model: TIFUKNN, instance: EvalInstance, k: int) -> RankedPrediction:
    return model.predict(instance, k)
