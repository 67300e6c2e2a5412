"""Recency-aware user-wise popularity combined with user-based CF (UP-CF@r)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from nbreval.baselines.base import Recommender, top_k
from nbreval.core import Basket, EvalInstance, RankedPrediction
from nbreval.errors import ConfigError


@dataclass(frozen=True)
class UpcfParams:
    recency_window: int = 5
    locality: int = 5
    asymmetry: float = 0.5

    def __post_init__(self):
        if self.recency_window < 1 or self.locality < 1:
            raise ConfigError("recency_window and locality must be >= 1")
        if not 0 <= self.asymmetry <= 1:
            raise ConfigError("asymmetry must lie in [0, 1]")


def user_wise_popularity(baskets: Sequence[Basket], window: int) -> dict[int, float]:
    """Share of the user's last ``window`` baskets that contain each item.

    Users with fewer baskets than the window are normalised by their basket
    count, so a window covering the whole history gives relative frequencies.
    """
    recent = baskets[-window:] if window < len(baskets) else baskets
    if not recent:
        return {}
    uwp: dict[int, float] = {}
    for b in recent:
        for i in b.items:
            uwp[i] = uwp.get(i, 0.0) + 1.0
    denom = float(len(recent))
    return {i: c / denom for i, c in uwp.items()}


def asymmetric_cosine(overlap, size_u, size_v, alpha: float):
    """``|I_u & I_v| / (|I_u|**alpha * |I_v|**(1 - alpha))``, 0 where either set is empty."""
    denom = np.power(np.asarray(size_u, dtype=float), alpha) * np.power(np.asarray(size_v, dtype=float), 1.0 - alpha)
    overlap = np.asarray(overlap, dtype=float)
    return np.divide(overlap, denom, out=np.zeros_like(overlap * denom), where=denom > 0)


class UPCF(Recommender):
    name = "upcf"

    def __init__(self, params: UpcfParams | None = None):
        self.params = params or UpcfParams()

    def fit(self, histories: Mapping[str, Sequence[Basket]], n_items: int) -> UPCF:
        self.n_items = n_items
        self.users = sorted(histories)
        self._row = {u: r for r, u in enumerate(self.users)}
        b_rows, b_cols, p_rows, p_cols, p_vals = [], [], [], [], []
        for r, u in enumerate(self.users):
            items = sorted({i for b in histories[u] for i in b.items})
            b_rows += [r] * len(items)
            b_cols += items
            uwp = user_wise_popularity(histories[u], self.params.recency_window)
            for i in sorted(uwp):
                p_rows.append(r)
                p_cols.append(i)
                p_vals.append(uwp[i])
        shape = (len(self.users), n_items)
        self.binary = sp.csr_matrix((np.ones(len(b_rows)), (b_rows, b_cols)), shape=shape)
        self.binary_t = self.binary.T.tocsr()
        self.sizes = np.asarray(self.binary.sum(axis=1)).ravel()
        self.uwp = sp.csr_matrix((p_vals, (p_rows, p_cols)), shape=shape)
        return self

    def similarities(self, instance: EvalInstance) -> np.ndarray:
        """Similarity of the instance's user to every fitted user (own row zeroed)."""
        items = sorted(instance.history.repeat_set)
        if not items or not self.users:
            return np.zeros(len(self.users))
        overlap = np.asarray(self.binary_t[items].sum(axis=0)).ravel()
        sims = asymmetric_cosine(overlap, len(items), self.sizes, self.params.asymmetry)
        own = self._row.get(instance.user_id)
        if own is not None:
            sims[own] = 0.0
        return sims

    def scores(self, instance: EvalInstance) -> np.ndarray:
        p = self.params
        own = np.zeros(self.n_items)
        for i, v in user_wise_popularity(instance.history.baskets, p.recency_window).items():
            own[i] = v
        weights = self.similarities(instance) ** p.locality
        # the user's own term enters with sim(u, u) = 1
        return own + self.uwp.T @ weights

    def predict(self, instance: EvalInstance, k: int) -> RankedPrediction:
        items, vals = top_k(self.scores(instance), k)
        return RankedPrediction(instance.user_id, k, tuple(int(i) for i in items), tuple(float(v) for v in vals), instance.target_index)


def upcf_predict(model: UPCF, instance: EvalInstance, k: int) -> RankedPrediction:
    return model.predict(instance, k)
