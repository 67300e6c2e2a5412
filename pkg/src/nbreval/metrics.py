"""Conventional top-K metrics and the repetition/exploration metric suite.

Per-user terms are computed by the functions below and averaged by
:func:`aggregate`; the repeat (explore) metrics average only over instances
whose ground truth has a non-empty repeat (explore) part, and are ``None``
where undefined rather than 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Iterable, Sequence

from nbreval._io import ordered_map
from nbreval.core import EvalCohort, EvalInstance, GroundTruth, RankedPrediction, partition_basket
from nbreval.errors import MissingInstancesError

DEFAULT_KS = (10, 20)
CSV_COLUMNS = ("method", "dataset", "K", "recall", "ndcg", "phr", "recall_rep", "recall_expl", "phr_rep", "phr_expl", "repr", "explr")


def _prefix(pred, k: int | None) -> tuple[tuple, int]:
    if isinstance(pred, RankedPrediction):
        cap = pred.capacity if k is None else k
        return pred.items[:cap], cap
    items = tuple(pred)
    cap = len(items) if k is None else k
    return items[:cap], cap


def _ratio(num: int, den: int, exact: bool):
    return Fraction(num, den) if exact else num / den


def _require_target(target) -> frozenset:
    target = frozenset(target)
    if not target:
        raise ValueError("ground-truth basket is empty; the instance should have been excluded")
    return target


def hit_count(pred, target, k: int | None = None) -> int:
    items, _ = _prefix(pred, k)
    target = frozenset(target)
    return sum(1 for i in items if i in target)


def recall_at_k(pred, target, k: int | None = None, exact: bool = False):
    """``|P[:k] & T| / |T|``. ``exact=True`` returns a :class:`Fraction`."""
    target = _require_target(target)
    return _ratio(hit_count(pred, target, k), len(target), exact)


def precision_at_k(pred, target, k: int | None = None, exact: bool = False):
    """``|P[:k] & T| / k``; only used to check its proportionality to recall."""
    target = _require_target(target)
    _, cap = _prefix(pred, k)
    return _ratio(hit_count(pred, target, k), cap, exact)


def ndcg_at_k(pred, target, k: int | None = None) -> float:
    """Binary-relevance NDCG with log2 discount; the ideal list has min(|T|, k) hits."""
    target = _require_target(target)
    items, cap = _prefix(pred, k)
    dcg = 0.0
    for rank, item in enumerate(items, start=1):
        if item in target:
            dcg += 1.0 / math.log2(rank + 1)
    idcg = 0.0
    for rank in range(1, min(len(target), cap) + 1):
        idcg += 1.0 / math.log2(rank + 1)
    return dcg / idcg


def is_hit(pred, target, k: int | None = None) -> bool:
    return hit_count(pred, target, k) > 0


def phr(pairs: Iterable[tuple]) -> float:
    """Share of (prediction, truth-set) pairs with at least one hit."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("PHR of an empty cohort is undefined")
    for _, t in pairs:
        _require_target(t)
    return sum(1 for p, t in pairs if is_hit(p, t)) / len(pairs)


def rep_expl_ratio(pred, repeat_set, k: int | None = None, exact: bool = False):
    """(repeat items, explore items) of the prediction, each divided by capacity K.

    Empty slots count toward neither, so the two can sum to less than 1.
    """
    items, cap = _prefix(pred, k)
    rep, expl = partition_basket(items, frozenset(repeat_set))
    return _ratio(len(rep), cap, exact), _ratio(len(expl), cap, exact)


def recall_rep(pred, truth: GroundTruth, k: int | None = None) -> float | None:
    if not truth.repeat_part:
        return None
    return hit_count(pred, truth.repeat_part, k) / len(truth.repeat_part)


def recall_expl(pred, truth: GroundTruth, k: int | None = None) -> float | None:
    if not truth.explore_part:
        return None
    return hit_count(pred, truth.explore_part, k) / len(truth.explore_part)


def phr_rep(pairs: Iterable[tuple]) -> float | None:
    """Hit ratio against repeat parts over instances that have one; ``None`` if none do."""
    pop = [(p, t.repeat_part) for p, t in pairs if t.repeat_part]
    return phr(pop) if pop else None


def phr_expl(pairs: Iterable[tuple]) -> float | None:
    pop = [(p, t.explore_part) for p, t in pairs if t.explore_part]
    return phr(pop) if pop else None


@dataclass(frozen=True)
class PerUserMetrics:
    user_id: str
    target: int
    k: int
    recall: float
    ndcg: float
    hit: bool
    rep_ratio: float
    expl_ratio: float
    recall_rep: float | None = None
    hit_rep: bool | None = None
    recall_expl: float | None = None
    hit_expl: bool | None = None


def evaluate_instance(pred: RankedPrediction, instance: EvalInstance, k: int) -> PerUserMetrics:
    p = pred.truncate(k)
    truth = instance.truth
    repr_u, explr_u = rep_expl_ratio(p, instance.history.repeat_set)
    return PerUserMetrics(
        user_id=instance.user_id,
        target=instance.target_index,
        k=k,
        recall=recall_at_k(p, truth.target),
        ndcg=ndcg_at_k(p, truth.target),
        hit=is_hit(p, truth.target),
        rep_ratio=repr_u,
        expl_ratio=explr_u,
        recall_rep=recall_rep(p, truth),
        hit_rep=is_hit(p, truth.repeat_part) if truth.repeat_part else None,
        recall_expl=recall_expl(p, truth),
        hit_expl=is_hit(p, truth.explore_part) if truth.explore_part else None,
    )


@dataclass(frozen=True)
class MetricsReport:
    method: str
    dataset: str
    k: int
    recall: float
    ndcg: float
    phr: float
    recall_rep: float | None
    recall_expl: float | None
    phr_rep: float | None
    phr_expl: float | None
    repr: float
    explr: float
    n: int
    n_r: int
    n_e: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> MetricsReport:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def csv_row(self) -> list:
        row = [self.method, self.dataset, self.k]
        for col in CSV_COLUMNS[3:]:
            value = getattr(self, col)
            row.append("" if value is None else repr(float(value)))
        return row


def to_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def _mean(values: list) -> float | None:
    # fsum is exactly rounded, so the mean does not depend on summation order
    return math.fsum(values) / len(values) if values else None


def aggregate(per_user: Sequence[PerUserMetrics], method: str = "", dataset: str = "") -> MetricsReport:
    """Unweighted means, each over its own population (N, N_r or N_e)."""
    if not per_user:
        raise ValueError("cannot aggregate an empty list of per-user metrics")
    ks = {m.k for m in per_user}
    if len(ks) != 1:
        raise ValueError(f"per-user metrics mix several K values: {sorted(ks)}")
    rep = [m for m in per_user if m.recall_rep is not None]
    expl = [m for m in per_user if m.recall_expl is not None]
    return MetricsReport(
        method=method,
        dataset=dataset,
        k=ks.pop(),
        recall=_mean([m.recall for m in per_user]),
        ndcg=_mean([m.ndcg for m in per_user]),
        phr=_mean([float(m.hit) for m in per_user]),
        recall_rep=_mean([m.recall_rep for m in rep]),
        recall_expl=_mean([m.recall_expl for m in expl]),
        phr_rep=_mean([float(m.hit_rep) for m in rep]),
        phr_expl=_mean([float(m.hit_expl) for m in expl]),
        repr=_mean([m.rep_ratio for m in per_user]),
        explr=_mean([m.expl_ratio for m in per_user]),
        n=len(per_user),
        n_r=len(rep),
        n_e=len(expl),
    )


def match_predictions(predictions: Iterable[RankedPrediction], cohort: EvalCohort) -> list[tuple[RankedPrediction, EvalInstance]]:
    by_key = {p.key: p for p in predictions}
    missing = [key for key in cohort.keys() if key not in by_key]
    if missing:
        raise MissingInstancesError(missing)
    return [(by_key[inst.key], inst) for inst in cohort]


def per_user_metrics(
    predictions: Iterable[RankedPrediction], cohort: EvalCohort, k: int, workers: int = 1
) -> list[PerUserMetrics]:
    pairs = match_predictions(predictions, cohort)
    return ordered_map(lambda pair: evaluate_instance(pair[0], pair[1], k), pairs, workers)


def evaluate(
    predictions: Iterable[RankedPrediction],
    cohort: EvalCohort,
    ks: Sequence[int] = DEFAULT_KS,
    method: str = "",
    dataset: str = "",
    workers: int = 1,
) -> dict[int, MetricsReport]:
    """Reports at every K in ``ks`` by truncating one prediction per instance."""
    pairs = match_predictions(predictions, cohort)
    reports = {}
    for k in sorted(set(ks)):
        rows = ordered_map(lambda pair: evaluate_instance(pair[0], pair[1], k), pairs, workers)
        reports[k] = aggregate(rows, method, dataset)
    return reports
