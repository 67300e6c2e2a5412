"""Basket-component profiles, repeat/explore contribution breakdowns, comparison tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from nbreval.core import EvalCohort, EvalInstance, RankedPrediction
from nbreval.errors import ConfigError
from nbreval.metrics import CSV_COLUMNS, MetricsReport, match_predictions, rep_expl_ratio

# columns where larger is better; repr/explr describe a prediction, they do not score it
SCORED_COLUMNS = ("recall", "ndcg", "phr", "recall_rep", "recall_expl", "phr_rep", "phr_expl")


@dataclass(frozen=True)
class ComponentProfile:
    method: str
    k: int
    repr: float
    explr: float
    upper_bound_repr: float
    ground_truth_repr: float


@dataclass(frozen=True)
class ContributionBreakdown:
    method: str
    k: int
    recall_full: float
    recall_from_repeat: float
    recall_from_explore: float
    ndcg_full: float
    ndcg_from_repeat: float
    ndcg_from_explore: float


def upper_bound_repr(cohort: EvalCohort, k: int) -> float:
    """Mean of ``min(|E_rep|, K) / K``: the highest repeat ratio any method can reach."""
    return math.fsum(min(len(inst.history.repeat_set), k) / k for inst in cohort) / cohort.N


def ground_truth_repr(cohort: EvalCohort) -> float:
    return math.fsum(len(i.truth.repeat_part) / len(i.truth.target) for i in cohort) / cohort.N


def _pairs(predictions: Iterable[RankedPrediction], cohort: EvalCohort) -> list[tuple[RankedPrediction, EvalInstance]]:
    if cohort.N == 0:
        raise ValueError("empty cohort")
    return match_predictions(predictions, cohort)


def component_profile(predictions: Iterable[RankedPrediction], cohort: EvalCohort, k: int, method: str = "") -> ComponentProfile:
    pairs = _pairs(predictions, cohort)
    reprs, explrs = [], []
    for pred, inst in pairs:
        r, e = rep_expl_ratio(pred.truncate(k), inst.history.repeat_set)
        reprs.append(r)
        explrs.append(e)
    n = len(pairs)
    return ComponentProfile(
        method=method,
        k=k,
        repr=math.fsum(reprs) / n,
        explr=math.fsum(explrs) / n,
        upper_bound_repr=upper_bound_repr(cohort, k),
        ground_truth_repr=ground_truth_repr(cohort),
    )


def split_by_component(pred: RankedPrediction, repeat_set: frozenset) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(rank, item) pairs of the repeat and explore items; ranks are the original 1-based positions."""
    rep, expl = [], []
    for rank, item in enumerate(pred.items, start=1):
        (rep if item in repeat_set else expl).append((rank, item))
    return rep, expl


def _recall_ndcg(ranked: list[tuple[int, int]], target: frozenset, k: int) -> tuple[float, float]:
    hits = [rank for rank, item in ranked if item in target]
    idcg = math.fsum(1.0 / math.log2(r + 1) for r in range(1, min(len(target), k) + 1))
    return len(hits) / len(target), math.fsum(1.0 / math.log2(r + 1) for r in hits) / idcg


def contribution_terms(pred: RankedPrediction, instance: EvalInstance, k: int) -> dict[str, float]:
    """Per-instance recall/NDCG of the full prediction and of its repeat-only and explore-only parts."""
    p = pred.truncate(k)
    target = instance.truth.target
    rep, expl = split_by_component(p, instance.history.repeat_set)
    full = [(rank, item) for rank, item in enumerate(p.items, start=1)]
    out = {}
    for name, ranked in (("full", full), ("from_repeat", rep), ("from_explore", expl)):
        out[f"recall_{name}"], out[f"ndcg_{name}"] = _recall_ndcg(ranked, target, k)
    return out


def contribution_decomposition(predictions: Iterable[RankedPrediction], cohort: EvalCohort, k: int, method: str = "") -> ContributionBreakdown:
    """Recall/NDCG after deleting explore items (``from_repeat``) or repeat items (``from_explore``).

    Removed slots are not refilled and kept items keep their ranks, so the
    two parts add up to the full value.
    """
    pairs = _pairs(predictions, cohort)
    terms = [contribution_terms(p, inst, k) for p, inst in pairs]
    n = len(terms)
    means = {key: math.fsum(t[key] for t in terms) / n for key in terms[0]}
    return ContributionBreakdown(method=method, k=k, **means)


@dataclass
class ComparisonTable:
    dataset: str
    blocks: dict[int, list[MetricsReport]]
    best: dict[tuple[int, str], float]

    def is_best(self, report: MetricsReport, column: str) -> bool:
        value = getattr(report, column)
        best = self.best.get((report.k, column))
        return value is not None and best is not None and value == best

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for k in sorted(self.blocks):
            for r in self.blocks[k]:
                writer.writerow(r.csv_row())
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned table, one block per K; ``*`` marks the best value in each column."""
        cols = CSV_COLUMNS[3:]
        width = max([len("method")] + [len(r.method) for rs in self.blocks.values() for r in rs])
        lines = [f"dataset: {self.dataset}", f"{'K':>3}  {'method':<{width}}" + "".join(f"{c:>13}" for c in cols)]
        for k in sorted(self.blocks):
            lines.append("-" * len(lines[1]))
            for r in self.blocks[k]:
                cells = []
                for c in cols:
                    v = getattr(r, c)
                    text = "n/a" if v is None else f"{v:.4f}"
                    cells.append(f"{text + ('*' if self.is_best(r, c) else ' '):>13}")
                lines.append(f"{k:>3}  {r.method:<{width}}" + "".join(cells))
        return "\n".join(lines) + "\n"


def compare_methods(reports: Sequence[MetricsReport]) -> ComparisonTable:
    """Group reports into per-K blocks (methods as rows) and find the best value per column."""
    if not reports:
        raise ValueError("need at least one report")
    datasets = {r.dataset for r in reports}
    if len(datasets) > 1:
        raise ConfigError(f"reports mix datasets {sorted(datasets)}; compare one dataset at a time")
    blocks: dict[int, list[MetricsReport]] = {}
    for r in reports:
        blocks.setdefault(r.k, []).append(r)
    best = {}
    for k, rows in blocks.items():
        seen = set()
        for r in rows:
            if r.method in seen:
                raise ConfigError(f"method {r.method!r} appears twice at K={k}")
            seen.add(r.method)
        for col in SCORED_COLUMNS:
            values = [getattr(r, col) for r in rows if getattr(r, col) is not None]
            if values:
                best[(k, col)] = max(values)
    return ComparisonTable(datasets.pop(), {k: blocks[k] for k in sorted(blocks)}, best)


def component_plot_data(profiles: Sequence[ComponentProfile]) -> dict:
    """Grouped-bar series of (RepR, ExplR) per method with reference lines, one K."""
    ks = {p.k for p in profiles}
    if len(ks) != 1:
        raise ValueError("plot data covers one K at a time")
    first = profiles[0]
    return {
        "k": first.k,
        "categories": ["repr", "explr"],
        "series": [{"label": p.method, "values": [p.repr, p.explr]} for p in profiles],
        "baseline_lines": {"ground_truth_repr": first.ground_truth_repr, "upper_bound_repr": first.upper_bound_repr},
    }


def contribution_plot_data(breakdowns: Sequence[ContributionBreakdown], profile: ComponentProfile | None = None) -> dict:
    """Stacked-bar series: recall from repeat items and from explore items per method."""
    ks = {b.k for b in breakdowns}
    if len(ks) != 1:
        raise ValueError("plot data covers one K at a time")
    lines = {}
    if profile is not None:
        lines = {"ground_truth_repr": profile.ground_truth_repr, "upper_bound_repr": profile.upper_bound_repr}
    return {
        "k": breakdowns[0].k,
        "categories": ["recall_from_repeat", "recall_from_explore"],
        "series": [{"label": b.method, "values": [b.recall_from_repeat, b.recall_from_explore]} for b in breakdowns],
        "baseline_lines": lines,
    }


def as_dict(obj) -> dict:
    return asdict(obj)
