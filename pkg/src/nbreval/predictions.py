"""Line-JSON interchange format for ranked predictions.

The first line is a header::

    {"format": "nbr-pred-v1", "method": ..., "dataset": ..., "vocab_sha256": ..., "k": K}

followed by one record per evaluation instance::

    {"user": "...", "target": 0, "items": [3, 17, ...], "scores": [...]}

Items are dense integer ids, or strings holding source item keys that are
resolved through the dataset vocabulary.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

from nbreval._io import atomic_write_text, dumps
from nbreval.core import EvalCohort, RankedPrediction
from nbreval.dataset import DatasetBundle, build_cohort
from nbreval.errors import (
    CapacityError,
    ChecksumMismatchError,
    DuplicateItemError,
    DuplicateRecordError,
    HeaderError,
    MissingInstancesError,
    PredictionValidationError,
    UnexpectedInstancesError,
    UnknownItemError,
)

PREDICTION_FORMAT = "nbr-pred-v1"


@dataclass(frozen=True)
class PredictionHeader:
    method: str
    dataset: str
    vocab_sha256: str
    k: int
    format: str = PREDICTION_FORMAT

    @classmethod
    def for_bundle(cls, method: str, bundle: DatasetBundle, k: int) -> PredictionHeader:
        return cls(method, bundle.name, bundle.vocabulary.sha256, k)


def write_predictions(predictions: Iterable[RankedPrediction], header: PredictionHeader, path: str | os.PathLike) -> Path:
    """Header line, then records sorted by (user, target) whatever the input order."""
    head = asdict(header)
    lines = [dumps({"format": head.pop("format"), **head})]
    for p in sorted(predictions, key=lambda p: p.key):
        if p.capacity > header.k:
            raise ValueError(f"user {p.user_id!r}: capacity {p.capacity} exceeds header k={header.k}")
        rec = {"user": p.user_id, "target": p.target, "items": [int(i) for i in p.items]}
        if p.scores is not None:
            rec["scores"] = list(p.scores)
        lines.append(dumps(rec))
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_header(path: str | os.PathLike) -> PredictionHeader:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    return _parse_header(first, path)


def _parse_header(line: str, path) -> PredictionHeader:
    try:
        head = json.loads(line)
    except json.JSONDecodeError as exc:
        raise HeaderError(f"{path}: first line is not a JSON header ({exc})") from exc
    if not isinstance(head, dict) or head.get("format") != PREDICTION_FORMAT:
        raise HeaderError(f"{path}: expected format {PREDICTION_FORMAT!r}")
    k = head.get("k")
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise HeaderError(f"{path}: header k must be a positive integer, got {k!r}")
    try:
        return PredictionHeader(str(head["method"]), str(head["dataset"]), str(head["vocab_sha256"]), k)
    except KeyError as exc:
        raise HeaderError(f"{path}: header lacks {exc}") from exc


def read_predictions(path: str | os.PathLike, bundle: DatasetBundle | None = None) -> tuple[PredictionHeader, list[RankedPrediction]]:
    """Parse a file, checking each record on its own (no cohort or checksum check).

    Without ``bundle`` only integer item ids are accepted.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise HeaderError(f"{path}: empty file")
    header = _parse_header(lines[0], path)
    n_items = len(bundle.vocabulary) if bundle is not None else None
    records = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        pred = _parse_record(line, lineno, header.k, bundle, n_items, path)
        if pred.key in seen:
            raise DuplicateRecordError(f"{path}:{lineno}: second record for user {pred.user_id!r} target {pred.target}")
        seen.add(pred.key)
        records.append(pred)
    return header, records


def _resolve_item(raw, user: str, bundle: DatasetBundle | None, n_items: int | None) -> int:
    if isinstance(raw, bool):
        raise UnknownItemError(f"user {user!r}: item {raw!r} is not an item id")
    if isinstance(raw, int):
        if raw < 0 or (n_items is not None and raw >= n_items):
            raise UnknownItemError(f"user {user!r}: item id {raw} outside the vocabulary")
        return raw
    if isinstance(raw, str) and bundle is not None:
        if raw in bundle.vocabulary:
            return bundle.vocabulary.id_of(raw)
        raise UnknownItemError(f"user {user!r}: item key {raw!r} not in the vocabulary")
    raise UnknownItemError(f"user {user!r}: cannot resolve item {raw!r}")


def _parse_record(line, lineno, k, bundle, n_items, path) -> RankedPrediction:
    where = f"{path}:{lineno}"
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PredictionValidationError(f"{where}: not valid JSON ({exc})") from exc
    if not isinstance(rec, dict) or not isinstance(rec.get("user"), str) or not isinstance(rec.get("items"), list):
        raise PredictionValidationError(f"{where}: record needs a string 'user' and a list 'items'")
    user = rec["user"]
    target = rec.get("target", 0)
    if not isinstance(target, int) or isinstance(target, bool) or target < 0:
        raise PredictionValidationError(f"{where}: target must be a non-negative integer")
    items = [_resolve_item(raw, user, bundle, n_items) for raw in rec["items"]]
    seen = set()
    for raw, item in zip(rec["items"], items):
        if item in seen:
            raise DuplicateItemError(user, raw)
        seen.add(item)
    if len(items) > k:
        raise CapacityError(f"{where}: user {user!r} has {len(items)} items, more than k={k}")
    scores = rec.get("scores")
    if scores is not None:
        if not isinstance(scores, list) or len(scores) != len(items) or not all(
            isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores
        ):
            raise PredictionValidationError(f"{where}: user {user!r}: scores must be numbers parallel to items")
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise PredictionValidationError(f"{where}: user {user!r}: scores must be non-increasing")
    return RankedPrediction(user, k, tuple(items), None if scores is None else tuple(scores), target)


def read_and_validate(
    path: str | os.PathLike,
    bundle: DatasetBundle,
    cohort: EvalCohort | None = None,
    allow_extra: bool = False,
) -> list[RankedPrediction]:
    """Read a prediction file and check it against ``bundle`` and its cohort.

    The record set must equal the cohort's (user, target) keys; with
    ``allow_extra`` records outside the cohort are dropped instead.
    """
    header, records = read_predictions(path, bundle)
    if header.vocab_sha256 != bundle.vocabulary.sha256:
        raise ChecksumMismatchError(
            f"{path}: vocabulary checksum {header.vocab_sha256[:12]}... does not match dataset "
            f"{bundle.name!r} ({bundle.vocabulary.sha256[:12]}...); wrong dataset?"
        )
    if cohort is None:
        cohort = build_cohort(bundle)
    expected = set(cohort.keys())
    got = {p.key for p in records}
    missing = sorted(expected - got)
    if missing:
        raise MissingInstancesError(missing)
    extra = sorted(got - expected)
    if extra:
        if not allow_extra:
            shown = ", ".join(f"{u}#{t}" for u, t in extra[:10])
            raise UnexpectedInstancesError(f"{path}: {len(extra)} records match no evaluation instance: {shown}")
        records = [p for p in records if p.key in expected]
    return sorted(records, key=lambda p: p.key)
