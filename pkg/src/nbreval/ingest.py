"""Raw transaction logs -> baskets -> filtered users -> per-user chronological split."""

from __future__ import annotations

import csv
import logging
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from nbreval._io import natural_key
from nbreval.core import Basket
from nbreval.dataset import DatasetBundle, UserSplit, Vocabulary
from nbreval.errors import ConfigError, DataError, EmptyDatasetError

logger = logging.getLogger(__name__)

SCHEMAS = ("tafeng", "dunnhumby", "instacart", "canonical")
SIZE_FILTER_MODES = ("basket-count", "basket-size")
SECONDS_PER_DAY = 86400
# fewest baskets that still give one train, one validation and one test basket
MIN_SPLIT_BASKETS = 3


@dataclass(frozen=True)
class RawTransaction:
    user_key: str
    basket_key: str
    time_key: int
    item_key: str


@dataclass(frozen=True)
class PreprocessConfig:
    """Filtering and splitting parameters.

    ``size_filter`` selects how the [min, max] bounds are read: as the number
    of baskets per user (default) or as the number of items per basket.
    """

    min_baskets_per_user: int = 3
    max_baskets_per_user: int = 50
    interaction_coverage: float = 0.95
    split_fractions: tuple[float, float, float] = (0.72, 0.08, 0.20)
    size_filter: str = "basket-count"

    def __post_init__(self):
        object.__setattr__(self, "split_fractions", tuple(float(f) for f in self.split_fractions))
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be three numbers summing to 1, got {self.split_fractions}")
        if any(f < 0 for f in self.split_fractions):
            raise ConfigError("split fractions must be non-negative")
        if not 1 <= self.min_baskets_per_user <= self.max_baskets_per_user:
            raise ConfigError("need 1 <= min_baskets_per_user <= max_baskets_per_user")
        if not 0 < self.interaction_coverage <= 1:
            raise ConfigError("interaction_coverage must lie in (0, 1]")
        if self.size_filter not in SIZE_FILTER_MODES:
            raise ConfigError(f"size_filter must be one of {SIZE_FILTER_MODES}")


@dataclass
class ParseReport:
    """Row counters filled while a source is streamed."""

    rows: int = 0
    kept: int = 0
    missing_fields: int = 0
    malformed: int = 0
    examples: list[str] = field(default_factory=list)

    def note(self, kind: str, lineno: int, detail: str) -> None:
        setattr(self, kind, getattr(self, kind) + 1)
        if len(self.examples) < 5:
            self.examples.append(f"line {lineno}: {detail}")


# --- parsing -------------------------------------------------------------

def _parse_day(text: str) -> int:
    text = text.strip()
    for fmt in ("%m/%d/%Y", "%Y-%m-%d", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d", "%Y/%m/%d %H:%M:%S", "%m/%d/%Y %H:%M"):
        try:
            dt = datetime.strptime(text, fmt)
        except ValueError:
            continue
        day = datetime(dt.year, dt.month, dt.day, tzinfo=timezone.utc)
        return int(day.timestamp())
    raise ValueError(f"unrecognised date {text!r}")


def _open_csv(path: Path):
    fh = open(path, newline="", encoding="utf-8-sig")
    sample = fh.read(8192)
    fh.seek(0)
    delimiter = ";" if sample.count(";") > sample.count(",") else ","
    return fh, csv.reader(fh, delimiter=delimiter)


def _pick(header: Sequence[str], *names: str) -> int | None:
    lowered = [h.strip().lower() for h in header]
    for name in names:
        if name in lowered:
            return lowered.index(name)
    return None


def _rows_with_columns(path: Path, columns: dict[str, tuple[str, ...]], positional: dict[str, int] | None = None):
    """Yield (lineno, {logical name: raw value}) for each data row."""
    fh, reader = _open_csv(path)
    with fh:
        header = next(reader, None)
        if header is None:
            return
        index = {name: _pick(header, *aliases) for name, aliases in columns.items()}
        required = [n for n in columns if not n.startswith("?")]
        start = 2
        if any(index[n] is None for n in required):
            if positional is None:
                missing = [n for n in required if index[n] is None]
                raise DataError(f"{path}: header lacks column(s) {missing}")
            # headerless layout: first line is data
            index = {n: positional.get(n) for n in columns}
            yield 1, {n: (header[i] if i is not None and i < len(header) else None) for n, i in index.items()}
        for lineno, row in enumerate(reader, start=start):
            if not row:
                continue
            yield lineno, {n: (row[i] if i is not None and i < len(row) else None) for n, i in index.items()}


def _tafeng(path: Path, report: ParseReport) -> Iterator[RawTransaction]:
    columns = {
        "date": ("transaction_dt", "transaction_date", "date", "datetime"),
        "user": ("customer_id", "customer", "user_id"),
        "item": ("product_id", "product", "item_id"),
    }
    positional = {"date": 0, "user": 1, "item": 5}
    for lineno, rec in _rows_with_columns(path, columns, positional):
        report.rows += 1
        user, item = (rec["user"] or "").strip(), (rec["item"] or "").strip()
        if not user or not item:
            report.note("missing_fields", lineno, "missing customer or product")
            continue
        try:
            ts = _parse_day(rec["date"] or "")
        except ValueError as exc:
            report.note("malformed", lineno, str(exc))
            continue
        report.kept += 1
        day = datetime.fromtimestamp(ts, tz=timezone.utc).date().isoformat()
        yield RawTransaction(user, day, ts, item)


def _dunnhumby(path: Path, report: ParseReport) -> Iterator[RawTransaction]:
    columns = {
        "user": ("household_key",),
        "basket": ("basket_id",),
        "day": ("day",),
        "item": ("product_id",),
        "?time": ("trans_time",),
    }
    for lineno, rec in _rows_with_columns(path, columns):
        report.rows += 1
        user, item, basket = ((rec[k] or "").strip() for k in ("user", "item", "basket"))
        if not user or not item or not basket:
            report.note("missing_fields", lineno, "missing household, basket or product")
            continue
        try:
            ts = int(rec["day"]) * SECONDS_PER_DAY
            if rec["?time"]:
                hhmm = int(rec["?time"])
                ts += (hhmm // 100) * 3600 + (hhmm % 100) * 60
        except (TypeError, ValueError):
            report.note("malformed", lineno, f"bad DAY/TRANS_TIME {rec['day']!r}/{rec['?time']!r}")
            continue
        report.kept += 1
        yield RawTransaction(user, basket, ts, item)


def _instacart(path: Path, report: ParseReport) -> Iterator[RawTransaction]:
    if path.is_file():
        # pre-joined file
        columns = {"order": ("order_id",), "user": ("user_id",), "number": ("order_number",), "item": ("product_id",)}
        for lineno, rec in _rows_with_columns(path, columns):
            report.rows += 1
            yield from _instacart_row(lineno, rec["user"], rec["order"], rec["number"], rec["item"], report)
        return
    orders_path = path / "orders.csv"
    product_files = sorted(path.glob("order_products*.csv"))
    if not orders_path.exists() or not product_files:
        raise DataError(f"{path}: expected orders.csv and order_products*.csv")
    orders: dict[str, tuple[str, str]] = {}
    for _, rec in _rows_with_columns(orders_path, {"order": ("order_id",), "user": ("user_id",), "number": ("order_number",)}):
        if rec["order"]:
            orders[rec["order"].strip()] = ((rec["user"] or "").strip(), (rec["number"] or "").strip())
    for pf in product_files:
        for lineno, rec in _rows_with_columns(pf, {"order": ("order_id",), "item": ("product_id",)}):
            report.rows += 1
            order = (rec["order"] or "").strip()
            user, number = orders.get(order, ("", ""))
            yield from _instacart_row(lineno, user, order, number, rec["item"], report)


def _instacart_row(lineno, user, order, number, item, report) -> Iterator[RawTransaction]:
    user, order, item = (user or "").strip(), (order or "").strip(), (item or "").strip()
    if not user or not order or not item:
        report.note("missing_fields", lineno, "missing order, user or product")
        return
    try:
        ts = int(number)
    except (TypeError, ValueError):
        report.note("malformed", lineno, f"bad order_number {number!r}")
        return
    report.kept += 1
    yield RawTransaction(user, order, ts, item)


def _canonical(path: Path, report: ParseReport) -> Iterator[RawTransaction]:
    columns = {"user": ("user",), "basket": ("basket",), "time": ("time",), "item": ("item",)}
    for lineno, rec in _rows_with_columns(path, columns):
        report.rows += 1
        user, basket, item = ((rec[k] or "").strip() for k in ("user", "basket", "item"))
        if not user or not basket or not item:
            report.note("missing_fields", lineno, "missing user, basket or item")
            continue
        try:
            ts = int(rec["time"])
        except (TypeError, ValueError):
            report.note("malformed", lineno, f"bad time {rec['time']!r}")
            continue
        report.kept += 1
        yield RawTransaction(user, basket, ts, item)


_READERS = {"tafeng": _tafeng, "dunnhumby": _dunnhumby, "instacart": _instacart, "canonical": _canonical}


def parse_source(path: str | os.PathLike, schema: str, report: ParseReport | None = None) -> Iterator[RawTransaction]:
    """Stream one :class:`RawTransaction` per usable source row.

    Rows lacking a user or item are dropped, rows with unparseable values are
    skipped; both are counted in ``report``. Unknown schemas raise
    :class:`ConfigError` and unreadable paths raise ``OSError`` immediately,
    before iteration starts.
    """
    if schema not in _READERS:
        raise ConfigError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    if path.is_dir() and schema != "instacart":
        raise IsADirectoryError(f"{path}: expected a file for schema {schema!r}")
    if report is None:
        report = ParseReport()
    return _logged(_READERS[schema](path, report), path, report)


def _logged(rows: Iterator[RawTransaction], path: Path, report: ParseReport) -> Iterator[RawTransaction]:
    yield from rows
    if report.missing_fields or report.malformed:
        logger.warning(
            "%s: dropped %d rows with missing fields and %d malformed rows (e.g. %s)",
            path, report.missing_fields, report.malformed, "; ".join(report.examples),
        )


def limit_days(transactions: Iterable[RawTransaction], max_days: int) -> list[RawTransaction]:
    """Keep transactions from the first ``max_days`` calendar days of the log."""
    if max_days < 1:
        raise ConfigError("max_days must be >= 1")
    rows = list(transactions)
    if not rows:
        return rows
    first = min(t.time_key for t in rows) // SECONDS_PER_DAY
    return [t for t in rows if t.time_key // SECONDS_PER_DAY < first + max_days]


# --- baskets, filtering, split ------------------------------------------

def build_baskets(transactions: Iterable[RawTransaction]) -> dict[str, list[Basket]]:
    """Group rows into per-user basket sequences keyed by source item keys.

    Duplicate (user, basket, item) rows collapse. Baskets are ordered by time
    and then by basket key, so the result does not depend on row order.
    """
    groups: dict[str, dict[str, list]] = defaultdict(dict)
    for t in transactions:
        slot = groups[t.user_key].get(t.basket_key)
        if slot is None:
            groups[t.user_key][t.basket_key] = [t.time_key, {t.item_key}]
        else:
            slot[0] = min(slot[0], t.time_key)
            slot[1].add(t.item_key)
    users = {}
    for user in sorted(groups, key=natural_key):
        ordered = sorted(groups[user].items(), key=lambda kv: (kv[1][0], natural_key(kv[0])))
        users[user] = [Basket(ts, frozenset(items)) for _, (ts, items) in ordered]
    return users


def _apply_size_bounds(users: Mapping[str, list[Basket]], cfg: PreprocessConfig) -> dict[str, list[Basket]]:
    lo, hi = cfg.min_baskets_per_user, cfg.max_baskets_per_user
    if cfg.size_filter == "basket-count":
        return {u: list(bs) for u, bs in users.items() if lo <= len(bs) <= hi}
    out = {}
    for u, bs in users.items():
        kept = [b for b in bs if lo <= len(b) <= hi]
        if len(kept) >= MIN_SPLIT_BASKETS:
            out[u] = kept
    return out


def coverage_items(users: Mapping[str, Sequence[Basket]], coverage: float) -> set:
    """Smallest set of most frequent items holding ``coverage`` of all interactions.

    Items are ranked by basket frequency, ties by earliest appearance and
    then by key.
    """
    counts: Counter = Counter()
    first_seen: dict = {}
    for bs in users.values():
        for b in bs:
            for i in b.items:
                counts[i] += 1
                if i not in first_seen or b.timestamp < first_seen[i]:
                    first_seen[i] = b.timestamp
    total = sum(counts.values())
    ranked = sorted(counts, key=lambda i: (-counts[i], first_seen[i], natural_key(i)))
    if coverage >= 1.0:
        return set(ranked)
    need = coverage * total
    kept, running = set(), 0
    for item in ranked:
        if running >= need - 1e-9 * total:
            break
        kept.add(item)
        running += counts[item]
    return kept


def filter_dataset(users: Mapping[str, Sequence[Basket]], cfg: PreprocessConfig) -> dict[str, list[Basket]]:
    """Size bounds, rare-item removal, empty-basket removal, size bounds again."""
    stage = _apply_size_bounds(users, cfg)
    if not stage:
        raise EmptyDatasetError("no user satisfies the basket bounds")
    keep = coverage_items(stage, cfg.interaction_coverage)
    pruned = {}
    for u, bs in stage.items():
        kept = [Basket(b.timestamp, b.items & keep) for b in bs if b.items & keep]
        if kept:
            pruned[u] = kept
    out = _apply_size_bounds(pruned, cfg)
    if not out:
        raise EmptyDatasetError("every user was removed by filtering")
    logger.info("filter: %d -> %d users, %d items kept", len(users), len(out), len(keep))
    return out


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """(train, val, test) basket counts for a user with ``n`` baskets."""
    _, f_va, f_te = fractions
    # the epsilon absorbs products like 0.2 * 35 = 6.999...
    n_test = max(1, math.floor(f_te * n + 1e-9))
    n_val = max(1, math.floor(f_va * n + 1e-9))
    return n - n_val - n_test, n_val, n_test


def split_per_user(
    users: Mapping[str, Sequence[Basket]],
    fractions: Sequence[float] = (0.72, 0.08, 0.20),
    name: str = "dataset",
    vocabulary: Vocabulary | None = None,
) -> DatasetBundle:
    """Chronological train/validation/test split and item re-indexing.

    Items in ``users`` are source keys; they are mapped to dense ids through
    ``vocabulary``, which defaults to all remaining keys in natural order.
    """
    if vocabulary is None:
        keys = {i for bs in users.values() for b in bs for i in b.items}
        vocabulary = Vocabulary(tuple(sorted(keys, key=natural_key)))
    out = {}
    dropped = 0
    for u, bs in users.items():
        n_tr, n_va, n_te = split_sizes(len(bs), fractions)
        if n_tr < 1:
            dropped += 1
            continue
        mapped = tuple(Basket(b.timestamp, frozenset(vocabulary.id_of(str(i)) for i in b.items)) for b in bs)
        out[u] = UserSplit(mapped[:n_tr], mapped[n_tr : n_tr + n_va], mapped[n_tr + n_va :])
    if dropped:
        logger.warning("split: dropped %d users with too few baskets for a training segment", dropped)
    if not out:
        raise EmptyDatasetError("no user has enough baskets to split")
    return DatasetBundle(name, out, vocabulary)


def preprocess(transactions: Iterable[RawTransaction], cfg: PreprocessConfig, name: str = "dataset") -> DatasetBundle:
    users = build_baskets(transactions)
    if not users:
        raise EmptyDatasetError("source contains no transactions")
    return split_per_user(filter_dataset(users, cfg), cfg.split_fractions, name)
