"""The canonical preprocessed dataset, its statistics, cohorts and on-disk format."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

from nbreval._io import atomic_write_text, dumps, iter_lines, sha256_file, sha256_text, write_json
from nbreval.core import Basket, EvalCohort, EvalInstance
from nbreval.errors import ConfigError, FormatError

logger = logging.getLogger(__name__)

CANONICAL_FORMAT = "nbr-canonical-v1"
BASKETS_FILE = "baskets.jsonl"
VOCAB_FILE = "vocab.jsonl"
SPLIT_FILE = "split.json"
MANIFEST_FILE = "manifest.json"

TARGET_MODES = ("rolling", "first-test-basket")


@dataclass(frozen=True)
class Vocabulary:
    """Dense item ids ``0..n-1``; ``keys[i]`` is the source key of item ``i``."""

    keys: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        keys = tuple(str(k) for k in self.keys)
        object.__setattr__(self, "keys", keys)
        index = {k: i for i, k in enumerate(keys)}
        if len(index) != len(keys):
            raise ValueError("vocabulary keys must be unique")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self._index

    def id_of(self, key: str) -> int:
        return self._index[key]

    def key_of(self, item: int) -> str:
        return self.keys[item]

    @cached_property
    def sha256(self) -> str:
        # id order is the canonical order; a different filter or mapping changes the digest
        return sha256_text("\n".join(f"{i}\t{k}" for i, k in enumerate(self.keys)))


@dataclass(frozen=True)
class UserSplit:
    train: tuple[Basket, ...]
    val: tuple[Basket, ...]
    test: tuple[Basket, ...]

    @property
    def baskets(self) -> tuple[Basket, ...]:
        return self.train + self.val + self.test

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))


@dataclass(frozen=True)
class DatasetStats:
    n_items: int
    n_users: int
    avg_basket_size: float
    avg_baskets_per_user: float
    repeat_ratio: float
    explore_ratio: float

    def to_table(self, name: str = "") -> str:
        header = f"{'Dataset':<12}{'#items':>9}{'#users':>9}{'avg.size':>10}{'baskets/user':>14}{'repeat':>9}{'explore':>9}"
        row = (
            f"{name:<12}{self.n_items:>9,}{self.n_users:>9,}{self.avg_basket_size:>10.2f}"
            f"{self.avg_baskets_per_user:>14.2f}{self.repeat_ratio:>9.3f}{self.explore_ratio:>9.3f}"
        )
        return header + "\n" + row


@dataclass(frozen=True)
class DatasetBundle:
    name: str
    users: Mapping[str, UserSplit]
    vocabulary: Vocabulary

    def __post_init__(self):
        object.__setattr__(self, "users", {u: self.users[u] for u in sorted(self.users)})
        n = len(self.vocabulary)
        for user, split in self.users.items():
            prev = None
            for b in split.baskets:
                if prev is not None and b.timestamp < prev:
                    raise ValueError(f"user {user!r}: segments are not chronologically ordered")
                prev = b.timestamp
                if any(not (0 <= i < n) for i in b.items):
                    raise ValueError(f"user {user!r}: item id outside vocabulary")

    @cached_property
    def stats(self) -> DatasetStats:
        return compute_stats(self)

    def fit_histories(self, segment: str = "test", history_includes_validation: bool = True) -> dict[str, tuple[Basket, ...]]:
        """Per-user baskets that precede ``segment``; what models are fit on."""
        if segment == "test":
            if history_includes_validation:
                return {u: s.train + s.val for u, s in self.users.items()}
            return {u: s.train for u, s in self.users.items()}
        if segment == "val":
            return {u: s.train for u, s in self.users.items()}
        raise ConfigError(f"unknown segment {segment!r}")


def build_cohort(
    bundle: DatasetBundle,
    segment: str = "test",
    target_mode: str = "rolling",
    history_includes_validation: bool = True,
) -> EvalCohort:
    """Evaluation instances for ``segment``.

    Rolling mode yields one instance per target basket, with history = every
    basket before it; ``first-test-basket`` keeps only the first target.
    With ``history_includes_validation=False`` the validation segment is left
    out of test histories.
    """
    if target_mode not in TARGET_MODES:
        raise ConfigError(f"unknown target mode {target_mode!r}; expected one of {TARGET_MODES}")
    prefix = bundle.fit_histories(segment, history_includes_validation)
    instances = []
    for user, split in bundle.users.items():
        targets = split.test if segment == "test" else split.val
        if target_mode == "first-test-basket":
            targets = targets[:1]
        history = prefix[user]
        for j, target in enumerate(targets):
            instances.append(EvalInstance.from_baskets(user, history, target, j))
            history = history + (target,)
    return EvalCohort(tuple(instances))


def compute_stats(bundle: DatasetBundle, target_mode: str = "rolling") -> DatasetStats:
    if not bundle.users:
        raise ValueError("cannot compute statistics of an empty bundle")
    baskets = [b for s in bundle.users.values() for b in s.baskets]
    cohort = build_cohort(bundle, "test", target_mode)
    if cohort.N:
        repeat_ratio = sum(len(i.truth.repeat_part) / len(i.truth.target) for i in cohort) / cohort.N
    else:
        repeat_ratio = 0.0
    return DatasetStats(
        n_items=len({i for b in baskets for i in b.items}),
        n_users=len(bundle.users),
        avg_basket_size=sum(len(b) for b in baskets) / len(baskets),
        avg_baskets_per_user=len(baskets) / len(bundle.users),
        repeat_ratio=repeat_ratio,
        explore_ratio=1.0 - repeat_ratio,
    )


def write_canonical(bundle: DatasetBundle, directory: str | os.PathLike) -> Path:
    """Write ``bundle`` as a directory of line-JSON files plus a checksummed manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    basket_lines = []
    for user, split in bundle.users.items():
        baskets = [{"ts": b.timestamp, "items": sorted(b.items)} for b in split.baskets]
        basket_lines.append(dumps({"user": user, "baskets": baskets}))
    vocab_lines = [dumps({"id": i, "key": k}) for i, k in enumerate(bundle.vocabulary.keys)]
    split_obj = {u: list(s.sizes) for u, s in bundle.users.items()}

    atomic_write_text(directory / BASKETS_FILE, "".join(line + "\n" for line in basket_lines))
    atomic_write_text(directory / VOCAB_FILE, "".join(line + "\n" for line in vocab_lines))
    write_json(directory / SPLIT_FILE, split_obj)
    manifest = {
        "format": CANONICAL_FORMAT,
        "name": bundle.name,
        "n_users": len(bundle.users),
        "n_items": len(bundle.vocabulary),
        "vocab_sha256": bundle.vocabulary.sha256,
        "files": {f: sha256_file(directory / f) for f in (BASKETS_FILE, VOCAB_FILE, SPLIT_FILE)},
    }
    write_json(directory / MANIFEST_FILE, manifest)
    return directory


def load_canonical(directory: str | os.PathLike) -> DatasetBundle:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != CANONICAL_FORMAT:
        found = manifest.get("format") if isinstance(manifest, dict) else None
        raise FormatError(f"{directory}: expected format {CANONICAL_FORMAT!r}, found {found!r}")
    for fname, digest in manifest.get("files", {}).items():
        if sha256_file(directory / fname) != digest:
            raise FormatError(f"{directory / fname}: checksum mismatch, file is corrupt or was edited")

    try:
        vocab_rows = [json.loads(line) for line in iter_lines(directory / VOCAB_FILE)]
        vocab_rows.sort(key=lambda r: r["id"])
        if [r["id"] for r in vocab_rows] != list(range(len(vocab_rows))):
            raise FormatError("vocabulary ids are not dense 0..n-1")
        vocabulary = Vocabulary(tuple(r["key"] for r in vocab_rows))
        split = json.loads((directory / SPLIT_FILE).read_text(encoding="utf-8"))
        users = {}
        for line in iter_lines(directory / BASKETS_FILE):
            row = json.loads(line)
            baskets = tuple(Basket(int(b["ts"]), frozenset(int(i) for i in b["items"])) for b in row["baskets"])
            n_tr, n_va, n_te = split[row["user"]]
            if n_tr + n_va + n_te != len(baskets):
                raise FormatError(f"user {row['user']!r}: split sizes do not add up to the basket count")
            users[row["user"]] = UserSplit(baskets[:n_tr], baskets[n_tr : n_tr + n_va], baskets[n_tr + n_va :])
        if set(users) != set(split):
            raise FormatError(f"{directory}: split file and basket file list different users")
        bundle = DatasetBundle(manifest.get("name", directory.name), users, vocabulary)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{directory}: malformed canonical dataset ({exc})") from exc
    if bundle.vocabulary.sha256 != manifest.get("vocab_sha256"):
        raise FormatError(f"{directory}: vocabulary checksum does not match manifest")
    return bundle
