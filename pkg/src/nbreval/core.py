"""Domain types shared by every stage, and the repeat/explore partition."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

ItemId = int


def partition_basket(
    items: Iterable[ItemId], history_repeat_set: frozenset | set
) -> tuple[frozenset, frozenset]:
    """Split ``items`` into (repeat part, explore part) w.r.t. a user's history.

    An item is a repeat item iff it occurs in some earlier basket of the user.
    """
    items = frozenset(items)
    repeat_part = items & history_repeat_set
    return frozenset(repeat_part), items - repeat_part


@dataclass(frozen=True)
class Basket:
    timestamp: int
    items: frozenset

    def __post_init__(self):
        if not isinstance(self.items, frozenset):
            object.__setattr__(self, "items", frozenset(self.items))
        if not self.items:
            raise ValueError("a basket must contain at least one item")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator:
        return iter(self.items)


@dataclass(frozen=True)
class UserHistory:
    """A user's baskets in chronological order.

    ``repeat_set`` is derived: the union of every basket's items.
    """

    user_id: str
    baskets: tuple[Basket, ...] = ()
    repeat_set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        baskets = tuple(self.baskets)
        object.__setattr__(self, "baskets", baskets)
        for prev, cur in zip(baskets, baskets[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValueError(f"user {self.user_id!r}: baskets are not in chronological order")
        object.__setattr__(self, "repeat_set", frozenset().union(*(b.items for b in baskets)))

    def __len__(self) -> int:
        return len(self.baskets)

    def extended(self, basket: Basket) -> UserHistory:
        return UserHistory(self.user_id, self.baskets + (basket,))


@dataclass(frozen=True)
class GroundTruth:
    target: frozenset
    repeat_part: frozenset
    explore_part: frozenset

    @classmethod
    def from_target(cls, target: Iterable[ItemId], repeat_set: frozenset) -> GroundTruth:
        target = frozenset(target)
        rep, expl = partition_basket(target, repeat_set)
        return cls(target, rep, expl)


@dataclass(frozen=True)
class RankedPrediction:
    """Ordered predicted basket for one evaluation instance.

    ``capacity`` is the basket size K; a shorter ``items`` list leaves the
    trailing slots empty.
    """

    user_id: str
    capacity: int
    items: tuple[ItemId, ...]
    scores: tuple[float, ...] | None = None
    target: int = 0

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.items) > self.capacity:
            raise ValueError(f"user {self.user_id!r}: {len(self.items)} items exceed capacity {self.capacity}")
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"user {self.user_id!r}: duplicate items in prediction")
        if self.scores is not None:
            if len(self.scores) != len(self.items):
                raise ValueError(f"user {self.user_id!r}: scores and items differ in length")
            if any(b > a for a, b in zip(self.scores, self.scores[1:])):
                raise ValueError(f"user {self.user_id!r}: scores must be non-increasing")

    @property
    def key(self) -> tuple[str, int]:
        return (self.user_id, self.target)

    def truncate(self, k: int) -> RankedPrediction:
        """Prefix of length ``k`` with capacity ``k``."""
        if k > self.capacity:
            raise ValueError(f"cannot evaluate at K={k} a prediction of capacity {self.capacity}")
        scores = None if self.scores is None else self.scores[:k]
        return RankedPrediction(self.user_id, k, self.items[:k], scores, self.target)


@dataclass(frozen=True)
class EvalInstance:
    """One prediction target: the history strictly before it and the truth."""

    history: UserHistory
    truth: GroundTruth
    target_index: int = 0

    @classmethod
    def from_baskets(
        cls, user_id: str, history: Sequence[Basket], target: Basket, target_index: int = 0
    ) -> EvalInstance:
        hist = UserHistory(user_id, tuple(history))
        return cls(hist, GroundTruth.from_target(target.items, hist.repeat_set), target_index)

    @property
    def user_id(self) -> str:
        return self.history.user_id

    @property
    def key(self) -> tuple[str, int]:
        return (self.history.user_id, self.target_index)


@dataclass(frozen=True)
class EvalCohort:
    instances: tuple[EvalInstance, ...]

    def __post_init__(self):
        instances = tuple(sorted(self.instances, key=lambda inst: inst.key))
        keys = [inst.key for inst in instances]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (user, target) keys in cohort")
        object.__setattr__(self, "instances", instances)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[EvalInstance]:
        return iter(self.instances)

    @property
    def N(self) -> int:
        return len(self.instances)

    @property
    def N_r(self) -> int:
        return sum(1 for inst in self.instances if inst.truth.repeat_part)

    @property
    def N_e(self) -> int:
        return sum(1 for inst in self.instances if inst.truth.explore_part)

    def keys(self) -> list[tuple[str, int]]:
        return [inst.key for inst in self.instances]

    def by_key(self) -> dict[tuple[str, int], EvalInstance]:
        return {inst.key: inst for inst in self.instances}
