"""Seeded synthetic basket sequences with a controllable repeat probability.

Every item slot of a basket is, with probability ``repeat_prob``, drawn
uniformly from the items the user has bought before (excluding items already
in the basket); otherwise it is drawn from a power-law popularity
distribution over the catalogue. Each user has its own PCG64 stream derived
from ``SeedSequence(seed, spawn_key=(user_index,))``, so users can be
generated in any order or in parallel with identical results.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from nbreval._io import ordered_map
from nbreval.core import Basket
from nbreval.dataset import DatasetBundle, Vocabulary
from nbreval.errors import ConfigError
from nbreval.ingest import MIN_SPLIT_BASKETS, split_per_user


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 500
    n_items: int = 1000
    baskets_per_user: tuple[int, int] = (4, 20)
    basket_size: tuple[int, int] = (3, 10)
    repeat_prob: float = 0.5
    popularity_exponent: float = 1.0
    seed: int = 0
    name: str = "synthetic"
    split_fractions: tuple[float, float, float] = (0.72, 0.08, 0.20)

    def __post_init__(self):
        for name in ("baskets_per_user", "basket_size", "split_fractions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        lo, hi = self.baskets_per_user
        if not MIN_SPLIT_BASKETS <= lo <= hi:
            raise ConfigError(f"baskets_per_user must satisfy {MIN_SPLIT_BASKETS} <= low <= high")
        s_lo, s_hi = self.basket_size
        if not 1 <= s_lo <= s_hi <= self.n_items:
            raise ConfigError("basket_size must satisfy 1 <= low <= high <= n_items")
        if self.n_users < 1:
            raise ConfigError("n_users must be >= 1")
        if not 0.0 <= self.repeat_prob <= 1.0:
            raise ConfigError("repeat_prob must lie in [0, 1]")
        if self.popularity_exponent < 0:
            raise ConfigError("popularity_exponent must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, data: dict) -> SynthConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def popularity_cdf(n_items: int, exponent: float) -> np.ndarray:
    """CDF of ``p(i) ~ (i + 1) ** -exponent``; item 0 is the most popular."""
    weights = np.arange(1, n_items + 1, dtype=float) ** -exponent
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def user_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def generate_user(cfg: SynthConfig, index: int, cdf: np.ndarray | None = None) -> list[list[int]]:
    """Basket sequence (lists of item indices) for user ``index``."""
    if cdf is None:
        cdf = popularity_cdf(cfg.n_items, cfg.popularity_exponent)
    rng = user_rng(cfg.seed, index)
    n_baskets = int(rng.integers(cfg.baskets_per_user[0], cfg.baskets_per_user[1] + 1))
    seen: set[int] = set()
    baskets = []
    for _ in range(n_baskets):
        size = int(rng.integers(cfg.basket_size[0], cfg.basket_size[1] + 1))
        basket: list[int] = []
        in_basket: set[int] = set()
        for _ in range(size):
            if seen and rng.random() < cfg.repeat_prob:
                candidates = sorted(seen - in_basket)
                if not candidates:
                    # every known item is already in the basket; the slot stays empty
                    continue
                item = candidates[int(rng.integers(len(candidates)))]
            else:
                while True:
                    item = min(int(np.searchsorted(cdf, rng.random(), side="right")), cfg.n_items - 1)
                    if item not in in_basket:
                        break
            basket.append(item)
            in_basket.add(item)
        seen |= in_basket
        baskets.append(sorted(basket))
    return baskets


def generate(cfg: SynthConfig, workers: int = 1) -> DatasetBundle:
    cdf = popularity_cdf(cfg.n_items, cfg.popularity_exponent)
    width = len(str(cfg.n_items - 1))
    keys = tuple(f"i{i:0{width}d}" for i in range(cfg.n_items))
    u_width = len(str(cfg.n_users - 1))
    sequences = ordered_map(lambda idx: generate_user(cfg, idx, cdf), list(range(cfg.n_users)), workers, chunk=64)
    users = {
        f"u{idx:0{u_width}d}": [Basket(t, frozenset(keys[i] for i in b)) for t, b in enumerate(seq)]
        for idx, seq in enumerate(sequences)
    }
    return split_per_user(users, cfg.split_fractions, cfg.name, Vocabulary(keys))
