"""Frequency and neighbour baselines behind one :class:`Recommender` interface."""

from __future__ import annotations

from dataclasses import asdict

from nbreval.baselines.base import Recommender, top_k
from nbreval.baselines.frequency import (
    GlobalFreqModel,
    GPTopFreq,
    GTopFreq,
    PersonalFreqTable,
    PTopFreq,
    g_topfreq,
    gp_topfreq,
    p_topfreq,
    personal_counts,
)
from nbreval.baselines.tifuknn import TIFUKNN, TifuknnParams, build_pif, tifuknn_predict
from nbreval.baselines.upcf import UPCF, UpcfParams, upcf_predict, user_wise_popularity
from nbreval.errors import ConfigError

METHODS = {
    "g-topfreq": GTopFreq,
    "p-topfreq": PTopFreq,
    "gp-topfreq": GPTopFreq,
    "tifuknn": TIFUKNN,
    "upcf": UPCF,
}
METHOD_GROUPS = {
    "all-frequency": ["g-topfreq", "p-topfreq", "gp-topfreq"],
    "all-neighbor": ["tifuknn", "upcf"],
    "all": ["g-topfreq", "p-topfreq", "gp-topfreq", "tifuknn", "upcf"],
}
PARAM_TYPES = {"tifuknn": TifuknnParams, "upcf": UpcfParams}

SMALL_GRID = {
    "tifuknn": [
        TifuknnParams(k_neighbors=k, alpha=a) for k in (100, 300) for a in (0.5, 0.7, 0.9)
    ],
    "upcf": [
        UpcfParams(recency_window=r, locality=q) for r in (1, 5, 10) for q in (1, 5)
    ],
}


def resolve_methods(name: str) -> list[str]:
    if name in METHOD_GROUPS:
        return list(METHOD_GROUPS[name])
    if name in METHODS:
        return [name]
    raise ConfigError(f"unknown method {name!r}; choose from {sorted(METHODS) + sorted(METHOD_GROUPS)}")


def make_recommender(name: str, params=None) -> Recommender:
    """Instantiate a baseline; ``params`` may be a params object or a dict of overrides."""
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}")
    cls = METHODS[name]
    if name not in PARAM_TYPES:
        return cls()
    if isinstance(params, dict):
        try:
            params = PARAM_TYPES[name](**params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for {name}: {exc}") from exc
    return cls(params)


def params_dict(model: Recommender) -> dict:
    params = getattr(model, "params", None)
    return asdict(params) if params is not None else {}


__all__ = [
    "GPTopFreq",
    "GTopFreq",
    "GlobalFreqModel",
    "METHODS",
    "METHOD_GROUPS",
    "PTopFreq",
    "PersonalFreqTable",
    "Recommender",
    "SMALL_GRID",
    "TIFUKNN",
    "TifuknnParams",
    "UPCF",
    "UpcfParams",
    "build_pif",
    "g_topfreq",
    "gp_topfreq",
    "make_recommender",
    "p_topfreq",
    "params_dict",
    "personal_counts",
    "resolve_methods",
    "tifuknn_predict",
    "top_k",
    "upcf_predict",
    "user_wise_popularity",
]
