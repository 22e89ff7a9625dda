"""Access to literature-reported benchmark values shipped with the library.

These numbers let reports show comparison columns next to locally computed
results. They were not produced by this implementation and are always
labeled as reported values when rendered.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

__all__ = [
    "load_reference",
    "canonical_dataset_key",
    "reported_mae",
    "literature_models",
]


@lru_cache(maxsize=1)
def load_reference() -> dict:
    text = resources.files("sinecast").joinpath("reference_tables.json").read_text("utf-8")
    return json.loads(text)


def canonical_dataset_key(name: str) -> str | None:
    """Map a free-form dataset name onto a benchmark key, if it is one.

    Matching is case-insensitive and ignores non-alphanumerics, so
    "Milan T", "milan-temperature", and "milan_temperature" all resolve.
    """
    ref = load_reference()
    squashed = re.sub(r"[^a-z0-9]", "", name.lower())
    if not squashed:
        return None
    for key, info in ref["datasets"].items():
        candidates = {re.sub(r"[^a-z0-9]", "", key), re.sub(r"[^a-z0-9]", "", info["display"].lower())}
        if squashed in candidates:
            return key
    return None


def reported_mae(dataset: str, horizon: int, model: str) -> float | None:
    """Reported MAE for a benchmark cell, or None when there is no entry."""
    ref = load_reference()
    key = canonical_dataset_key(dataset)
    if key is None:
        return None
    by_horizon = ref["reported_mae"].get(key, {})
    row = by_horizon.get(str(horizon))
    if row is None:
        row = ref["reported_extreme_horizon_mae"].get(key, {}).get(str(horizon), {})
    value = row.get(model)
    return float(value) if value is not None else None


def literature_models() -> list[str]:
    return list(load_reference()["literature_only_models"])
